import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

from vinegen import __version__
from vinegen.autoencoder import DenseAutoencoder
from vinegen.bicop import BivariateCopula
from vinegen.csv_io import file_fingerprint
from vinegen.errors import BundleFormatError
from vinegen.joint import JointModel
from vinegen.marginals import KernelMarginal
from vinegen.pipeline import VcaeModel

BUNDLE_FORMAT_VERSION = 1

# kind -> class with to_dict / from_dict; "vine" bundles carry the marginals too
KINDS: Dict[str, Any] = {
    "marginal": KernelMarginal,
    "bicop": BivariateCopula,
    "vine": JointModel,
    "ae": DenseAutoencoder,
    "vcae": VcaeModel,
}


def build_metadata(
    seed: Optional[int] = None,
    data_path: Optional[Path | str] = None,
    source_date_epoch: Optional[int] = None,
    **extra: Any,
) -> Dict[str, Any]:
    # source_date_epoch pins created_at so repeated runs write identical bytes
    if source_date_epoch is not None:
        created = datetime.fromtimestamp(source_date_epoch, tz=timezone.utc)
    else:
        created = datetime.now(tz=timezone.utc).replace(microsecond=0)
    metadata: Dict[str, Any] = {
        "created_at": created.isoformat(),
        "vinegen_version": __version__,
        "seed": seed,
    }
    if data_path is not None:
        metadata["data_file"] = Path(data_path).name
        metadata["data_fnv1a64"] = file_fingerprint(data_path)
    metadata.update({key: value for key, value in extra.items() if value is not None})
    return metadata


@dataclass
class ModelBundle:
    kind: str
    payload: Dict[str, Any]
    metadata: Dict[str, Any] = field(default_factory=dict)
    format_version: int = BUNDLE_FORMAT_VERSION

    @classmethod
    def wrap(cls, kind: str, model: Any, metadata: Optional[Dict[str, Any]] = None) -> "ModelBundle":
        if kind not in KINDS:
            raise BundleFormatError(f"Unknown bundle kind {kind!r}; known kinds: {sorted(KINDS)}")
        if not isinstance(model, KINDS[kind]):
            raise BundleFormatError(
                f"Bundle kind {kind!r} expects {KINDS[kind].__name__}, got {type(model).__name__}"
            )
        return cls(kind=kind, payload=model.to_dict(), metadata=dict(metadata or {}))

    def model(self) -> Any:
        return KINDS[self.kind].from_dict(self.payload)

    def to_json(self) -> str:
        document = {
            "format_version": self.format_version,
            "kind": self.kind,
            "metadata": self.metadata,
            "payload": self.payload,
        }
        return json.dumps(document, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str, expected_kind: Optional[str] = None) -> "ModelBundle":
        try:
            document = json.loads(text)
        except json.JSONDecodeError as exc:
            raise BundleFormatError(f"Bundle is not valid JSON: {exc.msg}", offset=exc.pos) from exc
        if not isinstance(document, dict):
            raise BundleFormatError("Bundle must be a JSON object")
        version = document.get("format_version")
        if version != BUNDLE_FORMAT_VERSION:
            raise BundleFormatError(
                f"Unsupported bundle format_version {version!r}; "
                f"this build reads version {BUNDLE_FORMAT_VERSION}"
            )
        kind = document.get("kind")
        if kind not in KINDS:
            raise BundleFormatError(f"Unknown bundle kind {kind!r}; known kinds: {sorted(KINDS)}")
        if expected_kind is not None and kind != expected_kind:
            raise BundleFormatError(f"Expected a {expected_kind!r} bundle, found {kind!r}")
        payload = document.get("payload")
        if not isinstance(payload, dict):
            raise BundleFormatError("Bundle payload must be a JSON object")
        return cls(
            kind=kind,
            payload=payload,
            metadata=dict(document.get("metadata") or {}),
            format_version=version,
        )

    def save(self, path: Path | str) -> Path:
        path = Path(path)
        path.write_text(self.to_json(), encoding="utf-8")
        logging.info("Wrote %s bundle to %s", self.kind, path)
        return path


def load_bundle(path: Path | str, expected_kind: Optional[str] = None) -> ModelBundle:
    path = Path(path)
    bundle = ModelBundle.from_json(path.read_text(encoding="utf-8"), expected_kind)
    logging.debug("Loaded %s bundle from %s", bundle.kind, path)
    return bundle


def save_model(
    path: Path | str, kind: str, model: Any, metadata: Optional[Dict[str, Any]] = None
) -> Path:
    return ModelBundle.wrap(kind, model, metadata).save(path)


def load_model(path: Path | str, expected_kind: Optional[str] = None) -> Any:
    return load_bundle(path, expected_kind).model()
