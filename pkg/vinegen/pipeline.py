"""Vine copula autoencoder: train, encode, fit latent copula models, sample, decode."""

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np

from vinegen.autoencoder import DenseAutoencoder, TrainConfig, train
from vinegen.bicop import GRID_SIZE, BicopFamily
from vinegen.errors import BundleFormatError, DomainError, UnknownLabelError
from vinegen.joint import JointModel, fit_joint
from vinegen.marginals import DEFAULT_GRID_SIZE
from vinegen.workers import ordered_map

MIN_CLASS_SIZE = 100

# called with (label, latent model) every time a latent model is used
LatentObserver = Callable[[Optional[int], JointModel], None]


@dataclass(frozen=True, eq=False)
class VcaeModel:
    ae: DenseAutoencoder
    latent: JointModel
    classes: Dict[int, JointModel] = field(default_factory=dict)
    history: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        for label, model in [(None, self.latent), *self.classes.items()]:
            if model.d != self.ae.latent_dim:
                raise DomainError(
                    f"Latent model for label {label} has d={model.d}, "
                    f"autoencoder bottleneck is {self.ae.latent_dim}"
                )

    @property
    def labels(self) -> list[int]:
        return sorted(self.classes)

    def latent_model(
        self, label: Optional[int] = None, observer: Optional[LatentObserver] = None
    ) -> JointModel:
        if label is None:
            model = self.latent
        else:
            if label not in self.classes:
                raise UnknownLabelError(label, self.classes)
            model = self.classes[label]
        if observer is not None:
            observer(label, model)
        return model

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ae": self.ae.to_dict(),
            "latent": self.latent.to_dict(),
            "classes": {str(label): self.classes[label].to_dict() for label in self.labels},
            "history": list(self.history),
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "VcaeModel":
        try:
            return cls(
                ae=DenseAutoencoder.from_dict(payload["ae"]),
                latent=JointModel.from_dict(payload["latent"]),
                classes={
                    int(label): JointModel.from_dict(model)
                    for label, model in payload.get("classes", {}).items()
                },
                history=tuple(float(h) for h in payload.get("history", ())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise BundleFormatError(f"Invalid VCAE payload: {exc}") from exc


def vcae_fit(
    data: np.ndarray,
    labels: Optional[np.ndarray] = None,
    ae_cfg: Optional[TrainConfig] = None,
    vine_family: BicopFamily | str = BicopFamily.TLL,
    trunc_level: Optional[int] = None,
    *,
    ae: Optional[DenseAutoencoder] = None,
    min_class_size: int = MIN_CLASS_SIZE,
    kde_grid_size: int = DEFAULT_GRID_SIZE,
    bicop_grid_size: int = GRID_SIZE,
    bandwidth_mult: float = 1.0,
    threads: int = 1,
) -> VcaeModel:
    """Train the autoencoder (unless ``ae`` is given) and fit latent vine models.

    With labels, one latent model is additionally fitted per class with at
    least ``min_class_size`` members; smaller classes are skipped with a
    warning and cannot be sampled.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise DomainError(f"Expected an (n, p) array, got shape {x.shape}")
    if labels is not None:
        labels = np.asarray(labels, dtype=int)
        if labels.shape != (x.shape[0],):
            raise DomainError(f"{labels.size} labels for {x.shape[0]} rows")
    started = time.perf_counter()
    history: tuple[float, ...] = ()
    if ae is None:
        result = train(x, ae_cfg or TrainConfig())
        ae, history = result.model, tuple(result.history)
    z = ae.encode(x)

    def fit_latent(rows: np.ndarray, workers: int = threads) -> JointModel:
        return fit_joint(
            rows,
            vine_family,
            trunc_level=trunc_level,
            kde_grid_size=kde_grid_size,
            bicop_grid_size=bicop_grid_size,
            bandwidth_mult=bandwidth_mult,
            threads=workers,
        )

    latent = fit_latent(z)
    classes: Dict[int, JointModel] = {}
    if labels is not None:
        eligible = []
        for label in np.unique(labels):
            size = int(np.sum(labels == label))
            if size < min_class_size:
                logging.warning(
                    "Class %s has %s samples (< %s); no conditional model fitted",
                    label,
                    size,
                    min_class_size,
                )
                continue
            eligible.append(int(label))
        # class fits run side by side; their inner pools share the budget
        outer = max(1, min(threads, len(eligible)))
        inner = max(1, threads // outer)
        fitted = ordered_map(
            lambda lbl: fit_latent(z[labels == lbl], inner), eligible, outer
        )
        classes = dict(zip(eligible, fitted))
    logging.info(
        "VCAE fitted: n=%s p=%s latent=%s classes=%s in %.2fs",
        x.shape[0],
        x.shape[1],
        ae.latent_dim,
        sorted(classes),
        time.perf_counter() - started,
    )
    return VcaeModel(ae=ae, latent=latent, classes=classes, history=history)


def sample_latents(
    m: VcaeModel,
    n: int,
    seed: Optional[int] = None,
    label: Optional[int] = None,
    observer: Optional[LatentObserver] = None,
) -> np.ndarray:
    return m.latent_model(label, observer).sample(n, seed)


def vcae_sample(
    m: VcaeModel,
    n: int,
    seed: Optional[int] = None,
    label: Optional[int] = None,
    observer: Optional[LatentObserver] = None,
) -> np.ndarray:
    if n < 0:
        raise DomainError(f"Sample size must be >= 0, got {n}")
    z = sample_latents(m, n, seed, label, observer)
    images = m.ae.decode(z)
    logging.info("Sampled %s images (label=%s)", n, label)
    return images


def latent_interpolate(
    m: VcaeModel, xa: np.ndarray, xb: np.ndarray, steps: int
) -> np.ndarray:
    if steps < 2:
        raise DomainError(f"Interpolation needs at least 2 steps, got {steps}")
    za = m.ae.encode(np.asarray(xa, dtype=float).reshape(1, -1))
    zb = m.ae.encode(np.asarray(xb, dtype=float).reshape(1, -1))
    frames = [
        m.ae.decode((1.0 - t) * za + t * zb) for t in np.linspace(0.0, 1.0, steps)
    ]
    return np.vstack(frames)
