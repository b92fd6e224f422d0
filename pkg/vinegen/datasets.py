"""Toy generators, the 3-D cone example, and IDX / 8x8-digit image loaders.

Every generator is a pure function of ``(n, seed, params)``; mixture
generators label each point with the index of its mode.
"""

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import numpy as np

from vinegen.errors import DomainError, FormatError

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
_IDX_IMAGE_HEADER = 16
_IDX_LABEL_HEADER = 8


@dataclass(eq=False)
class Dataset:
    x: np.ndarray
    labels: Optional[np.ndarray] = None
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim != 2:
            raise DomainError(f"Dataset values must be 2-D, got shape {self.x.shape}")
        if not np.all(np.isfinite(self.x)):
            raise DomainError("Dataset contains non-finite values")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (self.x.shape[0],):
                raise DomainError(f"{self.labels.size} labels for {self.x.shape[0]} rows")
            if self.labels.size and self.labels.min() < 0:
                raise DomainError("Labels must be nonnegative")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def image_shape(self) -> Optional[tuple[int, int]]:
        shape = self.provenance.get("image_shape")
        return (int(shape[0]), int(shape[1])) if shape else None


def _mixture(
    name: str,
    centers: np.ndarray,
    n: int,
    seed: Optional[int],
    sd: float,
    params: Dict[str, Any],
) -> Dataset:
    if n < centers.shape[0]:
        raise DomainError(f"{name} needs n >= {centers.shape[0]}, got {n}")
    rng = np.random.default_rng(seed)
    modes = rng.integers(0, centers.shape[0], size=n)
    x = centers[modes] + rng.normal(0.0, sd, size=(n, centers.shape[1]))
    return Dataset(
        x=x,
        labels=modes,
        provenance={"generator": name, "n": n, "seed": seed, "sd": sd, **params},
    )


def gen_ring8(n: int, seed: Optional[int] = None, radius: float = 2.0, sd: float = 0.02) -> Dataset:
    angles = 2.0 * np.pi * np.arange(8) / 8
    centers = radius * np.column_stack((np.cos(angles), np.sin(angles)))
    return _mixture("ring8", centers, n, seed, sd, {"radius": radius})


def gen_grid25(n: int, seed: Optional[int] = None, scale: float = 1.0, sd: float = 0.05) -> Dataset:
    ticks = np.arange(-2, 3, dtype=float) * scale
    centers = np.array([(a, b) for a in ticks for b in ticks])
    return _mixture("grid25", centers, n, seed, sd, {"scale": scale})


def gen_swiss_roll(
    n: int, seed: Optional[int] = None, scale: float = 0.1, sd: float = 0.01
) -> Dataset:
    if n < 1:
        raise DomainError(f"swissroll needs n >= 1, got {n}")
    rng = np.random.default_rng(seed)
    t = rng.uniform(1.5 * np.pi, 4.5 * np.pi, size=n)
    x = scale * np.column_stack((t * np.cos(t), t * np.sin(t)))
    x = x + rng.normal(0.0, sd, size=x.shape)
    return Dataset(
        x=x,
        provenance={"generator": "swissroll", "n": n, "seed": seed, "scale": scale, "sd": sd},
    )


def gen_cone3d(n: int, seed: Optional[int] = None, half_width: float = 5.0, jitter: float = 0.1) -> Dataset:
    """x1, x2 uniform on [-5, 5]; x3 = sqrt(x1^2 + x2^2) + uniform jitter."""
    if n < 1:
        raise DomainError(f"cone3d needs n >= 1, got {n}")
    rng = np.random.default_rng(seed)
    base = rng.uniform(-half_width, half_width, size=(n, 2))
    height = np.hypot(base[:, 0], base[:, 1]) + rng.uniform(-jitter, jitter, size=n)
    return Dataset(
        x=np.column_stack((base, height)),
        provenance={
            "generator": "cone3d",
            "n": n,
            "seed": seed,
            "half_width": half_width,
            "jitter": jitter,
        },
    )


def cone_distance(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.abs(x[:, 2] - np.hypot(x[:, 0], x[:, 1]))


GENERATORS: Dict[str, Callable[..., Dataset]] = {
    "ring8": gen_ring8,
    "grid25": gen_grid25,
    "swissroll": gen_swiss_roll,
    "cone3d": gen_cone3d,
}


def generate(name: str, n: int, seed: Optional[int] = None) -> Dataset:
    try:
        generator = GENERATORS[name]
    except KeyError:
        raise DomainError(
            f"Unknown dataset {name!r}; choose one of {sorted(GENERATORS)}"
        ) from None
    dataset = generator(n, seed)
    logging.info("Generated %s: n=%s d=%s seed=%s", name, dataset.n, dataset.d, seed)
    return dataset


def _read_header(payload: bytes, count: int, source: Path) -> tuple[int, ...]:
    needed = 4 * count
    if len(payload) < needed:
        raise FormatError(f"{source}: truncated IDX header", offset=len(payload))
    return struct.unpack(f">{count}I", payload[:needed])


def _read_labels(path: Path) -> np.ndarray:
    payload = path.read_bytes()
    magic, count = _read_header(payload, 2, path)
    if magic != IDX_LABEL_MAGIC:
        raise FormatError(
            f"{path}: bad IDX label magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}",
            offset=0,
        )
    body = payload[_IDX_LABEL_HEADER:]
    if len(body) != count:
        raise FormatError(
            f"{path}: header declares {count} labels, file holds {len(body)}",
            offset=_IDX_LABEL_HEADER + min(len(body), count),
        )
    return np.frombuffer(body, dtype=np.uint8).astype(int)


def load_idx(images_path: Path | str, labels_path: Optional[Path | str] = None) -> Dataset:
    """Read big-endian IDX images (and labels); pixels are scaled to [0, 1]."""
    path = Path(images_path)
    payload = path.read_bytes()
    magic, count, rows, cols = _read_header(payload, 4, path)
    if magic != IDX_IMAGE_MAGIC:
        raise FormatError(
            f"{path}: bad IDX image magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}",
            offset=0,
        )
    expected = count * rows * cols
    body = payload[_IDX_IMAGE_HEADER:]
    if len(body) != expected:
        raise FormatError(
            f"{path}: header declares {count}x{rows}x{cols} pixels, file holds {len(body)}",
            offset=_IDX_IMAGE_HEADER + min(len(body), expected),
        )
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(count, rows * cols)
    labels = None
    if labels_path is not None:
        labels = _read_labels(Path(labels_path))
        if labels.size != count:
            raise FormatError(
                f"{labels_path}: {labels.size} labels for {count} images",
                offset=_IDX_LABEL_HEADER,
            )
    logging.info("Loaded %s IDX images of %sx%s from %s", count, rows, cols, path)
    return Dataset(
        x=pixels / 255.0,
        labels=labels,
        provenance={"source": str(path), "image_shape": [rows, cols]},
    )


def _to_bytes(images: np.ndarray) -> np.ndarray:
    images = np.asarray(images)
    if images.dtype == np.uint8:
        return images
    return np.clip(np.rint(np.asarray(images, dtype=float) * 255.0), 0, 255).astype(np.uint8)


def write_idx(path: Path | str, images: np.ndarray) -> Path:
    pixels = _to_bytes(images)
    if pixels.ndim != 3:
        raise DomainError(f"IDX images must be (n, rows, cols), got shape {pixels.shape}")
    count, rows, cols = pixels.shape
    path = Path(path)
    path.write_bytes(
        struct.pack(">4I", IDX_IMAGE_MAGIC, count, rows, cols) + pixels.tobytes()
    )
    return path


def write_idx_labels(path: Path | str, labels: np.ndarray) -> Path:
    labels = np.asarray(labels)
    if labels.ndim != 1 or (labels.size and (labels.min() < 0 or labels.max() > 255)):
        raise DomainError("IDX labels must be a 1-D array of values in [0, 255]")
    path = Path(path)
    path.write_bytes(
        struct.pack(">2I", IDX_LABEL_MAGIC, labels.size) + labels.astype(np.uint8).tobytes()
    )
    return path


def _square_side(p: int) -> int:
    side = int(round(math.sqrt(p)))
    if side * side != p:
        raise DomainError(f"{p} columns do not form a square image")
    return side


def downsample(ds: Dataset, factor: int) -> Dataset:
    """Center-crop to a multiple of ``factor`` then average factor x factor blocks."""
    if factor < 1:
        raise DomainError(f"Downsampling factor must be >= 1, got {factor}")
    rows, cols = ds.image_shape or (_square_side(ds.d),) * 2
    if factor > min(rows, cols):
        raise DomainError(f"Factor {factor} exceeds image size {rows}x{cols}")
    out_rows, out_cols = rows // factor, cols // factor
    top = (rows - out_rows * factor) // 2
    left = (cols - out_cols * factor) // 2
    images = ds.x.reshape(ds.n, rows, cols)
    cropped = images[:, top : top + out_rows * factor, left : left + out_cols * factor]
    blocks = cropped.reshape(ds.n, out_rows, factor, out_cols, factor).mean(axis=(2, 4))
    return Dataset(
        x=blocks.reshape(ds.n, out_rows * out_cols),
        labels=None if ds.labels is None else ds.labels.copy(),
        provenance={**ds.provenance, "image_shape": [out_rows, out_cols], "downsample": factor},
    )


PIXEL_SHIFTS = ((0, 1), (0, -1), (1, 0), (-1, 0))


def augment_with_shifts(ds: Dataset, min_images: int, seed: int = 0) -> Dataset:
    """Append copies of random images moved by one pixel until there are ``min_images``.

    Vacated pixels are zero. The originals keep their rows and order.
    """
    extra = min_images - ds.n
    if extra <= 0:
        return ds
    if ds.n == 0:
        raise DomainError("Cannot augment an empty dataset")
    rows, cols = ds.image_shape or (_square_side(ds.d),) * 2
    rng = np.random.default_rng(seed)
    picks = rng.choice(ds.n, size=extra, replace=extra > ds.n)
    moves = rng.integers(0, len(PIXEL_SHIFTS), size=extra)
    padded = np.pad(ds.x[picks].reshape(extra, rows, cols), ((0, 0), (1, 1), (1, 1)))
    shifted = np.empty((extra, rows, cols))
    for k, (dy, dx) in enumerate(PIXEL_SHIFTS):
        chosen = moves == k
        shifted[chosen] = padded[chosen, 1 - dy : 1 - dy + rows, 1 - dx : 1 - dx + cols]
    logging.info("Augmented %s images with %s shifted copies", ds.n, extra)
    return Dataset(
        x=np.vstack((ds.x, shifted.reshape(extra, rows * cols))),
        labels=None if ds.labels is None else np.concatenate((ds.labels, ds.labels[picks])),
        provenance={**ds.provenance, "image_shape": [rows, cols], "shifted_copies": extra},
    )


def load_digits8() -> Dataset:
    """scikit-learn's bundled 8x8 digits (1797 images), scaled to [0, 1]."""
    from sklearn.datasets import load_digits

    bunch = load_digits()
    return Dataset(
        x=np.asarray(bunch.data, dtype=float) / 16.0,
        labels=np.asarray(bunch.target, dtype=int),
        provenance={"source": "sklearn.datasets.load_digits", "image_shape": [8, 8]},
    )
