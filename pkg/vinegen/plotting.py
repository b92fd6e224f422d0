import logging
import math
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from vinegen.errors import DomainError  # noqa: E402

# fixed ids and no timestamp so identical inputs give identical SVG bytes
plt.rcParams.update(
    {
        "svg.hashsalt": "vinegen",
        "svg.fonttype": "none",
        "figure.figsize": (4.0, 4.0),
        "font.size": 9,
        "axes.spines.top": False,
        "axes.spines.right": False,
    }
)
_SVG_METADATA = {"Date": None, "Creator": None}


def tile_images(images: np.ndarray, side: int, columns: Optional[int] = None, pad: int = 1) -> np.ndarray:
    images = np.asarray(images, dtype=float)
    if images.ndim != 2 or images.shape[1] != side * side:
        raise DomainError(
            f"Expected rows of {side * side} pixels for side {side}, got shape {images.shape}"
        )
    count = images.shape[0]
    if count == 0:
        return np.zeros((side, side))
    columns = columns or int(math.ceil(math.sqrt(count)))
    rows = int(math.ceil(count / columns))
    cell = side + pad
    canvas = np.zeros((rows * cell - pad, columns * cell - pad))
    for idx, image in enumerate(images):
        r, c = divmod(idx, columns)
        canvas[r * cell : r * cell + side, c * cell : c * cell + side] = image.reshape(side, side)
    return canvas


def scatter_svg(
    destination: Path | str,
    x: np.ndarray,
    cols: Sequence[int] = (0, 1),
    labels: Optional[np.ndarray] = None,
    names: Optional[Sequence[str]] = None,
    title: Optional[str] = None,
) -> Path:
    x = np.asarray(x, dtype=float)
    i, j = cols
    if x.ndim != 2 or not (0 <= i < x.shape[1] and 0 <= j < x.shape[1]):
        raise DomainError(f"Columns {i},{j} out of range for data of shape {x.shape}")
    fig, ax = plt.subplots()
    ax.scatter(
        x[:, i],
        x[:, j],
        s=2,
        c=labels if labels is not None else "tab:blue",
        cmap="tab10" if labels is not None else None,
        alpha=0.6,
        linewidths=0,
    )
    ax.set_xlabel(names[i] if names else f"x{i}")
    ax.set_ylabel(names[j] if names else f"x{j}")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    path = Path(destination)
    fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)
    logging.info("Wrote scatter of %s points to %s", x.shape[0], path)
    return path


def image_grid_svg(
    destination: Path | str,
    images: np.ndarray,
    side: int,
    columns: Optional[int] = None,
) -> Path:
    canvas = tile_images(images, side, columns)
    height, width = canvas.shape
    fig, ax = plt.subplots(figsize=(max(1.0, width / 16), max(1.0, height / 16)))
    ax.imshow(canvas, cmap="gray", vmin=0.0, vmax=1.0, interpolation="nearest")
    ax.set_axis_off()
    fig.subplots_adjust(0, 0, 1, 1)
    path = Path(destination)
    fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)
    logging.info("Wrote grid of %s images to %s", len(images), path)
    return path


def write_pgm(destination: Path | str, images: np.ndarray, side: int, columns: Optional[int] = None) -> Path:
    """Binary (P5) grayscale preview of flattened images with values in [0, 1]."""
    canvas = tile_images(images, side, columns)
    pixels = np.clip(np.rint(canvas * 255.0), 0, 255).astype(np.uint8)
    height, width = pixels.shape
    path = Path(destination)
    path.write_bytes(f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes())
    logging.debug("Wrote %sx%s PGM preview to %s", width, height, path)
    return path
