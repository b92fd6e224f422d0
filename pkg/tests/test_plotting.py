import numpy as np
import pytest

from vinegen.errors import DomainError
from vinegen.plotting import image_grid_svg, scatter_svg, tile_images, write_pgm


def test_tiling_layout():
    images = np.ones((5, 4))
    canvas = tile_images(images, side=2)
    # 3 columns and 2 rows of 2x2 cells with one pixel of padding
    assert canvas.shape == (5, 8)
    assert canvas[0, 2] == 0.0
    assert canvas[3, 0] == 1.0
    assert tile_images(np.empty((0, 4)), side=2).shape == (2, 2)
    with pytest.raises(DomainError):
        tile_images(np.ones((2, 5)), side=2)


def test_pgm_preview(tmp_path):
    images = np.linspace(0, 1, 8).reshape(2, 4)
    path = write_pgm(tmp_path / "p.pgm", images, side=2, columns=2)
    payload = path.read_bytes()
    header = b"P5\n5 2\n255\n"
    assert payload.startswith(header)
    assert len(payload) == len(header) + 10
    assert payload[len(header)] == 0 and payload[-1] == 255


def test_scatter_is_byte_reproducible(tmp_path):
    x = np.random.default_rng(91).normal(size=(200, 3))
    labels = np.arange(200) % 4
    a = scatter_svg(tmp_path / "a.svg", x, cols=(0, 2), labels=labels, title="sample")
    b = scatter_svg(tmp_path / "b.svg", x, cols=(0, 2), labels=labels, title="sample")
    assert a.read_bytes() == b.read_bytes()
    assert b"<svg" in a.read_bytes()
    with pytest.raises(DomainError):
        scatter_svg(tmp_path / "c.svg", x, cols=(0, 3))


def test_image_grid(tmp_path):
    images = np.random.default_rng(92).uniform(size=(6, 16))
    a = image_grid_svg(tmp_path / "a.svg", images, side=4)
    b = image_grid_svg(tmp_path / "b.svg", images, side=4)
    assert a.read_bytes() == b.read_bytes()
