"""Bivariate copulas: independence, Gaussian and the transformation kernel.

Every copula exposes its density, the two h-functions and their inverses.
``hfunc(a, b, which)`` is the conditional distribution function of the
conditioned value ``a`` given the conditioning value ``b``: with
``which=2`` the copula's second variable is conditioned on (``a`` is a
value of U1), with ``which=1`` the first one is (``a`` is a value of U2).
Both are nondecreasing in ``a``, and ``hinv`` inverts them in ``a``.

The transformation-kernel estimator is stored as a density grid over
[0, 1]^2 whose nodes are normal quantiles of equally spaced scores. The
density between nodes is bilinear; outside the outermost nodes it is
held constant, so the grid is treated as padded with knots at 0 and 1.
Fitted grids are rescaled until both margins integrate to one.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import ndtr, ndtri

from vinegen.concordance import kendall_tau
from vinegen.errors import BundleFormatError, DomainError, InsufficientDataError
from vinegen.marginals import PIT_EPS

GRID_SIZE = 30
GRID_ZMAX = 3.25
RHO_LIMIT = 0.99
MIN_PAIR_OBS = 30
PDF_FLOOR = 1e-20
BISECTION_XTOL = 1e-12
BISECTION_MAX_ITER = 200
MARGIN_SWEEPS = 100
MARGIN_TOL = 1e-10
_KERNEL_BLOCK = 1024


class BicopFamily(str, Enum):
    INDEPENDENCE = "indep"
    GAUSSIAN = "gaussian"
    TLL = "tll"

    @classmethod
    def parse(cls, value: "BicopFamily | str") -> "BicopFamily":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {
            "indep": cls.INDEPENDENCE,
            "independence": cls.INDEPENDENCE,
            "gaussian": cls.GAUSSIAN,
            "tll": cls.TLL,
            "nonparametric": cls.TLL,
            "transformation_kernel": cls.TLL,
        }
        if key not in aliases:
            raise DomainError(
                f"Unknown copula family '{value}'; expected one of {sorted(aliases)}"
            )
        return aliases[key]


def _check_unit(**arrays: np.ndarray) -> None:
    for name, values in arrays.items():
        if not np.all((values > 0.0) & (values < 1.0)):
            raise DomainError(f"'{name}' must lie strictly inside (0, 1)")


def _check_which(which: int) -> None:
    if which not in (1, 2):
        raise DomainError(f"'which' must be 1 or 2, got {which}")


def _locate(knots: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    idx = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, knots.size - 2)
    weight = (x - knots[idx]) / (knots[idx + 1] - knots[idx])
    return idx, np.clip(weight, 0.0, 1.0)


def normal_score_nodes(m: int = GRID_SIZE, zmax: float = GRID_ZMAX) -> np.ndarray:
    """Nodes u_k = Phi(z_k), z_k equally spaced on [-zmax, zmax], exactly symmetric."""
    z = np.linspace(-zmax, zmax, m)
    nodes = ndtr(z)
    half = m // 2
    nodes[m - half :] = 1.0 - nodes[:half][::-1]
    if m % 2:
        nodes[half] = 0.5
    return nodes


class _SliceCdf:
    """Conditional CDF along the first axis of a padded density at fixed second-axis values."""

    def __init__(self, knots: np.ndarray, padded: np.ndarray, b: np.ndarray) -> None:
        ib, wb = _locate(knots, b)
        self.knots = knots
        self.steps = np.diff(knots)
        self.slice = (1.0 - wb)[:, None] * padded[:, ib].T + wb[:, None] * padded[:, ib + 1].T
        areas = 0.5 * (self.slice[:, 1:] + self.slice[:, :-1]) * self.steps
        self.cumulative = np.concatenate(
            (np.zeros((b.size, 1)), np.cumsum(areas, axis=1)), axis=1
        )
        self.total = self.cumulative[:, -1]

    def __call__(self, a: np.ndarray) -> np.ndarray:
        ia, _ = _locate(self.knots, a)
        rows = np.arange(a.size)
        offset = a - self.knots[ia]
        f0 = self.slice[rows, ia]
        slope = (self.slice[rows, ia + 1] - f0) / self.steps[ia]
        mass = self.cumulative[rows, ia] + f0 * offset + 0.5 * slope * offset * offset
        return np.clip(mass / self.total, 0.0, 1.0)

    def invert(self, p: np.ndarray) -> np.ndarray:
        lo = np.zeros_like(p)
        hi = np.ones_like(p)
        for _ in range(BISECTION_MAX_ITER):
            mid = 0.5 * (lo + hi)
            below = self(mid) < p
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.max(hi - lo) < BISECTION_XTOL:
                break
        return 0.5 * (lo + hi)


@dataclass(frozen=True, eq=False)
class DensityGrid:
    nodes: np.ndarray
    values: np.ndarray

    @property
    def m(self) -> int:
        return int(self.nodes.size)

    @cached_property
    def knots(self) -> np.ndarray:
        return np.concatenate(([0.0], self.nodes, [1.0]))

    @cached_property
    def padded(self) -> np.ndarray:
        return np.pad(self.values, 1, mode="edge")

    def density(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        iu, wu = _locate(self.knots, u)
        iv, wv = _locate(self.knots, v)
        grid = self.padded
        return (
            (1.0 - wu) * (1.0 - wv) * grid[iu, iv]
            + wu * (1.0 - wv) * grid[iu + 1, iv]
            + (1.0 - wu) * wv * grid[iu, iv + 1]
            + wu * wv * grid[iu + 1, iv + 1]
        )

    def integral(self) -> float:
        return float(trapezoid(trapezoid(self.padded, self.knots, axis=1), self.knots))

    def conditional(self, b: np.ndarray, which: int) -> _SliceCdf:
        padded = self.padded if which == 2 else self.padded.T
        return _SliceCdf(self.knots, padded, b)


def _transformation_kernel_values(
    u: np.ndarray, v: np.ndarray, nodes: np.ndarray, bandwidth_mult: float = 1.0
) -> np.ndarray:
    n = u.size
    scores = np.column_stack((ndtri(u), ndtri(v)))
    r = float(np.corrcoef(scores[:, 0], scores[:, 1])[0, 1])
    if not np.isfinite(r):
        r = 0.0
    r = float(np.clip(r, -RHO_LIMIT, RHO_LIMIT))
    cov = bandwidth_mult**2 * n ** (-1.0 / 3.0) * np.array([[1.0, r], [r, 1.0]])
    precision = np.linalg.inv(cov)
    norm_const = 1.0 / (2.0 * math.pi * math.sqrt(np.linalg.det(cov)))

    z_nodes = ndtri(nodes)
    gx, gy = np.meshgrid(z_nodes, z_nodes, indexing="ij")
    points = np.column_stack((gx.ravel(), gy.ravel()))
    acc = np.zeros(points.shape[0])
    for start in range(0, n, _KERNEL_BLOCK):
        block = scores[start : start + _KERNEL_BLOCK]
        dx = points[:, 0:1] - block[None, :, 0]
        dy = points[:, 1:2] - block[None, :, 1]
        quad = precision[0, 0] * dx * dx + 2.0 * precision[0, 1] * dx * dy + precision[1, 1] * dy * dy
        acc += np.exp(-0.5 * quad).sum(axis=1)
    phi = np.exp(-0.5 * z_nodes**2) / math.sqrt(2.0 * math.pi)
    values = (acc * norm_const / n).reshape(nodes.size, nodes.size)
    return values / np.outer(phi, phi)


def _normalize_margins(nodes: np.ndarray, values: np.ndarray) -> np.ndarray:
    # margins are piecewise linear between nodes: uniform once every padded row
    # and column integrates to 1. Joint row/column scaling preserves symmetry.
    knots = np.concatenate(([0.0], nodes, [1.0]))
    for _ in range(MARGIN_SWEEPS):
        padded = np.pad(values, 1, mode="edge")
        rows = trapezoid(padded, knots, axis=1)[1:-1]
        cols = trapezoid(padded, knots, axis=0)[1:-1]
        if max(np.max(np.abs(rows - 1.0)), np.max(np.abs(cols - 1.0))) < MARGIN_TOL:
            break
        values = values / np.sqrt(np.outer(rows, cols))
    return values


@dataclass(frozen=True, eq=False)
class BivariateCopula:
    family: BicopFamily
    rho: Optional[float] = None
    grid: Optional[DensityGrid] = None

    def __post_init__(self) -> None:
        if self.family is BicopFamily.GAUSSIAN:
            if self.rho is None or not abs(self.rho) < 1.0:
                raise DomainError(f"Gaussian copula needs |rho| < 1, got {self.rho}")
        if self.family is BicopFamily.TLL:
            if self.grid is None or np.any(self.grid.values < 0):
                raise DomainError("Transformation-kernel copula needs a nonnegative grid")

    def __repr__(self) -> str:
        if self.family is BicopFamily.GAUSSIAN:
            return f"BivariateCopula(gaussian, rho={self.rho:.4f})"
        if self.family is BicopFamily.TLL:
            return f"BivariateCopula(tll, m={self.grid.m})"
        return "BivariateCopula(indep)"

    @property
    def is_independence(self) -> bool:
        return self.family is BicopFamily.INDEPENDENCE

    def pdf(self, u: np.ndarray | float, v: np.ndarray | float) -> np.ndarray:
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        _check_unit(u=u, v=v)
        if self.family is BicopFamily.INDEPENDENCE:
            return np.ones(u.shape)
        if self.family is BicopFamily.GAUSSIAN:
            rho = self.rho
            z1, z2 = ndtri(u), ndtri(v)
            det = 1.0 - rho * rho
            expo = -(rho * rho * (z1 * z1 + z2 * z2) - 2.0 * rho * z1 * z2) / (2.0 * det)
            return np.exp(expo) / math.sqrt(det)
        return self.grid.density(u, v)

    def hfunc(self, a: np.ndarray | float, b: np.ndarray | float, which: int = 2) -> np.ndarray:
        _check_which(which)
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        _check_unit(a=a, b=b)
        if self.family is BicopFamily.INDEPENDENCE:
            return a.astype(float, copy=True)
        if self.family is BicopFamily.GAUSSIAN:
            scale = math.sqrt(1.0 - self.rho * self.rho)
            return ndtr((ndtri(a) - self.rho * ndtri(b)) / scale)
        shape = a.shape
        cdf = self.grid.conditional(b.ravel(), which)
        return cdf(a.ravel()).reshape(shape)

    def hinv(self, p: np.ndarray | float, b: np.ndarray | float, which: int = 2) -> np.ndarray:
        _check_which(which)
        p, b = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(b, dtype=float))
        _check_unit(p=p, b=b)
        if self.family is BicopFamily.INDEPENDENCE:
            return p.astype(float, copy=True)
        if self.family is BicopFamily.GAUSSIAN:
            scale = math.sqrt(1.0 - self.rho * self.rho)
            return ndtr(ndtri(p) * scale + self.rho * ndtri(b))
        if p.size == 0:
            return np.empty(p.shape)
        shape = p.shape
        cdf = self.grid.conditional(b.ravel(), which)
        out = cdf.invert(p.ravel()).reshape(shape)
        return np.clip(out, PIT_EPS, 1.0 - PIT_EPS)

    def loglik(self, u: np.ndarray) -> float:
        u = np.asarray(u, dtype=float)
        if self.family is BicopFamily.INDEPENDENCE:
            _check_unit(u=u)
            return 0.0
        return float(np.sum(np.log(np.maximum(self.pdf(u[:, 0], u[:, 1]), PDF_FLOOR))))

    def simulate(self, n: int, seed: Optional[int] = None) -> np.ndarray:
        rng = np.random.default_rng(seed)
        w = np.clip(rng.random((n, 2)), PIT_EPS, 1.0 - PIT_EPS)
        u2 = w[:, 1]
        u1 = self.hinv(w[:, 0], u2, which=2)
        return np.column_stack((u1, u2))

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {"family": self.family.value}
        if self.family is BicopFamily.GAUSSIAN:
            payload["rho"] = self.rho
        elif self.family is BicopFamily.TLL:
            payload["grid"] = {
                "nodes": self.grid.nodes.tolist(),
                "values": self.grid.values.ravel().tolist(),
            }
        return payload

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "BivariateCopula":
        try:
            family = BicopFamily.parse(payload["family"])
            if family is BicopFamily.GAUSSIAN:
                return cls(family, rho=float(payload["rho"]))
            if family is BicopFamily.TLL:
                nodes = np.asarray(payload["grid"]["nodes"], dtype=float)
                values = np.asarray(payload["grid"]["values"], dtype=float)
                return cls(family, grid=DensityGrid(nodes, values.reshape(nodes.size, nodes.size)))
            return cls(family)
        except (KeyError, TypeError, ValueError) as exc:
            raise BundleFormatError(f"Invalid pair-copula payload: {exc}") from exc


INDEPENDENCE = BivariateCopula(BicopFamily.INDEPENDENCE)


def fit_bicop(
    u: np.ndarray,
    family: BicopFamily | str,
    grid_size: int = GRID_SIZE,
    bandwidth_mult: float = 1.0,
) -> BivariateCopula:
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] != 2:
        raise DomainError(f"Pair-copula fit expects an (n, 2) array, got {u.shape}")
    _check_unit(u=u)
    if u.shape[0] < MIN_PAIR_OBS:
        raise InsufficientDataError(
            f"Pair-copula fit needs at least {MIN_PAIR_OBS} observations, got {u.shape[0]}"
        )
    family = BicopFamily.parse(family)
    if family is BicopFamily.INDEPENDENCE:
        return INDEPENDENCE
    if family is BicopFamily.GAUSSIAN:
        tau = kendall_tau(u[:, 0], u[:, 1])
        rho = math.sin(math.pi * tau / 2.0)
        if abs(rho) > RHO_LIMIT:
            logging.warning(
                "Gaussian pair fit: tau=%.4f gives rho=%.4f; clamping to %.2f",
                tau,
                rho,
                math.copysign(RHO_LIMIT, rho),
            )
            rho = math.copysign(RHO_LIMIT, rho)
        return BivariateCopula(family, rho=rho)

    nodes = normal_score_nodes(grid_size)
    if bandwidth_mult <= 0:
        raise DomainError(f"Bandwidth multiplier must be positive, got {bandwidth_mult}")
    values = _transformation_kernel_values(u[:, 0], u[:, 1], nodes, bandwidth_mult)
    raw = DensityGrid(nodes, values)
    grid = DensityGrid(nodes, _normalize_margins(nodes, values / raw.integral()))
    logging.debug("Fitted transformation-kernel pair on n=%s (m=%s)", u.shape[0], grid_size)
    return BivariateCopula(family, grid=grid)
