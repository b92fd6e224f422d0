import logging
import time
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence

import numpy as np

from vinegen.bicop import GRID_SIZE, BicopFamily
from vinegen.errors import BundleFormatError, DomainError
from vinegen.marginals import (
    DEFAULT_GRID_SIZE,
    KernelMarginal,
    fit_marginal,
    inverse_pit,
    pit,
)
from vinegen.vine import VineModel, fit_vine
from vinegen.workers import ordered_map


@dataclass(frozen=True, eq=False)
class JointModel:
    marginals: tuple[KernelMarginal, ...]
    vine: VineModel

    def __post_init__(self) -> None:
        if len(self.marginals) != self.vine.d:
            raise DomainError(
                f"{len(self.marginals)} marginals for a {self.vine.d}-dimensional vine"
            )

    @property
    def d(self) -> int:
        return self.vine.d

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.d:
            raise DomainError(f"Expected an (n, {self.d}) array, got shape {x.shape}")
        return x

    def pit(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        if x.shape[0] == 0:
            return np.empty((0, self.d))
        return np.column_stack([pit(m, x[:, i]) for i, m in enumerate(self.marginals)])

    def inverse_pit(self, u: np.ndarray) -> np.ndarray:
        u = self._check(u)
        if u.shape[0] == 0:
            return np.empty((0, self.d))
        return np.column_stack(
            [inverse_pit(m, u[:, i]) for i, m in enumerate(self.marginals)]
        )

    def sample(self, n: int, seed: Optional[int] = None) -> np.ndarray:
        return self.inverse_pit(self.vine.sample(n, seed))

    def log_density(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        if x.shape[0] == 0:
            return np.empty(0)
        total = np.asarray(self.vine.log_density(self.pit(x)), dtype=float)
        for i, m in enumerate(self.marginals):
            total = total + m.logpdf(x[:, i])
        return total

    def to_dict(self) -> Dict[str, Any]:
        return {
            "marginals": [m.to_dict() for m in self.marginals],
            "vine": self.vine.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "JointModel":
        try:
            marginals = tuple(KernelMarginal.from_dict(m) for m in payload["marginals"])
            vine = VineModel.from_dict(payload["vine"])
        except (KeyError, TypeError) as exc:
            raise BundleFormatError(f"Invalid joint-model payload: {exc}") from exc
        return cls(marginals=marginals, vine=vine)


def fit_marginals(
    x: np.ndarray, grid_size: int = DEFAULT_GRID_SIZE, threads: int = 1
) -> tuple[KernelMarginal, ...]:
    x = np.asarray(x, dtype=float)
    return tuple(
        ordered_map(lambda i: fit_marginal(x[:, i], grid_size=grid_size), range(x.shape[1]), threads)
    )


def fit_joint(
    x: np.ndarray,
    family: BicopFamily | str = BicopFamily.TLL,
    trunc_level: Optional[int] = None,
    kde_grid_size: int = DEFAULT_GRID_SIZE,
    bicop_grid_size: int = GRID_SIZE,
    bandwidth_mult: float = 1.0,
    threads: int = 1,
    marginals: Optional[Sequence[KernelMarginal]] = None,
) -> JointModel:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise DomainError(f"Joint fit needs an (n, d) array with d >= 2, got {x.shape}")
    started = time.perf_counter()
    if marginals is None:
        marginals = fit_marginals(x, kde_grid_size, threads)
    u = np.column_stack([pit(m, x[:, i]) for i, m in enumerate(marginals)])
    vine = fit_vine(
        u,
        family,
        trunc_level=trunc_level,
        grid_size=bicop_grid_size,
        bandwidth_mult=bandwidth_mult,
        threads=threads,
    )
    logging.info(
        "Fitted joint model n=%s d=%s in %.2fs",
        x.shape[0],
        x.shape[1],
        time.perf_counter() - started,
    )
    return JointModel(marginals=tuple(marginals), vine=vine)
