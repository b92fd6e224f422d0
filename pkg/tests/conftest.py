import numpy as np
import pytest
from scipy.special import ndtr

from vinegen.bicop import BicopFamily, BivariateCopula


def gaussian_copula_sample(corr: np.ndarray, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    z = rng.multivariate_normal(np.zeros(len(corr)), corr, size=n)
    return ndtr(z)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def gaussian_pair() -> np.ndarray:
    """n=2000 draws from a Gaussian copula with rho=0.5."""
    return gaussian_copula_sample(np.array([[1.0, 0.5], [0.5, 1.0]]), 2000, seed=3)


@pytest.fixture
def trivariate_corr() -> np.ndarray:
    return np.array([[1.0, 0.6, 0.3], [0.6, 1.0, 0.5], [0.3, 0.5, 1.0]])


@pytest.fixture
def gaussian_05() -> BivariateCopula:
    return BivariateCopula(BicopFamily.GAUSSIAN, rho=0.5)
