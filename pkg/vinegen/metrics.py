import logging
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist
from sklearn.neighbors import KNeighborsClassifier

from vinegen.errors import DomainError, InsufficientDataError

LogDensity = Callable[[np.ndarray], np.ndarray]

C2ST_MIN_SAMPLES = 20
C2ST_NEIGHBOURS = 16
MEDIAN_SUBSAMPLE = 2000
_KERNEL_BLOCK = 2048


@dataclass
class EvalReport:
    mmd: Optional[float] = None
    bandwidth: Optional[float] = None
    coverage: Optional[float] = None
    alpha: Optional[float] = None
    mean_loglik: Optional[float] = None
    c2st_accuracy: Optional[float] = None
    n_a: Optional[int] = None
    n_b: Optional[int] = None
    seed: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {key: value for key, value in asdict(self).items() if value is not None}


def _as_samples(x: np.ndarray, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2:
        raise DomainError(f"{name} must be an (n, d) array, got shape {x.shape}")
    return x


def median_bandwidth(pooled: np.ndarray) -> float:
    if pooled.shape[0] > MEDIAN_SUBSAMPLE:
        rows = np.random.default_rng(0).choice(pooled.shape[0], MEDIAN_SUBSAMPLE, replace=False)
        pooled = pooled[np.sort(rows)]
    distances = pdist(pooled)
    positive = distances[distances > 0]
    return float(np.median(positive)) if positive.size else 1.0


def _kernel_mean(a: np.ndarray, b: np.ndarray, bandwidth: float) -> float:
    total = 0.0
    for start in range(0, a.shape[0], _KERNEL_BLOCK):
        block = cdist(a[start : start + _KERNEL_BLOCK], b, "sqeuclidean")
        total += float(np.exp(-0.5 * block / bandwidth**2).sum())
    return total / (a.shape[0] * b.shape[0])


def mmd(x: np.ndarray, y: np.ndarray, bandwidth: Optional[float] = None) -> float:
    """Square root of the biased (V-statistic) squared MMD, Gaussian kernel."""
    x, y = _as_samples(x, "x"), _as_samples(y, "y")
    if x.shape[1] != y.shape[1]:
        raise DomainError(f"Dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if x.shape[0] < 2 or y.shape[0] < 2:
        raise DomainError("MMD needs at least 2 points in each sample")
    # canonical argument order makes mmd(x, y) and mmd(y, x) bit-identical
    if (y.shape, y.tobytes()) < (x.shape, x.tobytes()):
        x, y = y, x
    if bandwidth is None:
        bandwidth = median_bandwidth(np.vstack((x, y)))
    if not bandwidth > 0:
        raise DomainError(f"Bandwidth must be positive, got {bandwidth}")
    kxx = _kernel_mean(x, x, bandwidth)
    kyy = _kernel_mean(y, y, bandwidth)
    kxy = _kernel_mean(x, y, bandwidth)
    squared = kxx + kyy - 2.0 * kxy
    return float(np.sqrt(max(squared, 0.0)))


def coverage(
    model_logpdf: LogDensity,
    data: np.ndarray,
    model_sample: np.ndarray,
    alpha: float = 0.95,
) -> float:
    """Fraction of ``data`` inside the model's alpha highest-density region.

    The threshold is the log-density exceeded by a fraction ``alpha`` of the
    model's own sample.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    sample_density = np.asarray(model_logpdf(_as_samples(model_sample, "model_sample")))
    threshold = float(np.quantile(sample_density, 1.0 - alpha))
    data_density = np.asarray(model_logpdf(_as_samples(data, "data")))
    return float(np.mean(data_density > threshold))


def mean_loglik(model_logpdf: LogDensity, data: np.ndarray) -> float:
    return float(np.mean(model_logpdf(_as_samples(data, "data"))))


def c2st(x: np.ndarray, y: np.ndarray, seed: Optional[int] = 0) -> float:
    """Held-out accuracy of a 1-nearest-neighbour classifier telling x from y.

    Training points identical to a test point are not its neighbour.
    """
    x, y = _as_samples(x, "x"), _as_samples(y, "y")
    if x.shape[1] != y.shape[1]:
        raise DomainError(f"Dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    n = min(x.shape[0], y.shape[0])
    if n < C2ST_MIN_SAMPLES:
        raise InsufficientDataError(
            f"C2ST needs at least {C2ST_MIN_SAMPLES} points per sample, got {n}"
        )
    rng = np.random.default_rng(seed)
    x = x[rng.permutation(x.shape[0])[:n]]
    y = y[rng.permutation(y.shape[0])[:n]]
    half = n // 2
    train_x = np.vstack((x[:half], y[:half]))
    train_y = np.concatenate((np.zeros(half, dtype=int), np.ones(half, dtype=int)))
    test_x = np.vstack((x[half:], y[half:]))
    test_y = np.concatenate(
        (np.zeros(n - half, dtype=int), np.ones(n - half, dtype=int))
    )
    classifier = KNeighborsClassifier(n_neighbors=1)
    classifier.fit(train_x, train_y)
    distances, indices = classifier.kneighbors(
        test_x, n_neighbors=min(C2ST_NEIGHBOURS, train_x.shape[0])
    )
    distinct = distances > 0.0
    rows = np.arange(test_x.shape[0])
    predicted = train_y[indices[rows, np.argmax(distinct, axis=1)]]
    # every neighbour is a copy of the test point: majority label of the copies
    tied = ~distinct.any(axis=1)
    if tied.any():
        predicted[tied] = (train_y[indices[tied]].mean(axis=1) > 0.5).astype(int)
    accuracy = float(np.mean(predicted == test_y))
    logging.debug("C2ST n=%s accuracy=%.4f", n, accuracy)
    return accuracy
