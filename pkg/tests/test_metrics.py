import numpy as np
import pytest
from scipy.stats import multivariate_normal

from vinegen.errors import DomainError, InsufficientDataError
from vinegen.metrics import EvalReport, c2st, coverage, mean_loglik, median_bandwidth, mmd

STANDARD = multivariate_normal(np.zeros(2), np.eye(2))


def normal_pair(seed, n=1000, shift=0.0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, 2)), rng.normal(size=(n, 2)) + shift


def test_mmd_of_identical_samples_is_zero():
    x, _ = normal_pair(61, n=300)
    assert mmd(x, x) == 0.0
    assert mmd(x, x.copy(), bandwidth=0.5) == 0.0


def test_mmd_is_symmetric_and_nonnegative():
    x, y = normal_pair(62, n=400, shift=0.3)
    assert mmd(x, y) == mmd(y, x)
    assert mmd(x, y) > 0


def test_mmd_under_the_null_is_small():
    x, y = normal_pair(63, n=2000)
    assert mmd(x, y) < 0.05


def test_mmd_grows_with_the_shift():
    x, near = normal_pair(64, shift=0.2)
    _, far = normal_pair(64, shift=1.0)
    assert mmd(x, near) < mmd(x, far)


def test_mmd_input_checks():
    x, y = normal_pair(65, n=10)
    with pytest.raises(DomainError):
        mmd(x, y[:, :1])
    with pytest.raises(DomainError):
        mmd(x[:1], y)
    with pytest.raises(DomainError):
        mmd(x, y, bandwidth=0.0)


def test_median_bandwidth():
    points = np.array([[0.0, 0.0], [3.0, 4.0], [6.0, 8.0]])
    assert median_bandwidth(points) == pytest.approx(5.0)
    assert median_bandwidth(np.zeros((4, 2))) == 1.0


def test_coverage_of_the_true_model():
    rng = np.random.default_rng(66)
    model_sample = rng.normal(size=(5000, 2))
    data = rng.normal(size=(5000, 2))
    assert 0.92 <= coverage(STANDARD.logpdf, data, model_sample, alpha=0.95) <= 0.98


def test_coverage_of_a_distant_model():
    rng = np.random.default_rng(67)
    data = rng.normal(size=(1000, 2)) + 50.0
    assert coverage(STANDARD.logpdf, data, rng.normal(size=(1000, 2))) < 0.02


def test_coverage_is_monotone_in_alpha():
    rng = np.random.default_rng(68)
    model_sample = rng.normal(size=(2000, 2))
    data = rng.normal(size=(2000, 2)) * 1.3
    values = [coverage(STANDARD.logpdf, data, model_sample, alpha=a) for a in (0.5, 0.8, 0.95)]
    assert values == sorted(values)
    with pytest.raises(DomainError):
        coverage(STANDARD.logpdf, data, model_sample, alpha=1.0)


def test_mean_loglik():
    u = np.random.default_rng(69).uniform(size=(500, 2))
    assert mean_loglik(lambda x: np.zeros(len(x)), u) == 0.0
    x = np.random.default_rng(70).normal(size=(4000, 2))
    # differential entropy of the standard bivariate normal
    assert mean_loglik(STANDARD.logpdf, x) == pytest.approx(-(1 + np.log(2 * np.pi)), abs=0.05)


def test_c2st_under_the_null():
    x, y = normal_pair(71)
    assert 0.45 <= c2st(x, y, seed=0) <= 0.55


def test_c2st_separable_samples():
    x, y = normal_pair(72, shift=20.0)
    assert c2st(x, y, seed=1) > 0.95


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_c2st_of_a_sample_and_its_copy_is_chance(seed):
    x, _ = normal_pair(74, n=2000)
    assert 0.45 <= c2st(x, x.copy(), seed=seed) <= 0.55


def test_c2st_of_repeated_points():
    x = np.repeat(normal_pair(75, n=40)[0], 5, axis=0)
    assert 0.35 <= c2st(x, x.copy(), seed=0) <= 0.65


def test_c2st_subsamples_the_larger_set_and_needs_enough_points():
    x, y = normal_pair(73)
    assert 0.4 <= c2st(x, y[:300], seed=2) <= 0.6
    with pytest.raises(InsufficientDataError):
        c2st(x[:19], y)


def test_report_keeps_only_computed_metrics():
    report = EvalReport(mmd=0.1, bandwidth=1.2, n_a=10, n_b=12, seed=0)
    assert report.to_dict() == {"mmd": 0.1, "bandwidth": 1.2, "n_a": 10, "n_b": 12, "seed": 0}
