import numpy as np
import pytest
from scipy.stats import multivariate_normal

from vinegen.errors import DomainError
from vinegen.joint import JointModel, fit_joint, fit_marginals

COV = np.array([[1.0, 0.6], [0.6, 1.0]])


@pytest.fixture(scope="module")
def normal_data():
    rng = np.random.default_rng(31)
    return rng.multivariate_normal([0.0, 0.0], COV, size=2000)


@pytest.fixture(scope="module")
def joint(normal_data):
    return fit_joint(normal_data, "gaussian")


def test_log_density_is_close_to_the_truth(joint):
    fresh = np.random.default_rng(32).multivariate_normal([0.0, 0.0], COV, size=2000)
    truth = multivariate_normal([0.0, 0.0], COV).logpdf(fresh)
    assert abs(np.mean(joint.log_density(fresh)) - np.mean(truth)) < 0.1


def test_samples_follow_the_data(joint):
    x = joint.sample(3000, seed=33)
    assert x.shape == (3000, 2)
    assert np.allclose(x.mean(axis=0), 0.0, atol=0.1)
    assert np.corrcoef(x, rowvar=False)[0, 1] == pytest.approx(0.6, abs=0.06)
    assert np.array_equal(joint.sample(10, seed=1), joint.sample(10, seed=1))


def test_empty_inputs(joint):
    assert joint.log_density(np.empty((0, 2))).shape == (0,)
    assert joint.sample(0, seed=0).shape == (0, 2)


def test_shape_checks(joint, normal_data):
    with pytest.raises(DomainError):
        joint.log_density(np.zeros((3, 3)))
    with pytest.raises(DomainError):
        fit_joint(normal_data[:, :1])
    with pytest.raises(DomainError):
        JointModel(marginals=fit_marginals(normal_data[:, :1]), vine=joint.vine)


def test_precomputed_marginals_are_used(normal_data, joint):
    refit = fit_joint(normal_data, "gaussian", marginals=joint.marginals)
    assert refit.marginals == joint.marginals
    assert refit.vine.copulas[0][0].rho == joint.vine.copulas[0][0].rho


def test_dict_round_trip(joint, normal_data):
    restored = JointModel.from_dict(joint.to_dict())
    points = normal_data[:50]
    assert np.array_equal(restored.log_density(points), joint.log_density(points))
