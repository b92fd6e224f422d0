import math

import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.special import ndtr, ndtri
from scipy.stats import kstest

from vinegen.bicop import (
    INDEPENDENCE,
    BicopFamily,
    BivariateCopula,
    DensityGrid,
    fit_bicop,
    normal_score_nodes,
)
from vinegen.concordance import kendall_tau
from vinegen.errors import DomainError, InsufficientDataError

GRID20 = (np.arange(20) + 0.5) / 20


@pytest.fixture
def tll(gaussian_pair):
    return fit_bicop(gaussian_pair, "tll")


@pytest.fixture
def all_families(tll, gaussian_05):
    return [INDEPENDENCE, gaussian_05, tll]


def test_family_parsing():
    assert BicopFamily.parse("TLL") is BicopFamily.TLL
    assert BicopFamily.parse("independence") is BicopFamily.INDEPENDENCE
    with pytest.raises(DomainError, match="Unknown copula family"):
        BicopFamily.parse("clayton")


def test_independence_closed_forms():
    assert float(INDEPENDENCE.pdf(0.3, 0.8)) == 1.0
    u = np.linspace(0.05, 0.95, 7)
    assert np.array_equal(INDEPENDENCE.hfunc(u, 0.3, 2), u)
    assert np.array_equal(INDEPENDENCE.hinv(u, 0.7, 1), u)
    assert INDEPENDENCE.loglik(np.random.default_rng(0).uniform(size=(100, 2))) == 0.0


def test_gaussian_closed_forms(gaussian_05):
    zero = BivariateCopula(BicopFamily.GAUSSIAN, rho=0.0)
    assert np.allclose(zero.pdf(GRID20, GRID20[::-1]), 1.0)
    assert float(gaussian_05.pdf(0.5, 0.5)) == pytest.approx(1 / math.sqrt(0.75), abs=1e-12)
    assert float(gaussian_05.hfunc(0.5, 0.5, 2)) == pytest.approx(0.5, abs=1e-15)
    assert float(gaussian_05.hfunc(0.975, 0.5, 2)) == pytest.approx(0.98820, abs=5e-5)
    assert float(gaussian_05.hinv(0.98820, 0.5, 2)) == pytest.approx(0.975, abs=1e-4)


def test_gaussian_hfunc_matches_formula(gaussian_05):
    a, b = np.meshgrid(GRID20, GRID20)
    expected = ndtr((ndtri(a) - 0.5 * ndtri(b)) / math.sqrt(0.75))
    assert np.max(np.abs(gaussian_05.hfunc(a, b, 2) - expected)) < 1e-10


def test_gaussian_fit_inverts_kendall_tau():
    u = BivariateCopula(BicopFamily.GAUSSIAN, rho=math.sin(math.pi / 4)).simulate(5000, seed=1)
    tau = kendall_tau(u[:, 0], u[:, 1])
    fitted = fit_bicop(u, "gaussian")
    assert fitted.rho == pytest.approx(math.sin(math.pi * tau / 2), abs=1e-12)
    assert fitted.rho == pytest.approx(0.70711, abs=0.03)


@pytest.mark.parametrize("rho", [-0.5, 0.0, 0.7])
def test_simulate_then_fit_recovers_rho(rho):
    c = BivariateCopula(BicopFamily.GAUSSIAN, rho=rho)
    u = c.simulate(5000, seed=11)
    assert abs(fit_bicop(u, "gaussian").rho - rho) < 0.05


def test_simulated_kendall_tau():
    u = BivariateCopula(BicopFamily.GAUSSIAN, rho=0.7).simulate(10_000, seed=5)
    assert 0.46 <= kendall_tau(u[:, 0], u[:, 1]) <= 0.52
    w = INDEPENDENCE.simulate(10_000, seed=5)
    assert abs(kendall_tau(w[:, 0], w[:, 1])) <= 0.03


def test_simulated_margins_are_uniform(gaussian_05, tll):
    for c in (INDEPENDENCE, gaussian_05):
        u = c.simulate(3000, seed=8)
        assert kstest(u[:, 0], "uniform").pvalue > 0.001
        assert kstest(u[:, 1], "uniform").pvalue > 0.001
    u = tll.simulate(3000, seed=8)
    assert kstest(u[:, 0], "uniform").pvalue > 0.001
    assert kstest(u[:, 1], "uniform").pvalue > 0.001
    assert np.all((u > 0) & (u < 1))


def test_loglik_values():
    c = BivariateCopula(BicopFamily.GAUSSIAN, rho=0.9)
    own = c.simulate(2000, seed=2)
    # entropy of the Gaussian copula: -log(1 - rho^2) / 2 = 0.830
    assert 0.78 <= c.loglik(own) / 2000 <= 0.88
    noise = np.random.default_rng(2).uniform(size=(2000, 2))
    assert c.loglik(noise) / 2000 < 0


def test_near_perfect_dependence_is_clamped(caplog):
    x = np.linspace(0.01, 0.99, 200)
    with caplog.at_level("WARNING"):
        c = fit_bicop(np.column_stack((x, x)), "gaussian")
    assert c.rho == pytest.approx(0.99)
    assert "clamping" in caplog.text


def test_fit_validation():
    with pytest.raises(DomainError):
        fit_bicop(np.array([[0.2, 1.0]] * 40), "gaussian")
    with pytest.raises(InsufficientDataError):
        fit_bicop(np.full((10, 2), 0.5), "tll")
    with pytest.raises(DomainError):
        INDEPENDENCE.pdf(0.0, 0.5)
    with pytest.raises(DomainError):
        INDEPENDENCE.hfunc(0.5, 0.5, which=3)


def test_nodes_are_symmetric():
    nodes = normal_score_nodes()
    assert nodes.size == 30
    assert np.all(np.diff(nodes) > 0)
    assert np.allclose(nodes + nodes[::-1], 1.0, atol=1e-12)
    assert nodes[0] == pytest.approx(ndtr(-3.25))


def test_transformation_kernel_grid(tll):
    assert np.all(tll.grid.values >= 0)
    assert 0.95 <= tll.grid.integral() <= 1.05
    assert np.all(tll.pdf(*np.meshgrid(GRID20, GRID20)) >= 0)


def test_transformation_kernel_margins_integrate_to_one(tll):
    knots, padded = tll.grid.knots, tll.grid.padded
    assert np.allclose(trapezoid(padded, knots, axis=1), 1.0, atol=1e-6)
    assert np.allclose(trapezoid(padded, knots, axis=0), 1.0, atol=1e-6)
    assert tll.grid.integral() == pytest.approx(1.0, abs=1e-6)


def test_narrower_kernel_fits_the_sample_more_closely(gaussian_pair):
    wide = fit_bicop(gaussian_pair, "tll")
    narrow = fit_bicop(gaussian_pair, "tll", grid_size=50, bandwidth_mult=0.5)
    assert narrow.grid.m == 50
    assert narrow.loglik(gaussian_pair) > wide.loglik(gaussian_pair)
    with pytest.raises(DomainError, match="Bandwidth multiplier"):
        fit_bicop(gaussian_pair, "tll", bandwidth_mult=0.0)


def test_transformation_kernel_follows_dependence(tll, gaussian_pair):
    # concordant corners carry more mass than discordant ones for rho = 0.5
    assert float(tll.pdf(0.1, 0.1)) > float(tll.pdf(0.1, 0.9))
    assert tll.loglik(gaussian_pair) > 0


def test_hfunc_monotone_and_invertible(all_families):
    a = np.linspace(0.01, 0.99, 50)
    for c in all_families:
        for which in (1, 2):
            for b in (0.1, 0.5, 0.9):
                assert np.all(np.diff(c.hfunc(a, b, which)) >= -1e-12)
            grid_a, grid_b = np.meshgrid(GRID20, GRID20)
            p = c.hfunc(grid_a, grid_b, which)
            assert np.max(np.abs(c.hinv(p, grid_b, which) - grid_a)) < 1e-6


def test_symmetrized_data_gives_symmetric_density(gaussian_pair):
    pooled = np.vstack((gaussian_pair, gaussian_pair[:, ::-1]))
    c = fit_bicop(pooled, "tll")
    u, v = np.meshgrid(np.linspace(0.02, 0.98, 15), np.linspace(0.02, 0.98, 15))
    assert np.max(np.abs(c.pdf(u, v) - c.pdf(v, u))) < 1e-8


def test_dict_round_trip(all_families):
    for c in all_families:
        restored = BivariateCopula.from_dict(c.to_dict())
        assert restored.family is c.family
        u, v = np.meshgrid(GRID20, GRID20)
        assert np.array_equal(restored.hfunc(u, v, 2), c.hfunc(u, v, 2))


def test_grid_rejects_negative_values():
    nodes = normal_score_nodes(8)
    with pytest.raises(DomainError):
        BivariateCopula(BicopFamily.TLL, grid=DensityGrid(nodes, -np.ones((8, 8))))


def test_gaussian_fit_on_independent_data():
    u = np.random.default_rng(4).uniform(size=(5000, 2))
    assert abs(fit_bicop(u, "gaussian").rho) <= 0.06
