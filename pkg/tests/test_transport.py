"""Transport engine: frozen values, metric axioms, duality, and the ball lemma."""

import numpy as np
import pytest

from srosi.errors import InvalidParameter
from srosi.transport import (
    DiscreteMeasure,
    empirical_conditional,
    w1_dro_sup_finite,
    wasserstein1,
    wasserstein1_1d_vs_uniform,
    wasserstein1_result,
)
from srosi.weights import Dataset, WeightVector, knn_weights
from tests.conftest import w1_1d_cdf_oracle


def dm(atoms, probs):
    return DiscreteMeasure(
        atoms=np.asarray(atoms, dtype=float).reshape(len(atoms), -1),
        probs=np.asarray(probs, dtype=float),
    )


def random_measure(rng, m_max=8, d=1):
    m = int(rng.integers(1, m_max + 1))
    p = rng.uniform(0.05, 1.0, size=m)
    return dm(rng.normal(size=(m, d)) * 2.0, p / p.sum())


# --------------------------------------------------------------------------
# DiscreteMeasure contracts
# --------------------------------------------------------------------------


def test_measure_validation():
    with pytest.raises(InvalidParameter):
        dm([[0.0]], [0.5])  # mass not one
    with pytest.raises(InvalidParameter):
        dm([[0.0], [1.0]], [1.5, -0.5])  # negative
    mu = dm([[0.0], [1.0]], [0.25, 0.75])
    assert (mu.m, mu.d) == (2, 1)
    assert abs(mu.expectation(np.array([0.0, 4.0])) - 3.0) < 1e-12


def test_empirical_conditional_composition():
    data = Dataset(
        gammas=np.array([[0.0], [1.0], [5.0]]),
        xis=np.array([[2.0], [3.0], [4.0]]),
        stage_dims=(1,),
    )
    w = knn_weights(data, np.array([0.9]), 2)
    mu = empirical_conditional(data, w)
    assert np.array_equal(mu.probs, [0.5, 0.5, 0.0])
    assert np.array_equal(mu.atoms, data.xis)  # zero-weight atoms retained


def test_empirical_conditional_length_mismatch():
    data = Dataset(gammas=np.zeros((2, 1)), xis=np.zeros((2, 1)), stage_dims=(1,))
    with pytest.raises(InvalidParameter):
        empirical_conditional(data, WeightVector(np.array([1.0])))


# --------------------------------------------------------------------------
# Wasserstein-1: frozen examples
# --------------------------------------------------------------------------


def test_w1_identical_measures_zero(rng):
    for _ in range(5):
        mu = random_measure(rng, d=2)
        assert wasserstein1(mu, mu) <= 1e-9


def test_w1_point_masses():
    mu = dm([[0.0, 0.0]], [1.0])
    nu = dm([[3.0, 4.0]], [1.0])
    assert abs(wasserstein1(mu, nu, "l2") - 5.0) < 1e-9
    assert abs(wasserstein1(mu, nu, "l1") - 7.0) < 1e-9
    assert abs(wasserstein1(mu, nu, "linf") - 4.0) < 1e-9


def test_w1_two_atom_split():
    mu = dm([[0.0]], [1.0])
    nu = dm([[0.0], [2.0]], [0.5, 0.5])
    assert abs(wasserstein1(mu, nu) - 1.0) < 1e-9


def test_w1_dual_certificate(rng):
    for _ in range(10):
        mu = random_measure(rng, d=2)
        nu = random_measure(rng, d=2)
        res = wasserstein1_result(mu, nu, "l2")
        assert abs(res.value - res.dual_value) <= 1e-7 * (1 + abs(res.value))


# --------------------------------------------------------------------------
# 1-d closed-form oracle
# --------------------------------------------------------------------------


def test_w1_vs_uniform_centered_atom():
    mu = dm([[1.0]], [1.0])
    assert abs(wasserstein1_1d_vs_uniform(mu, 0.0, 2.0) - 0.5) < 1e-12


def test_w1_vs_uniform_grid():
    m = 10
    a, b = 0.0, 1.0
    atoms = a + (np.arange(1, m + 1) - 0.5) * (b - a) / m
    mu = dm(atoms[:, None], np.full(m, 1.0 / m))
    assert abs(wasserstein1_1d_vs_uniform(mu, a, b) - (b - a) / 40.0) < 1e-12


def test_w1_vs_uniform_endpoint_atom():
    mu = dm([[0.0]], [1.0])
    assert abs(wasserstein1_1d_vs_uniform(mu, 0.0, 1.0) - 0.5) < 1e-12


def test_w1_vs_uniform_scales():
    mu = dm([[1.5]], [1.0])
    assert abs(wasserstein1_1d_vs_uniform(mu, 0.5, 2.5) - 0.5) < 1e-12


def test_w1_1d_lp_matches_cdf_formula(rng):
    # The LP route and the CDF quadrature are independent; they must agree
    # on discrete-discrete pairs too.
    for _ in range(30):
        mu = random_measure(rng, d=1)
        nu = random_measure(rng, d=1)
        lp_val = wasserstein1(mu, nu)
        ref = w1_1d_cdf_oracle(mu.atoms, mu.probs, nu.atoms, nu.probs)
        assert abs(lp_val - ref) <= 1e-8 * (1 + ref)


# --------------------------------------------------------------------------
# Metric axioms
# --------------------------------------------------------------------------


def test_metric_axioms(rng):
    for _ in range(25):
        d = int(rng.integers(1, 4))
        mu = random_measure(rng, d=d)
        nu = random_measure(rng, d=d)
        rho = random_measure(rng, d=d)
        dmn = wasserstein1(mu, nu)
        dnm = wasserstein1(nu, mu)
        assert dmn >= 0.0
        assert abs(dmn - dnm) <= 1e-9 * (1 + dmn)
        dmr = wasserstein1(mu, rho)
        drn = wasserstein1(rho, nu)
        assert dmn <= dmr + drn + 1e-7


# --------------------------------------------------------------------------
# Worst-case expectation over a W1 ball on a finite support
# --------------------------------------------------------------------------


def test_dro_sup_zero_radius_is_expectation(rng):
    support = rng.normal(size=(6, 2))
    f = rng.normal(size=6)
    probs = rng.uniform(0.1, 1.0, size=6)
    probs /= probs.sum()
    center = DiscreteMeasure(atoms=support, probs=probs)
    val = w1_dro_sup_finite(center, support, f, 0.0, "l2")
    assert abs(val - float(probs @ f)) < 1e-9


def test_dro_sup_large_radius_hits_max(rng):
    support = rng.normal(size=(5, 1))
    f = rng.normal(size=5)
    center = DiscreteMeasure(atoms=support[:1], probs=np.array([1.0]))
    diam = float(np.abs(support - support.T).max())
    val = w1_dro_sup_finite(center, support, f, diam + 1.0, "l2")
    assert abs(val - f.max()) < 1e-9


def test_dro_sup_partial_mass_move():
    center = DiscreteMeasure(atoms=np.array([[0.0]]), probs=np.array([1.0]))
    support = np.array([[0.0], [1.0]])
    f = np.array([0.0, 10.0])
    val = w1_dro_sup_finite(center, support, f, 0.3, "l2")
    assert abs(val - 3.0) < 1e-9


def test_dro_sup_monotone_in_radius(rng):
    support = rng.normal(size=(7, 2))
    f = rng.normal(size=7)
    probs = rng.uniform(0.1, 1.0, size=7)
    probs /= probs.sum()
    center = DiscreteMeasure(atoms=support, probs=probs)
    vals = [w1_dro_sup_finite(center, support, f, t, "l2") for t in (0.0, 0.2, 0.5, 1.5)]
    assert all(vals[i] <= vals[i + 1] + 1e-9 for i in range(len(vals) - 1))


# --------------------------------------------------------------------------
# Ball-sup bound (finite-support form)
# --------------------------------------------------------------------------


def ball_sup_bound(center, support, f, theta1, theta2, norm="l2"):
    """Right-hand side: weighted per-atom ball maxima plus the slack term."""
    order = {"l1": 1, "l2": 2, "linf": np.inf}[norm]
    total = 0.0
    for atom, p in zip(center.atoms, center.probs):
        dist = np.linalg.norm(support - atom[None, :], ord=order, axis=1)
        total += p * f[dist <= theta2 + 1e-12].max()
    return total + (4.0 * theta1 / theta2) * np.abs(f).max()


def test_ball_lemma_inequality(rng):
    # The W1-ball worst case never exceeds the per-sample-ball relaxation
    # plus the radius-ratio slack, provided theta2 >= 2 theta1.
    for _ in range(60):
        d = int(rng.integers(1, 3))
        m = int(rng.integers(2, 7))
        support = rng.normal(size=(m, d)) * 2.0
        f = rng.normal(size=m) * 3.0
        probs = rng.uniform(0.05, 1.0, size=m)
        probs /= probs.sum()
        center = DiscreteMeasure(atoms=support, probs=probs)
        theta1 = float(rng.uniform(0.0, 1.0))
        theta2 = float(rng.uniform(2.0, 4.0)) * max(theta1, 0.05)
        lhs = w1_dro_sup_finite(center, support, f, theta1, "l2")
        rhs = ball_sup_bound(center, support, f, theta1, theta2)
        assert lhs <= rhs + 1e-9
