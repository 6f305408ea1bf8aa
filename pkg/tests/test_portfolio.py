"""Mean-cVaR portfolio robustification: frozen values and exactness checks."""

import numpy as np
import pytest

from srosi.errors import InvalidParameter, UnsupportedNorm
from srosi.portfolio import (
    PortfolioProblem,
    dro_value_fixed_decision,
    solve_cvar_portfolio,
)
from srosi.transport import DiscreteMeasure, w1_dro_sup_finite
from srosi.weights import Dataset, WeightVector
from tests.conftest import random_weights, saa_portfolio_oracle


def returns_data(rets):
    rets = np.asarray(rets, dtype=float)
    return Dataset(
        gammas=np.zeros((rets.shape[0], 1)),
        xis=rets,
        stage_dims=(rets.shape[1],),
    )


def uniform(n):
    return WeightVector(np.full(n, 1.0 / n))


def random_instance(rng, n_max=4, a_max=3):
    n_s = int(rng.integers(2, n_max + 1))
    n_a = int(rng.integers(1, a_max + 1))
    rets = rng.normal(0.02, 0.15, size=(n_s, n_a))
    return returns_data(rets), random_weights(rng, n_s)


# --------------------------------------------------------------------------
# Contracts
# --------------------------------------------------------------------------


def test_problem_validation():
    with pytest.raises(InvalidParameter):
        PortfolioProblem(n=0, alpha=0.05, lam=1.0)
    with pytest.raises(InvalidParameter):
        PortfolioProblem(n=2, alpha=1.0, lam=1.0)
    with pytest.raises(InvalidParameter):
        PortfolioProblem(n=2, alpha=0.05, lam=-0.5)


def test_solver_input_validation():
    p = PortfolioProblem(n=2, alpha=0.05, lam=1.0)
    data = returns_data([[0.1, 0.0], [0.0, 0.1]])
    with pytest.raises(InvalidParameter):
        solve_cvar_portfolio(p, data, uniform(2), eps=-0.1)
    with pytest.raises(UnsupportedNorm):
        solve_cvar_portfolio(p, data, uniform(2), eps=0.1, norm="l2")
    with pytest.raises(InvalidParameter):
        solve_cvar_portfolio(p, data, uniform(3), eps=0.0)
    with pytest.raises(InvalidParameter):
        solve_cvar_portfolio(
            PortfolioProblem(n=3, alpha=0.05, lam=1.0), data, uniform(2), eps=0.0
        )


# --------------------------------------------------------------------------
# Frozen examples
# --------------------------------------------------------------------------


def test_single_asset_two_scenarios():
    # One asset forces x = 1; the optimum over beta of
    # beta + 10 mean(max(0, -r - beta)) - mean(r) lands at beta = 1.
    p = PortfolioProblem(n=1, alpha=0.05, lam=1.0)
    data = returns_data([[1.0], [-1.0]])
    sol = solve_cvar_portfolio(p, data, uniform(2), eps=0.0)
    assert abs(sol.value - 1.0) < 1e-9
    assert abs(sol.x[0] - 1.0) < 1e-12
    assert abs(sol.beta - 1.0) < 1e-9


def test_identical_rows_degenerate():
    # Constant portfolio return r.x: the tail average of a constant loss is
    # that constant, so the objective collapses to -(1 + lam) * (r.x),
    # maximized by the best single asset.
    p = PortfolioProblem(n=3, alpha=0.1, lam=0.5)
    rbar = np.array([0.01, 0.07, 0.03])
    data = returns_data(np.tile(rbar, (4, 1)))
    sol = solve_cvar_portfolio(p, data, uniform(4), eps=0.0)
    assert abs(sol.value - (-(1.0 + 0.5) * 0.07)) < 1e-9
    assert np.allclose(sol.x, [0.0, 1.0, 0.0], atol=1e-9)
    assert abs(sol.beta - (-0.07)) < 1e-9


# --------------------------------------------------------------------------
# Cross-checks against independent routes
# --------------------------------------------------------------------------


def test_matches_subgradient_oracle(rng):
    p = PortfolioProblem(n=3, alpha=0.1, lam=1.0)
    for _ in range(4):
        data, w = random_instance(rng, n_max=6, a_max=3)
        prob = PortfolioProblem(n=data.d_xi, alpha=p.alpha, lam=p.lam)
        sol = solve_cvar_portfolio(prob, data, w, eps=0.0)
        oracle = saa_portfolio_oracle(data.xis, w.w, p.alpha, p.lam)
        # The oracle reports an achieved objective, hence an upper bound.
        assert sol.value <= oracle + 1e-7
        assert oracle - sol.value <= 5e-3 * (1.0 + abs(sol.value))


def test_evaluator_consistent_with_solver(rng):
    for norm in ("linf", "l1"):
        for eps in (0.0, 0.05, 0.2):
            data, w = random_instance(rng)
            p = PortfolioProblem(n=data.d_xi, alpha=0.08, lam=0.7)
            sol = solve_cvar_portfolio(p, data, w, eps, norm=norm)
            val = dro_value_fixed_decision(sol.x, sol.beta, p, data, w, eps, norm)
            assert abs(val - sol.value) < 1e-7 * (1.0 + abs(sol.value))


def test_evaluator_zero_radius_is_saa_objective(rng):
    data, w = random_instance(rng)
    p = PortfolioProblem(n=data.d_xi, alpha=0.1, lam=1.2)
    x = np.full(p.n, 1.0 / p.n)
    beta = 0.03
    val = dro_value_fixed_decision(x, beta, p, data, w, eps=0.0)
    port = data.xis @ x
    ref = float(
        w.w @ (beta + (1.0 / p.alpha) * np.maximum(0.0, -port - beta) - p.lam * port)
    )
    assert abs(val - ref) < 1e-12


def test_evaluator_monotone_in_radius(rng):
    data, w = random_instance(rng)
    p = PortfolioProblem(n=data.d_xi, alpha=0.05, lam=1.0)
    x = np.full(p.n, 1.0 / p.n)
    for norm in ("linf", "l1"):
        vals = [
            dro_value_fixed_decision(x, 0.0, p, data, w, e, norm)
            for e in (0.0, 0.1, 0.2, 0.5)
        ]
        assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))


def test_robustness_never_below_saa_optimum(rng):
    for _ in range(6):
        data, w = random_instance(rng)
        p = PortfolioProblem(n=data.d_xi, alpha=0.1, lam=1.0)
        base = solve_cvar_portfolio(p, data, w, eps=0.0).value
        for norm in ("linf", "l1"):
            for eps in (0.05, 0.3):
                robust = solve_cvar_portfolio(p, data, w, eps, norm=norm).value
                assert robust >= base - 1e-9


def test_positive_homogeneity(rng):
    data, w = random_instance(rng, n_max=4, a_max=3)
    p = PortfolioProblem(n=data.d_xi, alpha=0.07, lam=0.9)
    eps = 0.1
    base = solve_cvar_portfolio(p, data, w, eps, norm="linf")
    s = 3.5
    scaled_data = Dataset(
        gammas=data.gammas, xis=s * data.xis, stage_dims=data.stage_dims
    )
    scaled = solve_cvar_portfolio(p, scaled_data, w, s * eps, norm="linf")
    assert abs(scaled.value - s * base.value) < 1e-8 * (1 + abs(s * base.value))
    assert np.allclose(scaled.x, base.x, atol=1e-7)
    assert abs(scaled.beta - s * base.beta) < 1e-7 * (1 + abs(s * base.beta))


def test_per_sample_relaxation_inside_transport_ball(rng):
    # Moving every sample within its own eps-ball costs at most eps in
    # transport distance (sum_i w_i d_i <= eps), so those measures all lie
    # inside the radius-eps transport ball: the ball's worst case weakly
    # dominates the per-sample relaxation.  Domination the other way needs
    # inflated per-sample radii plus slack (see the ball lemma below).
    for _ in range(4):
        n_s = int(rng.integers(2, 5))
        rets = rng.normal(0.0, 0.3, size=(n_s, 1))
        data = returns_data(rets)
        w = random_weights(rng, n_s)
        p = PortfolioProblem(n=1, alpha=0.1, lam=1.0)
        x = np.array([1.0])
        beta = float(rng.normal(0.0, 0.2))
        eps = 0.15
        lo, hi = rets.min(), rets.max()
        span = 4.0 * (hi - lo + 1.0)  # wide enough for any ball shift
        grid = np.linspace(lo - span, hi + span, 3201)
        grid = np.unique(np.concatenate([grid, rets.ravel()]))[:, None]
        port = grid.ravel()
        inv_a = 1.0 / p.alpha
        f = np.maximum(
            beta - p.lam * port, (1.0 - inv_a) * beta - (inv_a + p.lam) * port
        )
        center = DiscreteMeasure(atoms=rets, probs=w.w)
        ball = w1_dro_sup_finite(center, grid, f, eps, norm="linf")
        relaxed = dro_value_fixed_decision(x, beta, p, data, w, eps, norm="linf")
        # grid spacing bounds the discretization shortfall via the
        # Lipschitz constant (inv_a + lam) of f
        grid_tol = (inv_a + p.lam) * (2 * span + hi - lo) / 3200
        assert relaxed <= ball + grid_tol + 1e-9


def test_ball_lemma_specialized_to_portfolio(rng):
    # Inflating the per-sample radius to theta2 >= 2*theta1 and paying the
    # (4 theta1/theta2) max|f| slack dominates the transport ball.
    for _ in range(3):
        n_s = int(rng.integers(2, 5))
        rets = rng.normal(0.0, 0.3, size=(n_s, 1))
        data = returns_data(rets)
        w = random_weights(rng, n_s)
        p = PortfolioProblem(n=1, alpha=0.1, lam=1.0)
        beta = float(rng.normal(0.0, 0.2))
        theta1, theta2 = 0.1, 0.4
        lo, hi = rets.min(), rets.max()
        grid = np.linspace(lo - 3 * theta2, hi + 3 * theta2, 1601)
        grid = np.unique(np.concatenate([grid, rets.ravel()]))[:, None]
        port = grid.ravel()
        inv_a = 1.0 / p.alpha
        f = np.maximum(
            beta - p.lam * port, (1.0 - inv_a) * beta - (inv_a + p.lam) * port
        )
        center = DiscreteMeasure(atoms=rets, probs=w.w)
        ball = w1_dro_sup_finite(center, grid, f, theta1, norm="linf")
        relaxed = dro_value_fixed_decision(
            np.array([1.0]), beta, p, data, w, theta2, norm="linf"
        )
        slack = (4.0 * theta1 / theta2) * float(np.abs(f).max())
        assert ball <= relaxed + slack + 1e-9
