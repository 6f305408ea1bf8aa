"""Shared fixtures and independent oracles for the test suite.

The oracles here recompute expected values through routes that share no
code with the library: scipy's HiGHS solver for LP values, brute-force
vertex enumeration for tiny LPs, direct nonsmooth minimization for the
portfolio objective, and closed-form integrals for 1-d transport.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest
import scipy.optimize

from srosi.lp import EQ, GE, LE, LPModel
from srosi.multistage import DynamicProblem
from srosi.weights import Dataset, WeightVector


# --------------------------------------------------------------------------
# LP oracles
# --------------------------------------------------------------------------


def linprog_reference(model: LPModel):
    """Solve an LPModel with scipy's HiGHS backend (independent oracle).

    Returns (status_string, value) where status is one of "optimal",
    "infeasible", "unbounded", "other".
    """
    a = np.asarray(
        model.a.todense() if hasattr(model.a, "todense") else model.a, dtype=float
    )
    le = model.senses == LE
    ge = model.senses == GE
    eq = model.senses == EQ
    a_ub = np.vstack([a[le], -a[ge]]) if (le.any() or ge.any()) else None
    b_ub = np.concatenate([model.b[le], -model.b[ge]]) if a_ub is not None else None
    a_eq = a[eq] if eq.any() else None
    b_eq = model.b[eq] if eq.any() else None
    bounds = [
        (lo if np.isfinite(lo) else None, hi if np.isfinite(hi) else None)
        for lo, hi in zip(model.lo, model.hi)
    ]
    res = scipy.optimize.linprog(
        model.c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds,
        method="highs",
    )
    if res.status == 0:
        return "optimal", float(res.fun)
    if res.status == 2:
        return "infeasible", None
    if res.status == 3:
        return "unbounded", None
    return "other", None


def vertex_enumeration_value(model: LPModel) -> float:
    """Minimum over all basic feasible points of a small LP (n <= 4).

    Enumerates every choice of n active constraints among rows-at-equality
    and bounds, solves the square system, and keeps feasible points.  Pure
    linear algebra; shares nothing with the simplex implementation.
    """
    a = np.asarray(
        model.a.todense() if hasattr(model.a, "todense") else model.a, dtype=float
    )
    m, n = a.shape
    if n > 4:
        raise ValueError("vertex enumeration oracle is for n <= 4")
    rows = [(a[r], model.b[r]) for r in range(m)]
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(model.lo[j]):
            rows.append((e.copy(), model.lo[j]))
        if np.isfinite(model.hi[j]):
            rows.append((e.copy(), model.hi[j]))
    best = np.inf
    for combo in itertools.combinations(range(len(rows)), n):
        mat = np.array([rows[i][0] for i in combo])
        rhs = np.array([rows[i][1] for i in combo])
        if abs(np.linalg.det(mat)) < 1e-10:
            continue
        x = np.linalg.solve(mat, rhs)
        if _feasible(model, a, x):
            best = min(best, float(model.c @ x))
    return best


def _feasible(model: LPModel, a: np.ndarray, x: np.ndarray, tol: float = 1e-7) -> bool:
    ax = a @ x
    for r, s in enumerate(model.senses):
        if s == LE and ax[r] > model.b[r] + tol:
            return False
        if s == GE and ax[r] < model.b[r] - tol:
            return False
        if s == EQ and abs(ax[r] - model.b[r]) > tol:
            return False
    if np.any(x < model.lo - tol) or np.any(x > model.hi + tol):
        return False
    return True


def random_bounded_lp(rng: np.random.Generator, n_max: int = 8, m_max: int = 8):
    """Random LP that is feasible by construction and bounded via box bounds."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    a = rng.normal(size=(m, n)) * (rng.random((m, n)) < 0.7)
    senses = rng.choice([LE, EQ, GE], size=m)
    lo = np.where(rng.random(n) < 0.8, 0.0, -2.0)
    hi = lo + rng.uniform(0.5, 4.0, size=n)
    x0 = rng.uniform(lo, hi)
    slack = rng.uniform(0.0, 1.0, size=m)
    b = a @ x0 + np.where(senses == LE, slack, np.where(senses == GE, -slack, 0.0))
    c = rng.normal(size=n)
    return LPModel(c=c, a=a, senses=senses, b=b, lo=lo, hi=hi)


# --------------------------------------------------------------------------
# Random multistage instances with complete recourse
# --------------------------------------------------------------------------


def random_dynamic_problem(rng: np.random.Generator, t_max: int = 2, dim_max: int = 2):
    """Random DynamicProblem that is feasible and bounded by construction.

    Each period's recourse block starts with one dedicated row per
    auxiliary variable (coefficient -a_j on y_j alone), so y_j >= (row
    residual)/a_j: the inner minimum is bounded below for every right-hand
    side (dual certificate mu_j = -h_j/a_j <= 0 on those rows).  Any extra
    rows carry strictly negative coefficients on the whole stage block, so
    pushing all y up always restores feasibility (complete recourse).
    Decision coefficients are nonnegative, so larger x never relaxes a row
    and f > 0 with x >= 0 keeps the outer problem bounded.
    """
    t_n = int(rng.integers(1, t_max + 1))
    x_dims = tuple(int(rng.integers(1, dim_max + 1)) for _ in range(t_n))
    xi_dims = tuple(int(rng.integers(1, dim_max + 1)) for _ in range(t_n))
    y_dims = tuple(int(rng.integers(1, dim_max + 1)) for _ in range(t_n))
    row_dims = tuple(y + int(rng.integers(0, 2)) for y in y_dims)
    d_x, d_xi, d_y, m = map(sum, (x_dims, xi_dims, y_dims, row_dims))

    xmask_rows = _stage_blocks(row_dims)
    a = rng.uniform(0.0, 1.0, size=(m, d_x))
    a[~(xmask_rows[:, None] >= _stage_blocks(x_dims)[None, :])] = 0.0
    b = rng.uniform(-1.0, 1.0, size=(m, d_xi))
    b[~(xmask_rows[:, None] >= _stage_blocks(xi_dims)[None, :])] = 0.0
    c = np.zeros((m, d_y))
    r0 = y0 = 0
    for t in range(t_n):
        n_y, n_r = y_dims[t], row_dims[t]
        blk = np.zeros((n_r, n_y))
        blk[:n_y, :n_y] = np.diag(-rng.uniform(0.3, 1.2, size=n_y))
        blk[n_y:, :] = rng.uniform(-1.5, -0.2, size=(n_r - n_y, n_y))
        c[r0 : r0 + n_r, y0 : y0 + n_y] = blk
        r0 += n_r
        y0 += n_y
    return DynamicProblem(
        f=rng.uniform(0.2, 1.5, size=d_x),
        g=rng.uniform(-1.0, 1.0, size=d_xi),
        h=rng.uniform(0.2, 1.5, size=d_y),
        a=a,
        b=b,
        c=c,
        d=rng.uniform(0.0, 2.0, size=m),
        x_dims=x_dims,
        xi_dims=xi_dims,
        y_dims=y_dims,
        row_dims=row_dims,
        x_nonneg=np.ones(d_x, dtype=bool),
    )


def _stage_blocks(dims) -> np.ndarray:
    return np.repeat(np.arange(len(dims)), dims)


def random_dataset(rng: np.random.Generator, n: int, d_gamma: int, stage_dims):
    d_xi = int(sum(stage_dims))
    return Dataset(
        gammas=rng.normal(size=(n, d_gamma)),
        xis=rng.uniform(0.0, 2.0, size=(n, d_xi)),
        stage_dims=tuple(stage_dims),
    )


def random_weights(rng: np.random.Generator, n: int, with_zeros: bool = False):
    w = rng.uniform(0.1, 1.0, size=n)
    if with_zeros and n > 1:
        kill = rng.random(n) < 0.4
        if kill.all():
            kill[int(rng.integers(n))] = False
        w[kill] = 0.0
    return WeightVector(w / w.sum())


# --------------------------------------------------------------------------
# Portfolio oracle: direct nonsmooth minimization of the epsilon = 0 objective
# --------------------------------------------------------------------------


def saa_portfolio_oracle(rets, w, alpha, lam, restarts: int = 6, iters: int = 4000):
    """Minimize the weighted SAA mean-cVaR objective by projected subgradient.

    Independent of the LP route: works on the raw nonsmooth objective
    sum_i w_i [beta + (1/alpha) max(0, -x.r_i - beta) - lam x.r_i] over the
    simplex in x and free beta, with averaging and random restarts.
    """
    rets = np.asarray(rets, dtype=float)
    w = np.asarray(w, dtype=float)
    n_s, n_a = rets.shape
    inv_a = 1.0 / alpha

    def objective(x, beta):
        port = rets @ x
        return float(w @ (beta + inv_a * np.maximum(0.0, -port - beta) - lam * port))

    best = np.inf
    rng = np.random.default_rng(12345)
    for _ in range(restarts):
        x = rng.dirichlet(np.ones(n_a))
        beta = float(rng.normal())
        avg_val = np.inf
        for t in range(iters):
            port = rets @ x
            active = (-port - beta) > 0
            gx = -inv_a * (w * active) @ rets - lam * w @ rets
            gb = 1.0 - inv_a * float(w[active].sum())
            step = 0.5 / np.sqrt(t + 1.0)
            x = _project_simplex(x - step * gx)
            beta -= step * gb
            avg_val = min(avg_val, objective(x, beta))
        best = min(best, avg_val)
    return best


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u - css / (np.arange(v.size) + 1.0) > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


# --------------------------------------------------------------------------
# Transport oracle: 1-d Wasserstein-1 between discrete measures via CDFs
# --------------------------------------------------------------------------


def w1_1d_cdf_oracle(atoms_a, probs_a, atoms_b, probs_b) -> float:
    """Exact 1-d W1 = integral |F_a - F_b| via the pooled-breakpoint sum."""
    pts = np.concatenate([np.ravel(atoms_a), np.ravel(atoms_b)])
    order = np.argsort(pts, kind="stable")
    pts = pts[order]
    jumps = np.concatenate([np.ravel(probs_a), -np.ravel(probs_b)])[order]
    cdf_diff = np.cumsum(jumps)
    return float(np.sum(np.abs(cdf_diff[:-1]) * np.diff(pts)))


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)
