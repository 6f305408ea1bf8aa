"""Single-period mean-cVaR portfolio selection, robustified per sample.

The per-scenario cost ``beta + (1/alpha) max(0, -x.zeta - beta) - lam x.zeta``
is the pointwise maximum of two affine functions of the return vector:

* ``beta - lam x.zeta``  (loss below the cVaR threshold), and
* ``(1 - 1/alpha) beta - (1/alpha + lam) x.zeta``  (loss above it).

Over a norm ball of radius ``eps`` around a return sample, each branch's
supremum is closed-form: ``c.zeta`` peaks at ``c.xi + eps ||c||_dual``.
Since the portfolio lives on the unit simplex the dual-norm terms are
linear — ``||x||_1 = 1`` for sup-norm balls, and ``||x||_inf`` is a small
epigraph for 1-norm balls — so the whole problem is one LP.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from srosi.errors import InvalidParameter, SolveFailed, UnsupportedNorm
from srosi.lp import EQ, LE, LPModel, SolveOptions, Status, solve_lp
from srosi.weights import Dataset, WeightVector

__all__ = [
    "PortfolioProblem",
    "PortfolioSolution",
    "solve_cvar_portfolio",
    "dro_value_fixed_decision",
]


@dataclass(frozen=True)
class PortfolioProblem:
    """Asset count, cVaR tail level, and risk-return trade-off."""

    n: int
    alpha: float
    lam: float

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise InvalidParameter(f"n={self.n} must be a positive integer")
        if not (0.0 < self.alpha < 1.0):
            raise InvalidParameter(f"alpha={self.alpha} must lie in (0, 1)")
        if not (np.isfinite(self.lam) and self.lam >= 0.0):
            raise InvalidParameter(f"lam={self.lam} must be finite and nonnegative")


class PortfolioSolution(NamedTuple):
    value: float
    x: np.ndarray
    beta: float


def _dual_kind(norm: str) -> str:
    norm = norm.lower()
    if norm == "l2":
        raise UnsupportedNorm("l2 return balls need a cone solver; use l1 or linf")
    if norm not in ("l1", "linf"):
        raise InvalidParameter(f"norm {norm!r} not one of l1, linf")
    return norm


def solve_cvar_portfolio(
    p: PortfolioProblem,
    data: Dataset,
    w: WeightVector,
    eps: float,
    norm: str = "linf",
) -> PortfolioSolution:
    """Minimize the weighted worst-case mean-cVaR objective over the simplex.

    Returns ``(value, x, beta)``; ``beta`` is the cVaR threshold variable
    (not unique in general — the LP's canonical choice is reported).
    """
    norm = _dual_kind(norm)
    if not (np.isfinite(eps) and eps >= 0.0):
        raise InvalidParameter(f"eps={eps} must be finite and nonnegative")
    if data.d_xi != p.n:
        raise InvalidParameter(f"dataset has d_xi={data.d_xi}, problem has n={p.n}")
    if len(w) != data.n:
        raise InvalidParameter(f"{len(w)} weights for {data.n} samples")

    rets = data.xis
    n_s, n_a = rets.shape
    lam, inv_a = p.lam, 1.0 / p.alpha
    # ||x||_inf needs an epigraph variable; ||x||_1 is identically 1 on the
    # simplex, so sup-norm balls only shift the rhs.
    use_u = eps > 0.0 and norm == "l1"
    n_cols = n_a + 1 + n_s + (1 if use_u else 0)
    bcol, v0 = n_a, n_a + 1

    ident = sp.identity(n_s, format="csr")
    ones_s = np.ones((n_s, 1))
    blk1 = [sp.csr_matrix(-lam * rets), sp.csr_matrix(ones_s), -ident]
    blk2 = [
        sp.csr_matrix(-(inv_a + lam) * rets),
        sp.csr_matrix((1.0 - inv_a) * ones_s),
        -ident,
    ]
    simplex = [np.ones((1, n_a)), np.zeros((1, 1)), np.zeros((1, n_s))]
    rows = [blk1, blk2, [sp.csr_matrix(m) for m in simplex]]
    rhs1 = np.zeros(n_s)
    rhs2 = np.zeros(n_s)
    if use_u:
        blk1.append(sp.csr_matrix(eps * lam * ones_s))
        blk2.append(sp.csr_matrix(eps * (inv_a + lam) * ones_s))
        rows[2].append(sp.csr_matrix((1, 1)))
        # u >= x_j for every asset: x_j - u <= 0
        rows.append(
            [
                sp.identity(n_a, format="csr"),
                sp.csr_matrix((n_a, 1)),
                sp.csr_matrix((n_a, n_s)),
                sp.csr_matrix(-np.ones((n_a, 1))),
            ]
        )
    elif eps > 0.0:  # linf ball: dual term eps*||x||_1 = eps on the simplex
        rhs1 -= eps * lam
        rhs2 -= eps * (inv_a + lam)

    amat = sp.vstack([sp.hstack(r, format="csr") for r in rows], format="csr")
    senses = np.concatenate(
        [
            np.full(2 * n_s, LE),
            [EQ],
            np.full(n_a, LE) if use_u else np.zeros(0, dtype="<U2"),
        ]
    )
    b = np.concatenate([rhs1, rhs2, [1.0], np.zeros(n_a if use_u else 0)])
    cost = np.zeros(n_cols)
    cost[v0 : v0 + n_s] = w.w
    lo = np.full(n_cols, -np.inf)
    hi = np.full(n_cols, np.inf)
    lo[:n_a] = 0.0
    if use_u:
        lo[-1] = 0.0

    model = LPModel(
        c=cost, a=amat, senses=senses, b=b, lo=lo, hi=hi, name="cvar-portfolio"
    )
    res = solve_lp(model, SolveOptions())
    if res.status is not Status.OPTIMAL:
        raise SolveFailed(f"portfolio LP returned {res.status}")
    x = np.maximum(res.x[:n_a], 0.0)
    x /= x.sum()
    return PortfolioSolution(
        value=float(res.objective), x=x, beta=float(res.x[bcol])
    )


def dro_value_fixed_decision(
    x: np.ndarray,
    beta: float,
    p: PortfolioProblem,
    data: Dataset,
    w: WeightVector,
    eps: float,
    norm: str = "linf",
) -> float:
    """Worst-case objective of a fixed ``(x, beta)`` — no optimization.

    Per sample the two affine branches peak independently over the ball,
    and the weighted sum of branch maxima is returned.
    """
    norm = _dual_kind(norm)
    x = np.asarray(x, dtype=float).ravel()
    if x.size != p.n or data.d_xi != p.n:
        raise InvalidParameter("decision / data dimensions do not match problem")
    if len(w) != data.n:
        raise InvalidParameter(f"{len(w)} weights for {data.n} samples")
    dual = np.abs(x).max() if norm == "l1" else np.abs(x).sum()
    lam, inv_a = p.lam, 1.0 / p.alpha
    port = data.xis @ x
    branch1 = beta - lam * port + eps * lam * dual
    branch2 = (
        (1.0 - inv_a) * beta - (inv_a + lam) * port + eps * (inv_a + lam) * dual
    )
    return float(w.w @ np.maximum(branch1, branch2))
