"""Finite-support measures, exact order-1 transport, and ball suprema.

Everything here reduces to a transportation LP solved by the in-house
simplex, so each distance comes with a primal/dual certificate.  The only
non-LP routine is the one-dimensional distance to a uniform law, computed
from the closed-form CDF-difference integral; the test suite uses it as an
independent oracle against the LP path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from srosi.errors import InvalidParameter, UnsupportedNorm
from srosi.lp import EQ, LE, LPModel, SolveOptions, Status, solve_lp
from srosi.weights import Dataset, WeightVector

__all__ = [
    "DiscreteMeasure",
    "TransportResult",
    "empirical_conditional",
    "wasserstein1",
    "wasserstein1_result",
    "wasserstein1_1d_vs_uniform",
    "w1_dro_sup_finite",
]

_NORMS = {"l1": 1, "l2": 2, "linf": np.inf}


def _norm_order(norm: str):
    try:
        return _NORMS[norm.lower()]
    except KeyError:
        raise UnsupportedNorm(f"norm {norm!r} not one of {sorted(_NORMS)}") from None


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability measure on finitely many atoms (rows of ``atoms``)."""

    atoms: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        p = np.asarray(self.probs, dtype=float).ravel()
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "probs", p)
        if a.shape[0] < 1:
            raise InvalidParameter("measure needs at least one atom")
        if a.shape[0] != p.size:
            raise InvalidParameter(f"{a.shape[0]} atoms but {p.size} probabilities")
        if np.any(p < 0):
            raise InvalidParameter("probabilities must be nonnegative")
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise InvalidParameter(f"probabilities sum to {float(p.sum())!r}")

    @property
    def m(self) -> int:
        return self.atoms.shape[0]

    @property
    def d(self) -> int:
        return self.atoms.shape[1]

    def expectation(self, f: np.ndarray) -> float:
        f = np.asarray(f, dtype=float).ravel()
        if f.size != self.m:
            raise InvalidParameter(f"f has {f.size} entries, expected {self.m}")
        return float(self.probs @ f)


def empirical_conditional(data: Dataset, w: WeightVector) -> DiscreteMeasure:
    """The weighted empirical measure ``sum_i w_i * delta_{xi_i}``.

    Zero-weight atoms are retained so atom index i always refers to
    sample i of the dataset.
    """
    if len(w) != data.n:
        raise InvalidParameter(f"{len(w)} weights for {data.n} samples")
    return DiscreteMeasure(atoms=data.xis, probs=w.w)


@dataclass(frozen=True)
class TransportResult:
    """Optimal transport value plus the LP evidence behind it."""

    value: float
    plan: np.ndarray  # m x m' coupling
    row_duals: np.ndarray
    col_duals: np.ndarray
    dual_value: float


def _pairwise(a: np.ndarray, b: np.ndarray, order) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.linalg.norm(diff, ord=order, axis=2)


def wasserstein1_result(
    mu: DiscreteMeasure, nu: DiscreteMeasure, norm: str = "l2"
) -> TransportResult:
    """Solve the transportation LP between two finite-support measures.

    min sum_{jk} c_{jk} pi_{jk}  s.t.  pi >= 0, row sums = mu, col sums = nu,
    with ground cost ``c_{jk} = ||atom_j - atom'_k||``.
    """
    if mu.d != nu.d:
        raise InvalidParameter(f"dimension mismatch: {mu.d} vs {nu.d}")
    cost = _pairwise(mu.atoms, nu.atoms, _norm_order(norm))
    m, mp = mu.m, nu.m

    # Marginal constraints; the last column-sum row is redundant (both
    # marginals sum to one) and dropping it keeps the basis nonsingular.
    rows_i = np.repeat(np.arange(m), mp)
    cols_j = np.tile(np.arange(mp), m)
    idx = np.arange(m * mp)
    a = sp.csr_matrix(
        (
            np.ones(2 * m * mp),
            (
                np.concatenate([rows_i, m + cols_j]),
                np.concatenate([idx, idx]),
            ),
        ),
        shape=(m + mp, m * mp),
    )[: m + mp - 1]
    b = np.concatenate([mu.probs, nu.probs[:-1]])
    model = LPModel(
        c=cost.ravel(),
        a=a,
        senses=np.full(m + mp - 1, EQ),
        b=b,
        lo=np.zeros(m * mp),
        hi=np.full(m * mp, np.inf),
        name="transport",
    )
    res = solve_lp(model, SolveOptions())
    if res.status is not Status.OPTIMAL:  # pragma: no cover - always feasible
        raise AssertionError(f"transportation LP reported {res.status}")
    y = np.concatenate([res.y, [0.0]])  # dual of the dropped redundant row
    return TransportResult(
        value=float(res.objective),
        plan=res.x.reshape(m, mp),
        row_duals=y[:m],
        col_duals=y[m:],
        dual_value=float(res.dual_objective),
    )


def wasserstein1(mu: DiscreteMeasure, nu: DiscreteMeasure, norm: str = "l2") -> float:
    """Order-1 transport distance; see :func:`wasserstein1_result`."""
    return max(wasserstein1_result(mu, nu, norm).value, 0.0)


def wasserstein1_1d_vs_uniform(mu: DiscreteMeasure, a: float, b: float) -> float:
    """Exact ``integral |F_mu - F_uniform[a,b]|`` for a scalar measure.

    Piecewise closed form: between consecutive breakpoints both CDFs are
    affine, so each piece contributes the integral of a linear function's
    absolute value — a triangle-area computation, no quadrature.
    """
    if mu.d != 1:
        raise InvalidParameter("closed form requires 1-d atoms")
    if not a < b:
        raise InvalidParameter(f"need a < b, got [{a}, {b}]")
    order = np.argsort(mu.atoms[:, 0], kind="stable")
    xs = mu.atoms[order, 0]
    cum = np.cumsum(mu.probs[order])

    # Breakpoints where either CDF changes slope or jumps.
    pts = np.unique(np.concatenate([xs, [a, b]]))
    total = 0.0
    scale = b - a

    def f_uniform(t):
        return min(max((t - a) / scale, 0.0), 1.0)

    lo = min(pts[0], a)
    hi = max(pts[-1], b)
    pts = np.unique(np.concatenate([pts, [lo, hi]]))
    for left, right in zip(pts[:-1], pts[1:]):
        # F_mu is the constant reached at `left` (cadlag step function).
        fmu = float(cum[np.searchsorted(xs, left, side="right") - 1]) if np.any(
            xs <= left
        ) else 0.0
        g_l = fmu - f_uniform(left)
        g_r = fmu - f_uniform(right)
        width = right - left
        if g_l * g_r >= 0.0:
            total += 0.5 * abs(g_l + g_r) * width
        else:
            # Sign change inside the piece: two triangles.
            t_star = width * abs(g_l) / (abs(g_l) + abs(g_r))
            total += 0.5 * (abs(g_l) * t_star + abs(g_r) * (width - t_star))
    return total


def w1_dro_sup_finite(
    center: DiscreteMeasure,
    support: np.ndarray,
    f: np.ndarray,
    theta: float,
    norm: str = "l2",
) -> float:
    """Worst-case expectation of ``f`` over a transport ball, finite support.

    max  sum_k q_k f_k   over measures q on the given support rows with
    transportation distance to ``center`` at most ``theta``.  Written in
    coupling variables pi (center atom j -> support row k) it is one LP:

        max  sum_{jk} pi_{jk} f_k
        s.t. sum_k pi_{jk} = p_j,   sum_{jk} c_{jk} pi_{jk} <= theta,  pi >= 0.

    The candidate support is fixed and finite by construction; every
    center atom must be one of the rows so theta = 0 stays feasible.
    """
    support = np.atleast_2d(np.asarray(support, dtype=float))
    f = np.asarray(f, dtype=float).ravel()
    if support.shape[1] != center.d:
        raise InvalidParameter("support dimension mismatch")
    if f.size != support.shape[0]:
        raise InvalidParameter(f"{f.size} values for {support.shape[0]} rows")
    if theta < 0:
        raise InvalidParameter("theta must be nonnegative")
    cost = _pairwise(center.atoms, support, _norm_order(norm))
    covered = cost.min(axis=1) <= 1e-9
    if not covered.all():
        raise InvalidParameter(
            f"center atom {int(np.flatnonzero(~covered)[0])} is not a support row"
        )
    m, mk = cost.shape
    rows_i = np.repeat(np.arange(m), mk)
    idx = np.arange(m * mk)
    a = sp.csr_matrix(
        (
            np.concatenate([np.ones(m * mk), cost.ravel()]),
            (
                np.concatenate([rows_i, np.full(m * mk, m)]),
                np.concatenate([idx, idx]),
            ),
        ),
        shape=(m + 1, m * mk),
    )
    senses = np.array([EQ] * m + [LE])
    b = np.concatenate([center.probs, [theta]])
    model = LPModel(
        c=-np.tile(f, m),  # maximize via negated minimization
        a=a,
        senses=senses,
        b=b,
        lo=np.zeros(m * mk),
        hi=np.full(m * mk, np.inf),
        name="ball-sup",
    )
    res = solve_lp(model, SolveOptions())
    if res.status is not Status.OPTIMAL:  # pragma: no cover - always feasible
        raise AssertionError(f"ball-sup LP reported {res.status}")
    return -float(res.objective)
