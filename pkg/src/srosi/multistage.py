"""Multi-period robust decision problems with linear decision rules.

A :class:`DynamicProblem` stores the stage-wise costs and constraints in
compact block form: per period ``t`` the decision ``x_t`` is committed
before the period's outcome ``xi_t`` is observed, the auxiliary decision
``y_t`` after it.  Around each historical outcome path an uncertainty ball
of radius ``eps`` is placed, and the weighted worst-case cost is minimized
over linear decision rules — one primary rule for ``x`` and one auxiliary
rule per sample for ``y``.

``build_multipolicy_lp`` compiles that min-max into a single linear
program by dualizing each inner supremum: the ball radius multiplies a
dual-norm penalty on the rule coefficients (epigraph rows), and on
nonnegative-orthant support each constraint row gains a multiplier matrix
``lam >= 0`` and the objective a vector ``s >= 0``.  Entries of the
penalty arguments that are structurally zero (future-period columns) are
pruned together with their multipliers, which is exact because those
multipliers are optimally zero.

Policy evaluation deliberately does NOT reuse the fitted auxiliary rules:
realized cost is computed with exact per-period recourse (one small LP
per period), since an out-of-sample path lies in no training ball.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from srosi.errors import (
    InnerInfeasible,
    InvalidParameter,
    SolveFailed,
    TooLarge,
    UnsupportedNorm,
)
from srosi.lp import (
    LE,
    BlockStructure,
    LPModel,
    LPResult,
    SolveOptions,
    Status,
    solve_lp,
)
from srosi.weights import Dataset, WeightVector

__all__ = [
    "DynamicProblem",
    "UncertaintySpec",
    "MultiPolicy",
    "SroSolution",
    "build_multipolicy_lp",
    "solve_sro",
    "evaluate_policy",
    "exact_sro_objective",
    "x_rule_mask",
    "y_rule_mask",
    "problem_to_json",
    "problem_from_json",
]


def _starts(dims: tuple[int, ...]) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(dims)]).astype(int)


def _stage_of(dims: tuple[int, ...]) -> np.ndarray:
    return np.repeat(np.arange(len(dims)), dims)


def x_rule_mask(x_dims, xi_dims) -> np.ndarray:
    """Admissible x-rule coefficients: period(x) >= period(xi) + 1."""
    return _stage_of(tuple(x_dims))[:, None] >= _stage_of(tuple(xi_dims))[None, :] + 1


def y_rule_mask(y_dims, xi_dims) -> np.ndarray:
    """Admissible y-rule coefficients: period(y) >= period(xi)."""
    return _stage_of(tuple(y_dims))[:, None] >= _stage_of(tuple(xi_dims))[None, :]


def _check_pattern(mat, allowed, name):
    mat = np.asarray(mat, dtype=float)
    if mat.shape != allowed.shape:
        raise InvalidParameter(f"{name} has shape {mat.shape}, expected {allowed.shape}")
    if not np.isfinite(mat).all():
        raise InvalidParameter(f"{name} must be finite")
    bad = ~allowed & (mat != 0.0)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise InvalidParameter(
            f"{name}[{r},{c}] = {mat[r, c]} outside the admissible block pattern"
        )
    return mat


@dataclass(frozen=True)
class DynamicProblem:
    """Stage-wise costs/constraints in compact block form.

    ``x_dims / xi_dims / y_dims / row_dims`` partition the decision, the
    outcome, the auxiliary decision, and the constraint rows by period.
    ``a`` and ``b`` are block lower-triangular (period-``t`` rows may
    involve decisions and outcomes of periods ``<= t``), ``c`` block
    diagonal (period-``t`` rows touch only ``y_t``).  ``x_nonneg`` flags
    coordinates of ``x`` kept nonnegative through variable bounds on the
    rule (constant term and all admissible coefficients).
    """

    f: np.ndarray
    g: np.ndarray
    h: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    x_dims: tuple[int, ...]
    xi_dims: tuple[int, ...]
    y_dims: tuple[int, ...]
    row_dims: tuple[int, ...]
    x_nonneg: np.ndarray | None = None

    def __post_init__(self):
        for nm in ("x_dims", "xi_dims", "y_dims", "row_dims"):
            object.__setattr__(self, nm, tuple(int(v) for v in getattr(self, nm)))
        t = len(self.xi_dims)
        if not (len(self.x_dims) == len(self.y_dims) == len(self.row_dims) == t):
            raise InvalidParameter("per-period dimension tuples must share length T")
        if t < 1:
            raise InvalidParameter("need at least one period")
        if any(v < 0 for v in self.x_dims + self.y_dims + self.row_dims):
            raise InvalidParameter("per-period dimensions must be nonnegative")
        if any(v < 1 for v in self.xi_dims):
            raise InvalidParameter("every period must carry outcome dimensions")

        row_stage = _stage_of(self.row_dims)
        object.__setattr__(
            self,
            "a",
            _check_pattern(
                self.a, row_stage[:, None] >= _stage_of(self.x_dims)[None, :], "a"
            ),
        )
        object.__setattr__(
            self,
            "b",
            _check_pattern(
                self.b, row_stage[:, None] >= _stage_of(self.xi_dims)[None, :], "b"
            ),
        )
        object.__setattr__(
            self,
            "c",
            _check_pattern(
                self.c, row_stage[:, None] == _stage_of(self.y_dims)[None, :], "c"
            ),
        )
        for nm, dim in (("f", self.d_x), ("g", self.d_xi), ("h", self.d_y)):
            v = np.asarray(getattr(self, nm), dtype=float).ravel()
            if v.size != dim or not np.isfinite(v).all():
                raise InvalidParameter(f"{nm} must be finite with {dim} entries")
            object.__setattr__(self, nm, v)
        dv = np.asarray(self.d, dtype=float).ravel()
        if dv.size != self.m or not np.isfinite(dv).all():
            raise InvalidParameter(f"d must be finite with {self.m} entries")
        object.__setattr__(self, "d", dv)
        if self.x_nonneg is None:
            object.__setattr__(self, "x_nonneg", np.zeros(self.d_x, dtype=bool))
        else:
            xn = np.asarray(self.x_nonneg, dtype=bool).ravel()
            if xn.size != self.d_x:
                raise InvalidParameter("x_nonneg needs one flag per x coordinate")
            object.__setattr__(self, "x_nonneg", xn)

    @property
    def n_periods(self) -> int:
        return len(self.xi_dims)

    @property
    def d_x(self) -> int:
        return int(sum(self.x_dims))

    @property
    def d_xi(self) -> int:
        return int(sum(self.xi_dims))

    @property
    def d_y(self) -> int:
        return int(sum(self.y_dims))

    @property
    def m(self) -> int:
        return int(sum(self.row_dims))


@dataclass(frozen=True)
class UncertaintySpec:
    """Ball radius, ball norm, and outcome support."""

    eps: float
    norm: str = "linf"
    support: str = "orthant"

    def __post_init__(self):
        object.__setattr__(self, "norm", self.norm.lower())
        object.__setattr__(self, "support", self.support.lower())
        if not (np.isfinite(self.eps) and self.eps >= 0):
            raise InvalidParameter(f"eps={self.eps} must be finite and nonnegative")
        if self.norm not in ("l1", "l2", "linf"):
            raise InvalidParameter(f"norm {self.norm!r} not one of l1, l2, linf")
        if self.support not in ("orthant", "free"):
            raise InvalidParameter(f"support {self.support!r} not orthant or free")


@dataclass(frozen=True)
class MultiPolicy:
    """Primary linear decision rule plus one auxiliary rule per sample."""

    x0: np.ndarray
    x_mat: np.ndarray  # d_x x d_xi, strictly block lower-triangular
    y0: np.ndarray  # n_samples x d_y
    y_mats: np.ndarray  # n_samples x d_y x d_xi, block lower incl. diagonal
    x_dims: tuple[int, ...]
    xi_dims: tuple[int, ...]
    y_dims: tuple[int, ...]

    def __post_init__(self):
        for nm in ("x_dims", "xi_dims", "y_dims"):
            object.__setattr__(self, nm, tuple(int(v) for v in getattr(self, nm)))
        x0 = np.asarray(self.x0, dtype=float).ravel()
        xm = np.asarray(self.x_mat, dtype=float)
        y0 = np.atleast_2d(np.asarray(self.y0, dtype=float))
        ym = np.asarray(self.y_mats, dtype=float)
        if ym.ndim == 2:
            ym = ym[None, :, :]
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "x_mat", xm)
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "y_mats", ym)
        xmask = x_rule_mask(self.x_dims, self.xi_dims)
        ymask = y_rule_mask(self.y_dims, self.xi_dims)
        if xm.shape != xmask.shape:
            raise InvalidParameter(f"x_mat shape {xm.shape} != {xmask.shape}")
        if np.any(xm[~xmask] != 0.0):
            raise InvalidParameter("x_mat has nonzeros outside the causal mask")
        if ym.shape[1:] != ymask.shape or y0.shape[1] != ymask.shape[0]:
            raise InvalidParameter("auxiliary rule shapes do not match dims")
        if y0.shape[0] != ym.shape[0]:
            raise InvalidParameter("one y0 row per auxiliary rule required")
        if np.any(ym[:, ~ymask] != 0.0):
            raise InvalidParameter("a y rule has nonzeros outside the causal mask")

    @property
    def n_samples(self) -> int:
        return self.y0.shape[0]

    def x_at(self, zeta: np.ndarray) -> np.ndarray:
        return self.x0 + self.x_mat @ np.asarray(zeta, dtype=float).ravel()


@dataclass(frozen=True)
class SroSolution:
    objective: float
    policy: MultiPolicy
    lp_result: LPResult
    contributions: np.ndarray  # per-sample worst-case bracket values


# --------------------------------------------------------------------------
# LP assembly
# --------------------------------------------------------------------------


@dataclass
class _Layout:
    """Column/row bookkeeping shared by the builder and the extractor."""

    prob: DynamicProblem
    u: UncertaintySpec
    n_samples: int
    shared_recourse: bool
    xj: np.ndarray
    xk: np.ndarray
    pr: np.ndarray
    pk: np.ndarray
    n_shared: int
    block_cols: int
    block_rows: int
    y0_off: int
    ymat_off: int
    lam_off: int
    s_off: int
    norm_off: int
    yj: np.ndarray
    yk: np.ndarray
    model: LPModel
    const_col: int
    ycol0: np.ndarray  # first rule column per sample
    auxcol0: np.ndarray  # first multiplier/norm column per sample
    y_cols: int  # width of the rule part (y0 + Y)


def _assemble(
    prob: DynamicProblem,
    data: Dataset,
    w: WeightVector,
    u: UncertaintySpec,
    shared_recourse: bool = False,
):
    if u.norm == "l2":
        raise UnsupportedNorm(
            "l2 balls need second-order cones; only l1 and linf compile to LPs"
        )
    if tuple(data.stage_dims) != prob.xi_dims:
        raise InvalidParameter(
            f"dataset stage_dims {data.stage_dims} != problem {prob.xi_dims}"
        )
    if len(w) != data.n:
        raise InvalidParameter(f"{len(w)} weights for {data.n} samples")
    orthant = u.support == "orthant"
    if orthant and np.any(data.xis < 0):
        raise InvalidParameter(
            "nonnegative-orthant support requires all outcome paths >= 0"
        )

    eps = float(u.eps)
    robust = eps > 0.0
    n = data.n
    xis = data.xis
    wv = w.w
    d_x, d_xi, d_y, m = prob.d_x, prob.d_xi, prob.d_y, prob.m

    xmask = x_rule_mask(prob.x_dims, prob.xi_dims)
    ymask = y_rule_mask(prob.y_dims, prob.xi_dims)
    xj, xk = np.nonzero(xmask)
    yj, yk = np.nonzero(ymask)
    n_x, n_y = xj.size, yj.size
    # Penalty-argument entries that are not structurally zero: constraint
    # row of period t vs outcome column of period <= t.
    pair_mask = (
        _stage_of(prob.row_dims)[:, None] >= _stage_of(prob.xi_dims)[None, :]
    )
    pr, pk = np.nonzero(pair_mask)
    n_p = pr.size

    # ---- column layout ----
    # shared: x0 | X coefficients | constant-one column
    n_shared = d_x + n_x + 1
    const_col = d_x + n_x
    xcol_of = np.full((d_x, d_xi), -1, dtype=int)
    xcol_of[xj, xk] = d_x + np.arange(n_x)

    y0_off = 0
    ymat_off = d_y
    lam_off = ymat_off + n_y
    s_off = lam_off + (n_p if (orthant and robust) else 0)
    norm_off = s_off + (d_xi if (orthant and robust) else 0)
    if robust:
        n_norm = (m + 1) if u.norm == "l1" else (n_p + d_xi)
    else:
        n_norm = 0
    aux_cols = norm_off + n_norm  # per-sample auxiliary block width
    y_cols = lam_off  # width of the rule part (y0 + Y)

    if shared_recourse:
        # Rules live in the shared section (right after the constant col);
        # only multipliers and norm auxiliaries stay per sample.
        rule_base = n_shared
        n_shared += y_cols
        block_cols = aux_cols - y_cols
    else:
        rule_base = -1
        block_cols = aux_cols

    n_epi = 2 * n_p if robust else 0
    n_obj_epi = 2 * d_xi if robust else 0
    block_rows = m + n_epi + n_obj_epi
    n_rows = n * block_rows
    n_cols = n_shared + n * block_cols

    def ycol0(i):  # first rule column of sample i
        return rule_base if shared_recourse else n_shared + i * block_cols

    def auxcol0(i):  # first multiplier/norm column of sample i
        off = n_shared + i * block_cols
        return off if shared_recourse else off + y_cols

    # ---- constant (sample-independent) coefficient patterns ----
    ar, aj = np.nonzero(prob.a)
    aval = prob.a[ar, aj]
    cr, cj = np.nonzero(prob.c)
    cval = prob.c[cr, cj]

    # Main rows, X part: one entry per (A nonzero, admissible column k).
    rows_l, cols_l, k_l = [], [], []
    base_l = []
    for t, (r, j, v) in enumerate(zip(ar, aj, aval)):
        ks = np.flatnonzero(xmask[j])
        rows_l.append(np.full(ks.size, r))
        cols_l.append(xcol_of[j, ks])
        k_l.append(ks)
        base_l.append(np.full(ks.size, v))
    mx_row = np.concatenate(rows_l) if rows_l else np.zeros(0, dtype=int)
    mx_col = np.concatenate(cols_l) if cols_l else np.zeros(0, dtype=int)
    mx_k = np.concatenate(k_l) if k_l else np.zeros(0, dtype=int)
    mx_a = np.concatenate(base_l) if base_l else np.zeros(0)

    ycol_of = np.full((d_y, d_xi), -1, dtype=int)
    ycol_of[yj, yk] = ymat_off + np.arange(n_y)

    # Main rows, Y part (per-sample column offset added later).
    rows_l, cols_l, k_l, base_l = [], [], [], []
    for r, j, v in zip(cr, cj, cval):
        ks = np.flatnonzero(ymask[j])
        rows_l.append(np.full(ks.size, r))
        cols_l.append(ycol_of[j, ks])
        k_l.append(ks)
        base_l.append(np.full(ks.size, v))
    my_row = np.concatenate(rows_l) if rows_l else np.zeros(0, dtype=int)
    my_col = np.concatenate(cols_l) if cols_l else np.zeros(0, dtype=int)
    my_k = np.concatenate(k_l) if k_l else np.zeros(0, dtype=int)
    my_c = np.concatenate(base_l) if base_l else np.zeros(0)

    # Epigraph rows for the row-wise penalty ||A X + B + C Y + lam||_*:
    # pair p = (row r, outcome col k), sign sg in {+,-}; the entry is
    # sum_j A_rj X_jk + B_rk + sum_j C_rj Y_jk + lam_rk.  Coefficients are
    # collected in three classes: shared columns (absolute index), rule
    # columns (offset from the sample's rule base), and multiplier/norm
    # columns (offset from the sample's auxiliary base).
    esh = ([], [], [])  # rows, absolute cols, vals
    eru = ([], [], [])  # rows, rule-relative cols, vals
    eau = ([], [], [])  # rows, aux-relative cols, vals
    epi_rhs = np.zeros(n_epi)

    def _put(store, row, cols, vals):
        store[0].extend([row] * len(cols))
        store[1].extend(cols)
        store[2].extend(vals)

    if robust:
        a_by_row = [np.flatnonzero(prob.a[r]) for r in range(m)]
        c_by_row = [np.flatnonzero(prob.c[r]) for r in range(m)]
        for p, (r, k) in enumerate(zip(pr, pk)):
            xjs = [j for j in a_by_row[r] if xmask[j, k]]
            yjs = [j for j in c_by_row[r] if ymask[j, k]]
            for sg_i, sg in enumerate((1.0, -1.0)):
                row = m + 2 * p + sg_i
                epi_rhs[2 * p + sg_i] = -sg * prob.b[r, k]
                _put(esh, row, [xcol_of[j, k] for j in xjs],
                     [sg * prob.a[r, j] for j in xjs])
                _put(eru, row, [ycol_of[j, k] for j in yjs],
                     [sg * prob.c[r, j] for j in yjs])
                aux_cols_p = []
                aux_vals_p = []
                if orthant:
                    aux_cols_p.append(lam_off - y_cols + p)
                    aux_vals_p.append(sg)
                # minus the norm variable of this row / this entry
                aux_cols_p.append(
                    norm_off - y_cols + (r if u.norm == "l1" else p)
                )
                aux_vals_p.append(-1.0)
                _put(eau, row, aux_cols_p, aux_vals_p)

        # Objective-penalty epigraphs: entry k of X^T f + g + Y^T h + s.
        obj_base = m + n_epi
        for k in range(d_xi):
            xjs = np.flatnonzero(xmask[:, k])
            yjs = np.flatnonzero(ymask[:, k])
            for sg_i, sg in enumerate((1.0, -1.0)):
                row = obj_base + 2 * k + sg_i
                _put(esh, row, list(xcol_of[xjs, k]), list(sg * prob.f[xjs]))
                _put(eru, row, list(ycol_of[yjs, k]), list(sg * prob.h[yjs]))
                aux_cols_p = []
                aux_vals_p = []
                if orthant:
                    aux_cols_p.append(s_off - y_cols + k)
                    aux_vals_p.append(sg)
                aux_cols_p.append(
                    norm_off - y_cols + (m if u.norm == "l1" else n_p + k)
                )
                aux_vals_p.append(-1.0)
                _put(eau, row, aux_cols_p, aux_vals_p)
    esh = tuple(np.asarray(v, dtype=t) for v, t in zip(esh, (int, int, float)))
    eru = tuple(np.asarray(v, dtype=t) for v, t in zip(eru, (int, int, float)))
    eau = tuple(np.asarray(v, dtype=t) for v, t in zip(eau, (int, int, float)))

    # ---- assemble over samples (vectorized, constant patterns tiled) ----
    row_off = np.arange(n) * block_rows
    coo_r, coo_c, coo_v = [], [], []

    def add(rows, cols, vals):
        if len(rows):
            coo_r.append(np.asarray(rows, dtype=int))
            coo_c.append(np.asarray(cols, dtype=int))
            coo_v.append(np.asarray(vals, dtype=float))

    # x0 columns in main rows: pattern A, tiled.
    add(
        (row_off[:, None] + ar[None, :]).ravel(),
        np.tile(aj, n),
        np.tile(aval, n),
    )
    # X columns in main rows: A_rj * xi_k.
    add(
        (row_off[:, None] + mx_row[None, :]).ravel(),
        np.tile(mx_col, n),
        (mx_a[None, :] * xis[:, mx_k]).ravel(),
    )
    # y0 columns in main rows: pattern C.
    ycol0_all = np.array([ycol0(i) for i in range(n)])
    auxcol0_all = np.array([auxcol0(i) for i in range(n)])
    add(
        (row_off[:, None] + cr[None, :]).ravel(),
        (ycol0_all[:, None] + y0_off + cj[None, :]).ravel(),
        np.tile(cval, n),
    )
    # Y columns in main rows: C_rj * xi_k.
    add(
        (row_off[:, None] + my_row[None, :]).ravel(),
        (ycol0_all[:, None] + my_col[None, :]).ravel(),
        (my_c[None, :] * xis[:, my_k]).ravel(),
    )
    if robust:
        if orthant:
            # lam columns in main rows: xi_k.
            add(
                (row_off[:, None] + pr[None, :]).ravel(),
                (auxcol0_all[:, None] + (lam_off - y_cols) + np.arange(n_p)[None, :]).ravel(),
                xis[:, pk].ravel(),
            )
        # eps * norm variables in main rows.
        if u.norm == "l1":
            add(
                (row_off[:, None] + np.arange(m)[None, :]).ravel(),
                (auxcol0_all[:, None] + (norm_off - y_cols) + np.arange(m)[None, :]).ravel(),
                np.full(n * m, eps),
            )
        else:
            add(
                (row_off[:, None] + pr[None, :]).ravel(),
                (auxcol0_all[:, None] + (norm_off - y_cols) + np.arange(n_p)[None, :]).ravel(),
                np.full(n * n_p, eps),
            )
        # Epigraph rows: identical coefficients for every sample.
        add(
            (row_off[:, None] + esh[0][None, :]).ravel(),
            np.tile(esh[1], n),
            np.tile(esh[2], n),
        )
        add(
            (row_off[:, None] + eru[0][None, :]).ravel(),
            (ycol0_all[:, None] + eru[1][None, :]).ravel(),
            np.tile(eru[2], n),
        )
        add(
            (row_off[:, None] + eau[0][None, :]).ravel(),
            (auxcol0_all[:, None] + eau[1][None, :]).ravel(),
            np.tile(eau[2], n),
        )

    rows = np.concatenate(coo_r)
    cols = np.concatenate(coo_c)
    vals = np.concatenate(coo_v)
    amat = sp.csr_matrix((vals, (rows, cols)), shape=(n_rows, n_cols))

    # ---- rhs ----
    rhs = np.empty((n, block_rows))
    rhs[:, :m] = prob.d[None, :] - xis @ prob.b.T
    if robust:
        rhs[:, m : m + n_epi] = epi_rhs[None, :]
        gk = prob.g[None, :]
        obj_rhs = np.stack([-gk, gk], axis=2).reshape(1, -1)  # (+,-) interleaved
        rhs[:, m + n_epi :] = obj_rhs
    b_vec = rhs.ravel()

    # ---- objective ----
    cost = np.zeros(n_cols)
    cost[:d_x] = prob.f
    xbar = wv @ xis
    cost[d_x : d_x + n_x] = prob.f[xj] * xbar[xk]
    cost[const_col] = float(wv @ (xis @ prob.g))
    if shared_recourse:
        cost[rule_base + y0_off : rule_base + y0_off + d_y] = prob.h
        cost[rule_base + ymat_off : rule_base + ymat_off + n_y] = (
            prob.h[yj] * xbar[yk]
        )
    for i in range(n):
        a0 = auxcol0_all[i]
        if not shared_recourse:
            yc = ycol0_all[i]
            cost[yc + y0_off : yc + y0_off + d_y] = wv[i] * prob.h
            cost[yc + ymat_off : yc + ymat_off + n_y] = wv[i] * prob.h[yj] * xis[i, yk]
        if robust and orthant:
            cost[a0 + (s_off - y_cols) : a0 + (s_off - y_cols) + d_xi] = (
                wv[i] * xis[i]
            )
        if robust:
            if u.norm == "l1":
                cost[a0 + (norm_off - y_cols) + m] = wv[i] * eps
            else:
                sl = a0 + (norm_off - y_cols) + n_p
                cost[sl : sl + d_xi] = wv[i] * eps

    # ---- bounds ----
    lo = np.full(n_cols, -np.inf)
    hi = np.full(n_cols, np.inf)
    lo[:d_x][prob.x_nonneg] = 0.0
    lo[d_x : d_x + n_x][prob.x_nonneg[xj]] = 0.0
    lo[const_col] = hi[const_col] = 1.0
    for i in range(n):
        a0 = auxcol0_all[i]
        lo[a0 : a0 + block_cols] = 0.0  # lam, s, norm epigraphs all >= 0
        if not shared_recourse:
            yc = ycol0_all[i]
            lo[yc : yc + y_cols] = -np.inf  # rules stay free
    # shared rules already default to free

    # ---- block structure ----
    blocks = None
    if block_cols > 0 and n > 1:
        row_groups = [row_off[i] + np.arange(block_rows) for i in range(n)]
        col_groups = [
            auxcol0_all[i] + np.arange(block_cols)
            if shared_recourse
            else ycol0_all[i] + np.arange(block_cols)
            for i in range(n)
        ]
        blocks = BlockStructure(row_groups=row_groups, col_groups=col_groups)

    model = LPModel(
        c=cost,
        a=amat,
        senses=np.full(n_rows, LE),
        b=b_vec,
        lo=lo,
        hi=hi,
        blocks=blocks,
        name="multipolicy",
    )
    return _Layout(
        prob=prob,
        u=u,
        n_samples=n,
        shared_recourse=shared_recourse,
        xj=xj,
        xk=xk,
        pr=pr,
        pk=pk,
        n_shared=n_shared,
        block_cols=block_cols,
        block_rows=block_rows,
        y0_off=y0_off,
        ymat_off=ymat_off,
        lam_off=lam_off,
        s_off=s_off,
        norm_off=norm_off,
        yj=yj,
        yk=yk,
        model=model,
        const_col=const_col,
        ycol0=ycol0_all,
        auxcol0=auxcol0_all,
        y_cols=y_cols,
    )


def build_multipolicy_lp(
    prob: DynamicProblem,
    data: Dataset,
    w: WeightVector,
    u: UncertaintySpec,
    shared_recourse: bool = False,
) -> LPModel:
    """Compile the weighted worst-case rule optimization into one LP.

    See the module docstring for the construction; the returned model's
    optimal value equals the robust objective (a pinned unit column
    carries the constant term sum_i w_i g.xi_i).
    """
    return _assemble(prob, data, w, u, shared_recourse).model


def _extract_policy(layout: _Layout, x: np.ndarray, keep: np.ndarray, n_full: int):
    prob = layout.prob
    d_xi = prob.d_xi
    x0 = x[: prob.d_x].copy()
    xm = np.zeros((prob.d_x, d_xi))
    xm[layout.xj, layout.xk] = x[prob.d_x : prob.d_x + layout.xj.size]
    y0 = np.zeros((n_full, prob.d_y))
    ym = np.zeros((n_full, prob.d_y, d_xi))
    svals = np.zeros((n_full, d_xi))
    for pos, i in enumerate(np.flatnonzero(keep)):
        yc = layout.ycol0[pos]
        y0[i] = x[yc + layout.y0_off : yc + layout.y0_off + prob.d_y]
        ym[i][layout.yj, layout.yk] = x[
            yc + layout.ymat_off : yc + layout.ymat_off + layout.yj.size
        ]
        if layout.u.eps > 0 and layout.u.support == "orthant":
            a0 = layout.auxcol0[pos]
            sl = a0 + (layout.s_off - layout.y_cols)
            svals[i] = x[sl : sl + d_xi]
    return x0, xm, y0, ym, svals


def solve_sro(
    prob: DynamicProblem,
    data: Dataset,
    w: WeightVector,
    u: UncertaintySpec,
    shared_recourse: bool = False,
    drop_zero_weight: bool = False,
    options: SolveOptions | None = None,
) -> SroSolution:
    """Solve the weighted sample-robust problem over linear decision rules.

    ``shared_recourse=True`` forces one common auxiliary rule across all
    samples (implemented by column aliasing, which is value-identical to
    equality ties).  ``drop_zero_weight=True`` omits the constraint blocks
    of zero-weight samples — exact whenever the instance has complete
    recourse, which every bundled generator guarantees.
    """
    keep = np.ones(data.n, dtype=bool)
    sub_data, sub_w = data, w
    if drop_zero_weight and (w.w == 0.0).any():
        keep = w.w > 0.0
        sub_data = Dataset(
            gammas=data.gammas[keep],
            xis=data.xis[keep],
            stage_dims=data.stage_dims,
        )
        sub_w = WeightVector(w.w[keep])

    layout = _assemble(prob, sub_data, sub_w, u, shared_recourse)
    res = solve_lp(layout.model, options or SolveOptions())
    if res.status is Status.INFEASIBLE:
        raise InnerInfeasible(
            "robust counterpart infeasible: the stage problem lacks complete "
            "recourse on some sample's uncertainty set"
        )
    if res.status is not Status.OPTIMAL:
        raise SolveFailed(f"robust counterpart solve returned {res.status}")

    x0, xm, y0, ym, svals = _extract_policy(layout, res.x, keep, data.n)
    if shared_recourse:
        # Every sample shares the one fitted rule, including dropped ones.
        first = int(np.flatnonzero(keep)[0])
        y0[:] = y0[first]
        ym[:] = ym[first]
    policy = MultiPolicy(
        x0=x0,
        x_mat=xm,
        y0=y0,
        y_mats=ym,
        x_dims=prob.x_dims,
        xi_dims=prob.xi_dims,
        y_dims=prob.y_dims,
    )

    dual_ord = {"l1": np.inf, "linf": 1}[u.norm]
    contributions = np.zeros(data.n)
    for i in range(data.n):
        if not keep[i]:
            continue
        xi = data.xis[i]
        bracket = float(
            prob.f @ (x0 + xm @ xi)
            + prob.g @ xi
            + prob.h @ (y0[i] + ym[i] @ xi)
            + svals[i] @ xi
        )
        if u.eps > 0:
            v = xm.T @ prob.f + prob.g + ym[i].T @ prob.h + svals[i]
            bracket += float(u.eps * np.linalg.norm(v, ord=dual_ord))
        contributions[i] = bracket
    return SroSolution(
        objective=float(res.objective),
        policy=policy,
        lp_result=res,
        contributions=contributions,
    )


# --------------------------------------------------------------------------
# Exact evaluation
# --------------------------------------------------------------------------


def evaluate_policy(
    prob: DynamicProblem, x0: np.ndarray, x_mat: np.ndarray, zeta: np.ndarray
) -> float:
    """Realized cost of the primary rule on one outcome path.

    Per period the auxiliary decision is re-optimized exactly (a small LP
    over that period's rows), so the result is the true cost of the rule,
    independent of any fitted auxiliary rules.
    """
    zeta = np.asarray(zeta, dtype=float).ravel()
    if zeta.size != prob.d_xi:
        raise InvalidParameter(f"scenario has {zeta.size} entries, need {prob.d_xi}")
    x0 = np.asarray(x0, dtype=float).ravel()
    x_mat = np.asarray(x_mat, dtype=float)
    xvec = x0 + x_mat @ zeta
    fixed = prob.a @ xvec + prob.b @ zeta  # row contributions of x and zeta
    cost = float(prob.f @ xvec + prob.g @ zeta)

    rs = _starts(prob.row_dims)
    ys = _starts(prob.y_dims)
    for t in range(prob.n_periods):
        rows = slice(rs[t], rs[t + 1])
        ycols = slice(ys[t], ys[t + 1])
        rhs = prob.d[rows] - fixed[rows]
        n_y = ys[t + 1] - ys[t]
        if n_y == 0:
            if np.any(rhs < -1e-9 * (1.0 + np.abs(prob.d[rows]))):
                raise InnerInfeasible(
                    f"period {t}: constraints violated with no recourse available"
                )
            continue
        sub = LPModel(
            c=prob.h[ycols],
            a=prob.c[rows, ycols],
            senses=np.full(rs[t + 1] - rs[t], LE),
            b=rhs,
            lo=np.full(n_y, -np.inf),
            hi=np.full(n_y, np.inf),
            name=f"recourse-t{t}",
        )
        res = solve_lp(sub, SolveOptions())
        if res.status is Status.INFEASIBLE:
            raise InnerInfeasible(f"period {t}: recourse infeasible at this path")
        if res.status is not Status.OPTIMAL:
            raise SolveFailed(f"period {t}: recourse LP returned {res.status}")
        cost += float(res.objective)
    return cost


def exact_sro_objective(
    prob: DynamicProblem,
    x0: np.ndarray,
    x_mat: np.ndarray,
    data: Dataset,
    w: WeightVector,
    u: UncertaintySpec,
) -> float:
    """Weighted worst-case cost of a primary rule with exact recourse.

    Valid for sup-norm balls only: the per-sample cost is convex in the
    path, so each supremum is attained at a vertex of the (support-
    clipped) box, and all ``2**d_xi`` vertices are enumerated.
    """
    if u.norm != "linf":
        raise UnsupportedNorm("exact enumeration needs box uncertainty (linf)")
    d_xi = prob.d_xi
    if d_xi > 16:
        raise TooLarge(f"2**{d_xi} vertices is beyond the enumeration cap (d_xi<=16)")
    if len(w) != data.n:
        raise InvalidParameter(f"{len(w)} weights for {data.n} samples")
    signs = np.array(
        np.meshgrid(*[[-1.0, 1.0]] * d_xi, indexing="ij")
    ).reshape(d_xi, -1).T
    total = 0.0
    for i in range(data.n):
        if w.w[i] == 0.0:
            continue
        corners = data.xis[i][None, :] + u.eps * signs
        if u.support == "orthant":
            corners = np.maximum(corners, 0.0)
        worst = -np.inf
        for zeta in np.unique(corners, axis=0):
            worst = max(worst, evaluate_policy(prob, x0, x_mat, zeta))
        total += w.w[i] * worst
    return float(total)


# --------------------------------------------------------------------------
# JSON serialization
# --------------------------------------------------------------------------

_PROBLEM_FORMAT = "srosi-problem"
_PROBLEM_VERSION = 1


def problem_to_json(prob: DynamicProblem) -> dict:
    return {
        "format": _PROBLEM_FORMAT,
        "version": _PROBLEM_VERSION,
        "x_dims": list(prob.x_dims),
        "xi_dims": list(prob.xi_dims),
        "y_dims": list(prob.y_dims),
        "row_dims": list(prob.row_dims),
        "f": prob.f.tolist(),
        "g": prob.g.tolist(),
        "h": prob.h.tolist(),
        "a": prob.a.tolist(),
        "b": prob.b.tolist(),
        "c": prob.c.tolist(),
        "d": prob.d.tolist(),
        "x_nonneg": prob.x_nonneg.tolist(),
    }


def problem_from_json(doc: dict) -> DynamicProblem:
    if doc.get("format") != _PROBLEM_FORMAT:
        raise InvalidParameter(f"not a problem document: {doc.get('format')!r}")
    if doc.get("version") != _PROBLEM_VERSION:
        raise InvalidParameter(f"unsupported problem version {doc.get('version')!r}")
    return DynamicProblem(
        f=np.asarray(doc["f"], dtype=float),
        g=np.asarray(doc["g"], dtype=float),
        h=np.asarray(doc["h"], dtype=float),
        a=np.asarray(doc["a"], dtype=float),
        b=np.asarray(doc["b"], dtype=float),
        c=np.asarray(doc["c"], dtype=float),
        d=np.asarray(doc["d"], dtype=float),
        x_dims=tuple(doc["x_dims"]),
        xi_dims=tuple(doc["xi_dims"]),
        y_dims=tuple(doc["y_dims"]),
        row_dims=tuple(doc["row_dims"]),
        x_nonneg=np.asarray(doc["x_nonneg"], dtype=bool),
    )
