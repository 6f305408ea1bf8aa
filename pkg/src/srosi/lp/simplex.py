"""Two-phase revised simplex with bounded variables.

Internally every row is flipped to ``<=`` (or kept as ``==``), a slack
column is appended per row, and explicit artificial columns (never big-M)
cover rows whose crash slack value violates its bounds.  The basis inverse
is kept explicitly and refreshed from scratch every ``refactor_every``
pivots, which is plenty for the dense desk-scale instances this backend
is meant for.

Pivoting is deterministic: entering column by largest reduced-cost
violation with smallest-index tie-break, leaving row by minimum ratio with
largest-pivot then smallest-variable-index tie-breaks.  If the objective
stalls for ``stall_limit`` consecutive pivots the rule switches to Bland's
(least index in, least index out) until progress resumes, which keeps the
method finite on degenerate instances.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from srosi.errors import InvalidParameter, IterLimit
from srosi.lp.model import (
    EQ,
    GE,
    LPModel,
    LPResult,
    SolveOptions,
    Status,
    dual_objective_value,
)

_BASIC = 1
_NONBASIC = 0


def solve_simplex(model: LPModel, opts: SolveOptions) -> LPResult:
    m, n = model.n_rows, model.n_cols
    if m == 0 or n == 0:
        return _solve_degenerate_shape(model)

    a = model.a
    if sp.issparse(a):
        if m * n > opts.dense_cap:
            raise InvalidParameter(
                f"model of size {m}x{n} exceeds the dense simplex cap; "
                "use the interior-point backend"
            )
        a = np.asarray(a.todense())
    a = np.array(a, dtype=float)
    b = model.b.copy()

    flip = model.senses == GE
    a[flip] *= -1.0
    b[flip] *= -1.0
    is_eq = model.senses == EQ

    # Extended column space: structurals, then one slack per row.
    w = np.hstack([a, np.eye(m)])
    lo = np.concatenate([model.lo, np.where(is_eq, 0.0, 0.0)])
    hi = np.concatenate([model.hi, np.where(is_eq, 0.0, np.inf)])

    # Crash point: every structural at its finite lower bound if any, else
    # finite upper bound, else 0 for free columns.
    xval = np.zeros(n + m)
    xval[:n] = np.where(
        np.isfinite(model.lo), model.lo, np.where(np.isfinite(model.hi), model.hi, 0.0)
    )
    resid = b - a @ xval[:n]

    # Rows whose slack can absorb the residual keep the slack basic;
    # the rest get an artificial of the right sign.
    basis = np.arange(n, n + m)
    slack_ok = (resid >= lo[n:] - 1e-12) & (resid <= hi[n:] + 1e-12)
    art_rows = np.flatnonzero(~slack_ok)
    n_art = art_rows.size
    if n_art:
        sval = np.clip(resid[art_rows], lo[n:][art_rows], hi[n:][art_rows])
        rem = resid[art_rows] - sval
        sigma = np.where(rem >= 0.0, 1.0, -1.0)
        cols = np.zeros((m, n_art))
        cols[art_rows, np.arange(n_art)] = sigma
        w = np.hstack([w, cols])
        lo = np.concatenate([lo, np.zeros(n_art)])
        hi = np.concatenate([hi, np.full(n_art, np.inf)])
        xval = np.concatenate([xval, np.abs(rem)])
        xval[n + art_rows] = sval
        basis[art_rows] = n + m + np.arange(n_art)

    n_tot = n + m + n_art
    stat = np.full(n_tot, _NONBASIC, dtype=np.int8)
    stat[basis] = _BASIC
    xval[basis[slack_ok]] = resid[slack_ok]

    binv = np.eye(m)
    if n_art:
        binv[art_rows, art_rows] = np.where(rem >= 0.0, 1.0, -1.0)

    eligible = np.ones(n_tot, dtype=bool)
    eligible[lo == hi] = False

    state = _Machine(w, b, lo, hi, xval, basis, stat, binv, eligible, opts)
    budget = opts.resolved_max_iters(m, n_tot)

    bscale = 1.0 + float(np.max(np.abs(b))) if m else 1.0

    if n_art:
        c1 = np.zeros(n_tot)
        c1[n + m :] = 1.0
        status = state.run(c1, budget, phase_one=True)
        if status is not Status.OPTIMAL:  # pragma: no cover - cannot trigger
            raise AssertionError("phase one is bounded by construction")
        if c1 @ state.xval > opts.feas_tol * bscale:
            y1 = state.duals(c1)
            y1[flip] *= -1.0
            return LPResult(
                status=Status.INFEASIBLE,
                iterations=state.iters,
                backend="simplex",
                farkas=y1,
            )
        # Freeze the artificials at zero for phase two.
        state.hi[n + m :] = 0.0
        state.eligible[n + m :] = False

    c2 = np.concatenate([model.c, np.zeros(m + n_art)])
    status = state.run(c2, budget, phase_one=False)

    if status is Status.UNBOUNDED:
        ray = state.ray[:n] if state.ray is not None else None
        return LPResult(
            status=Status.UNBOUNDED, iterations=state.iters, backend="simplex", ray=ray
        )

    x = state.xval[:n].copy()
    y = state.duals(c2)
    y[flip] *= -1.0
    z = model.c - np.asarray(model.a.T @ y).ravel()
    obj = float(model.c @ x)
    return LPResult(
        status=Status.OPTIMAL,
        objective=obj,
        x=x,
        y=y,
        z=z,
        dual_objective=dual_objective_value(model, y, z),
        iterations=state.iters,
        backend="simplex",
        basis=state.basis[state.basis < n].copy(),
    )


class _Machine:
    """Mutable simplex state shared by the two phases."""

    def __init__(self, w, b, lo, hi, xval, basis, stat, binv, eligible, opts):
        self.w = w
        self.b = b
        self.lo = lo
        self.hi = hi
        self.xval = xval
        self.basis = basis
        self.stat = stat
        self.binv = binv
        self.eligible = eligible
        self.opts = opts
        self.iters = 0
        self.ray = None
        self._since_refactor = 0

    def duals(self, cost: np.ndarray) -> np.ndarray:
        return cost[self.basis] @ self.binv

    def run(self, cost: np.ndarray, budget: int, phase_one: bool) -> Status:
        opts = self.opts
        w, lo, hi, xval = self.w, self.lo, self.hi, self.xval
        bland = False
        stall = 0
        last_obj = float(cost @ xval)

        while True:
            if self.iters >= budget:
                raise IterLimit(
                    f"simplex exceeded {budget} iterations "
                    f"({'phase 1' if phase_one else 'phase 2'})"
                )
            y = cost[self.basis] @ self.binv
            rc = cost - y @ w

            atol = 1e-9 * (1.0 + np.abs(np.where(np.isfinite(lo), lo, 0.0)))
            at_lo = (self.stat == _NONBASIC) & (xval <= lo + atol) & np.isfinite(lo)
            atol = 1e-9 * (1.0 + np.abs(np.where(np.isfinite(hi), hi, 0.0)))
            at_hi = (self.stat == _NONBASIC) & ~at_lo & np.isfinite(hi) & (
                xval >= hi - atol
            )
            free = (self.stat == _NONBASIC) & ~at_lo & ~at_hi
            tol = opts.opt_tol
            viol = np.where(
                at_lo & self.eligible,
                -rc,
                np.where(
                    at_hi & self.eligible,
                    rc,
                    np.where(free & self.eligible, np.abs(rc), -np.inf),
                ),
            )
            candidates = np.flatnonzero(viol > tol)
            if candidates.size == 0:
                return Status.OPTIMAL

            if bland:
                j = int(candidates[0])
            else:
                best = np.max(viol[candidates])
                j = int(candidates[viol[candidates] >= best - 1e-300][0])
            direction = 1.0 if (at_lo[j] or (free[j] and rc[j] < 0)) else -1.0

            d = self.binv @ w[:, j]
            step_basic = direction * d
            xb = xval[self.basis]
            lob = lo[self.basis]
            hib = hi[self.basis]

            with np.errstate(divide="ignore", invalid="ignore"):
                ratio_lo = np.where(
                    step_basic > opts.pivot_tol, (xb - lob) / step_basic, np.inf
                )
                ratio_hi = np.where(
                    step_basic < -opts.pivot_tol, (xb - hib) / step_basic, np.inf
                )
            ratios = np.minimum(ratio_lo, ratio_hi)
            ratios = np.maximum(ratios, 0.0)
            t_basic = float(np.min(ratios)) if ratios.size else np.inf
            # Distance from the current value to the bound the entering
            # variable is moving toward (not bound-to-bound: the variable
            # may start strictly between its bounds).
            t_flip = hi[j] - xval[j] if direction > 0 else xval[j] - lo[j]
            t_flip = max(float(t_flip), 0.0) if np.isfinite(t_flip) else np.inf
            t = min(t_basic, t_flip)

            if not np.isfinite(t):
                if phase_one:  # pragma: no cover - phase one is bounded
                    raise AssertionError("unbounded phase-one subproblem")
                ray = np.zeros(xval.size)
                ray[j] = direction
                ray[self.basis] = -step_basic
                self.ray = ray
                return Status.UNBOUNDED

            if t_flip <= t_basic:
                # Bound flip: the entering column jumps to the bound ahead.
                xval[self.basis] = xb - t * step_basic
                xval[j] = hi[j] if direction > 0 else lo[j]
                self.iters += 1
            else:
                tie = np.flatnonzero(ratios <= t + 1e-9 * (1.0 + abs(t)))
                if bland:
                    p = int(tie[np.argmin(self.basis[tie])])
                else:
                    piv = np.abs(step_basic[tie])
                    best_piv = np.max(piv)
                    shortlist = tie[piv >= best_piv * (1.0 - 1e-9)]
                    p = int(shortlist[np.argmin(self.basis[shortlist])])
                leaving = int(self.basis[p])
                xval[self.basis] = xb - t * step_basic
                xval[j] = xval[j] + direction * t
                # Leaving variable lands exactly on the bound it hit.
                land_lo = ratio_lo[p] <= ratio_hi[p]
                xval[leaving] = lob[p] if land_lo else hib[p]
                self._pivot(p, j, d)
                self.stat[leaving] = _NONBASIC
                self.stat[j] = _BASIC
                self.iters += 1
                self._since_refactor += 1
                if self._since_refactor >= opts.refactor_every:
                    self._refactor()

            obj = float(cost @ xval)
            if obj < last_obj - 1e-12 * (1.0 + abs(last_obj)):
                stall = 0
                bland = False
            else:
                stall += 1
                if stall >= opts.stall_limit:
                    bland = True
            last_obj = obj

    def _pivot(self, p: int, j: int, d: np.ndarray) -> None:
        piv = d[p]
        self.binv[p, :] /= piv
        other = np.arange(self.binv.shape[0]) != p
        self.binv[other, :] -= np.outer(d[other], self.binv[p, :])
        self.basis[p] = j

    def _refactor(self) -> None:
        bmat = self.w[:, self.basis]
        try:
            binv = np.linalg.inv(bmat)
        except np.linalg.LinAlgError:  # pragma: no cover - keep old inverse
            return
        self.binv = binv
        # Recompute basic values from the nonbasic point to squash drift.
        nb_mask = self.stat == _NONBASIC
        self.xval[self.basis] = self.binv @ (
            self.b - self.w[:, nb_mask] @ self.xval[nb_mask]
        )
        self._since_refactor = 0


def _solve_degenerate_shape(model: LPModel) -> LPResult:
    """Handle models with no rows or no columns without the machinery."""
    m, n = model.n_rows, model.n_cols
    if n == 0:
        ax = np.zeros(m)
        ok = (
            ((model.senses == EQ) & (np.abs(model.b) <= 1e-12))
            | ((model.senses == GE) & (model.b <= 1e-12))
            | ((model.senses != EQ) & (model.senses != GE) & (model.b >= -1e-12))
        )
        if ok.all():
            return LPResult(
                status=Status.OPTIMAL,
                objective=0.0,
                x=np.zeros(0),
                y=np.zeros(m),
                z=np.zeros(0),
                dual_objective=0.0,
                backend="simplex",
            )
        return LPResult(status=Status.INFEASIBLE, backend="simplex")
    # No rows: separable bound minimization.  A cost pushing toward an
    # infinite bound is an unbounded ray; zero-cost columns sit at any
    # finite bound (or 0 when free).
    target = np.where(model.c > 0, model.lo, np.where(model.c < 0, model.hi, 0.0))
    unb = (model.c != 0) & ~np.isfinite(target)
    if unb.any():
        j = int(np.flatnonzero(unb)[0])
        ray = np.zeros(n)
        ray[j] = -np.sign(model.c[j])
        return LPResult(status=Status.UNBOUNDED, backend="simplex", ray=ray)
    x = target.copy()
    zc = model.c == 0
    x[zc] = np.where(
        np.isfinite(model.lo[zc]),
        model.lo[zc],
        np.where(np.isfinite(model.hi[zc]), model.hi[zc], 0.0),
    )
    z = model.c.copy()
    return LPResult(
        status=Status.OPTIMAL,
        objective=float(model.c @ x),
        x=x,
        y=np.zeros(0),
        z=z,
        dual_objective=dual_objective_value(model, np.zeros(0), z),
        backend="simplex",
    )
