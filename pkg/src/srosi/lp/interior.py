"""Primal-dual interior-point backend (Mehrotra predictor-corrector).

Built for one job the simplex backend cannot do: the per-sample robust
reformulations, which are block-angular LPs with tens of thousands of
rows.  The normal-equation matrix there is::

    A @ diag(theta) @ A.T  =  blkdiag(D_1, ..., D_K)  +  U @ Theta_s @ U.T

where block ``k`` holds one sample's rows/columns and ``U`` carries the
few linking columns (first-stage decision-rule coefficients).  Each
``D_k`` is factored densely (batched Cholesky when blocks share a size)
and the linking part is folded in through a Schur complement of the size
of the linking column count, so the per-iteration cost is linear in the
number of samples.

The backend assumes the model is feasible and bounded — which the
reformulation builders guarantee by construction — and raises
:class:`srosi.errors.IterLimit` rather than returning an uncertified
point when it cannot converge.  Models without declared blocks are
handled as a single block, which is how the test suite cross-checks this
solver against the simplex on generic instances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from srosi.errors import IterLimit
from srosi.lp.model import (
    EQ,
    GE,
    LPModel,
    LPResult,
    SolveOptions,
    Status,
    dual_objective_value,
)


class _FactorTrouble(Exception):
    """Internal: the normal-equation factorization lost too many digits."""


def solve_interior(model: LPModel, opts: SolveOptions) -> LPResult:
    work = _Workspace(model)
    x, y, zl, zu = work.starting_point()
    n_active = max(1, work.fl.sum() + work.fu.sum())
    sc_b = 1.0 + float(np.max(np.abs(work.b), initial=0.0))
    sc_c = 1.0 + float(np.max(np.abs(work.c), initial=0.0))
    # Looser "good enough" exit for when the endgame factorizations run
    # out of precision; chosen to still clear the certificate tolerances
    # (1e-7 relative feasibility, 1e-6 relative gap) with margin.
    acc_pd = max(opts.ipm_tol, 8e-8)
    acc_g = max(opts.ipm_tol, 8e-7)

    best = None
    it = 0
    while it < opts.ipm_max_iters:
        # Floored at a tiny positive value: a coordinate can round onto its
        # bound exactly, and the barrier terms divide by these.
        p = np.where(work.fl, np.maximum(x - work.l, 1e-14), 1.0)
        q = np.where(work.fu, np.maximum(work.u - x, 1e-14), 1.0)
        rp = work.b - work.amat @ x
        rd = work.c - work.at @ y - zl + zu
        gap = float(p[work.fl] @ zl[work.fl] + q[work.fu] @ zu[work.fu])
        mu = gap / n_active

        obj = float(work.c @ x)
        rel_p = float(np.max(np.abs(rp), initial=0.0)) / sc_b
        rel_d = float(np.max(np.abs(rd), initial=0.0)) / sc_c
        rel_g = gap / (1.0 + abs(obj))
        if best is None or max(rel_p, rel_d, rel_g) < max(best[:3]):
            best = (rel_p, rel_d, rel_g, x.copy(), y.copy(), zl.copy(), zu.copy())
            since_best = 0
        else:
            since_best += 1
        if rel_p <= opts.ipm_tol and rel_d <= opts.ipm_tol and rel_g <= opts.ipm_tol:
            return work.result(model, x, y, zl, zu, it, Status.OPTIMAL)
        # Residuals at the precision floor bounce rather than improve;
        # once the best iterate is inside the certificate margins, more
        # iterations only burn factorizations.
        if (
            since_best >= 6
            and best[0] <= acc_pd
            and best[1] <= acc_pd
            and best[2] <= acc_g
        ):
            return work.result(model, *best[3:], it, Status.OPTIMAL)

        dcoef = np.full(work.n_tot, work.delta_p)
        dcoef[work.fl] += zl[work.fl] / p[work.fl]
        dcoef[work.fu] += zu[work.fu] / q[work.fu]
        theta = 1.0 / dcoef
        try:
            work.factor(theta)

            # Predictor (pure Newton toward mu = 0).
            rcl = -(p * zl)
            rcu = -(q * zu)
            dx, dy, dzl, dzu = work.newton_step(theta, rp, rd, rcl, rcu, p, q, zl, zu)
            ap = min(1.0, _max_step(p, dx, q, -dx, work.fl, work.fu))
            ad = min(1.0, _max_step(zl, dzl, zu, dzu, work.fl, work.fu))
            mu_aff = (
                float(
                    (p + ap * dx)[work.fl] @ (zl + ad * dzl)[work.fl]
                    + (q - ap * dx)[work.fu] @ (zu + ad * dzu)[work.fu]
                )
                / n_active
            )
            sigma = min(0.99, max((mu_aff / mu) ** 3 if mu > 0 else 0.0, 1e-8))

            # Corrector with Mehrotra's second-order term.
            rcl = sigma * mu - p * zl - dx * dzl
            rcu = sigma * mu - q * zu + dx * dzu
            rcl[~work.fl] = 0.0
            rcu[~work.fu] = 0.0
            dx, dy, dzl, dzu = work.newton_step(theta, rp, rd, rcl, rcu, p, q, zl, zu)
        except (np.linalg.LinAlgError, RuntimeError, _FactorTrouble):
            work.delta_d *= 100.0
            if work.delta_d > 1e-3:
                break  # no usable factorization left; fall through to best
            continue

        eta = 0.99995 if rel_g < 1e-4 else 0.9995
        ap = min(1.0, eta * _max_step(p, dx, q, -dx, work.fl, work.fu))
        ad = min(1.0, eta * _max_step(zl, dzl, zu, dzu, work.fl, work.fu))
        if ap < 1e-12 and ad < 1e-12:
            break  # no admissible step; fall through to best iterate

        x = x + ap * dx
        y = y + ad * dy
        zl = np.maximum(zl + ad * dzl, 0.0)
        zu = np.maximum(zu + ad * dzu, 0.0)
        zl[~work.fl] = 0.0
        zu[~work.fu] = 0.0
        # A shift raised to rescue one bad factorization should not keep
        # degrading every later step; relax it while iterations succeed.
        work.delta_d = max(1e-9, work.delta_d * 0.1)
        it += 1

    if best is not None and best[0] <= acc_pd and best[1] <= acc_pd and best[2] <= acc_g:
        return work.result(model, *best[3:], it, Status.OPTIMAL)
    raise IterLimit(
        f"interior point did not reach tol={opts.ipm_tol} in "
        f"{it} iterations (best residuals p={best[0]:.1e} d={best[1]:.1e} "
        f"gap={best[2]:.1e})"
    )


def _max_step(p, dp, q, dq, fl, fu) -> float:
    """Largest alpha keeping p + alpha dp > 0 on fl and q + alpha dq > 0 on fu."""
    alpha = 1e18
    neg = fl & (dp < 0)
    if neg.any():
        alpha = min(alpha, float(np.min(-p[neg] / dp[neg])))
    neg = fu & (dq < 0)
    if neg.any():
        alpha = min(alpha, float(np.min(-q[neg] / dq[neg])))
    return alpha


@dataclass
class _Block:
    rows: np.ndarray
    cols: np.ndarray
    a: sp.csr_matrix  # rows x block cols
    u: np.ndarray  # rows x n_shared, dense
    chol: np.ndarray | None = None
    lu: object | None = None  # sparse factorization for large blocks


# Above this many rows a block's normal matrix is factored sparsely;
# dense Cholesky is cubic and stops paying long before this point.
_DENSE_BLOCK_CAP = 600


class _Workspace:
    """Internal equality form plus the block-Schur normal-equation solver."""

    def __init__(self, model: LPModel):
        m, n = model.n_rows, model.n_cols
        a = sp.csr_matrix(model.a, dtype=float, copy=True)
        b = model.b.copy()
        flip = model.senses == GE
        if flip.any():
            scale = np.where(flip, -1.0, 1.0)
            a = sp.diags(scale) @ a
            b = b * scale
        self.flip = flip

        # Columns pinned by equal bounds would start on the barrier
        # boundary; substitute them into the rhs and restore on report.
        fixed = model.lo == model.hi
        self.fixed = fixed
        self.fixed_vals = model.lo[fixed]
        keep = np.flatnonzero(~fixed)
        if fixed.any():
            b = b - a[:, np.flatnonzero(fixed)] @ self.fixed_vals
            a = a[:, keep]
        remap = np.full(n, -1, dtype=int)
        remap[keep] = np.arange(keep.size)
        n_keep = keep.size

        is_eq = model.senses == EQ
        ineq_rows = np.flatnonzero(~is_eq)
        n_slack = ineq_rows.size
        slack = sp.csr_matrix(
            (np.ones(n_slack), (ineq_rows, np.arange(n_slack))), shape=(m, n_slack)
        )
        self.amat = sp.hstack([a, slack], format="csr")
        self.at = self.amat.T.tocsr()
        self.b = b
        self.c = np.concatenate([model.c[keep], np.zeros(n_slack)])
        self.l = np.concatenate([model.lo[keep], np.zeros(n_slack)])
        self.u = np.concatenate([model.hi[keep], np.full(n_slack, np.inf)])
        self.n_struct = n_keep
        self.n_tot = n_keep + n_slack
        self.m = m
        self.fl = np.isfinite(self.l)
        self.fu = np.isfinite(self.u)
        self.delta_p = 1e-9
        self.delta_d = 1e-9

        # Block layout: declared groups get their rows' slacks appended;
        # no declaration means one block containing everything.
        slack_of_row = np.full(m, -1, dtype=int)
        slack_of_row[ineq_rows] = n_keep + np.arange(n_slack)
        if model.blocks is not None:
            row_groups = [np.asarray(g, dtype=int) for g in model.blocks.row_groups]
            col_groups = [
                remap[np.asarray(g, dtype=int)] for g in model.blocks.col_groups
            ]
            col_groups = [g[g >= 0] for g in col_groups]
        else:
            row_groups = [np.arange(m)]
            col_groups = [np.arange(n_keep)]
        grouped = np.zeros(self.n_tot, dtype=bool)
        self.blocks: list[_Block] = []
        acsc = self.amat.tocsc()
        for rows, cols in zip(row_groups, col_groups):
            extra = slack_of_row[rows]
            cols_ext = np.concatenate([cols, extra[extra >= 0]])
            grouped[cols_ext] = True
            sub = acsc[:, cols_ext][rows, :].tocsr()
            self.blocks.append(_Block(rows=rows, cols=cols_ext, a=sub, u=None))
        self.shared = np.flatnonzero(~grouped)
        ushared = acsc[:, self.shared]
        for blk in self.blocks:
            blk.u = np.asarray(ushared[blk.rows, :].todense())
        sizes = {blk.rows.size for blk in self.blocks}
        self._uniform = len(sizes) == 1 and max(sizes) <= _DENSE_BLOCK_CAP
        self._schur = None
        self._us = None
        self._vs = None

    # -- starting point -------------------------------------------------
    def starting_point(self):
        l, u = self.l, self.u
        x = np.zeros(self.n_tot)
        two = self.fl & self.fu
        x[two] = 0.5 * (l[two] + u[two])
        only_l = self.fl & ~self.fu
        x[only_l] = l[only_l] + 1.0
        only_u = ~self.fl & self.fu
        x[only_u] = u[only_u] - 1.0
        zscale = 1.0 + float(np.max(np.abs(self.c), initial=0.0)) / 10.0
        zl = np.where(self.fl, zscale, 0.0)
        zu = np.where(self.fu, zscale, 0.0)
        y = np.zeros(self.m)
        return x, y, zl, zu

    # -- normal equations -------------------------------------------------
    def factor(self, theta: np.ndarray) -> None:
        mats = []
        for blk in self.blocks:
            th = theta[blk.cols]
            # Free columns (and bound-inactive ones late in the run) push
            # theta toward 1/delta_p; A @ diag(theta) @ A.T then mixes
            # entries ~theta_max apart and the eliminated primal step
            # theta * (A.T dy - rhat) loses every digit to rounding.  Such
            # blocks -- and all large ones, where dense Cholesky is cubic
            # anyway -- are factored in augmented quasi-definite form,
            # which stays at data scale (1/theta is bounded by the barrier
            # terms); eliminating its top block recovers exactly the
            # shifted normal solve.
            if blk.rows.size > _DENSE_BLOCK_CAP or float(th.max()) > 1e8:
                nb = blk.rows.size
                aug = sp.bmat(
                    [
                        [sp.diags(-1.0 / th), blk.a.T],
                        [blk.a, self.delta_d * sp.identity(nb)],
                    ],
                    format="csc",
                )
                blk.lu = spla.splu(aug)
                blk.chol = None
                mats.append(None)
            else:
                prod = blk.a.multiply(th[None, :]) @ blk.a.T
                dk = prod.toarray()
                dk[np.diag_indices_from(dk)] += self.delta_d
                blk.lu = None
                mats.append(dk)
        if self._uniform and len(mats) > 1 and all(dk is not None for dk in mats):
            chol = np.linalg.cholesky(np.stack(mats))
            for blk, lk in zip(self.blocks, chol):
                blk.chol = lk
        else:
            for blk, dk in zip(self.blocks, mats):
                if dk is not None:
                    blk.chol = np.linalg.cholesky(dk)

        n_s = self.shared.size
        if n_s:
            th_s = theta[self.shared]
            schur = np.diag(1.0 / th_s)
            us, vs = [], []
            for blk in self.blocks:
                uk, vk = self._block_solve(blk, theta, None, blk.u)
                schur += blk.u.T @ vk
                us.append(uk)
                vs.append(vk)
            self._schur = sla.cho_factor(schur, lower=True)
            self._us = us
            self._vs = vs
        else:
            self._schur = None
            self._us = None
            self._vs = None

    def _block_solve(self, blk: _Block, theta, top, bot):
        """One block of the augmented step: returns the (column, row) parts.

        Solves ``-diag(1/th) u + A.T v = top`` and ``A u + delta_d v = bot``
        over the block's own columns and rows (``top=None`` means zeros).
        Large blocks back-substitute through the LU of the quasi-definite
        matrix, which yields ``u`` directly and avoids the catastrophic
        ``theta * (A.T v - top)`` product when free columns push ``theta``
        to ``1/delta_p``; small dense blocks use the eliminated form where
        that product is harmless.
        """
        if blk.lu is not None:
            nc = blk.a.shape[1]
            if top is None:
                top = np.zeros((nc,) + bot.shape[1:])
            full = np.ascontiguousarray(np.concatenate([top, bot], axis=0))
            sol = blk.lu.solve(full)
            return sol[:nc], sol[nc:]
        th = theta[blk.cols]
        thm = th if bot.ndim == 1 else th[:, None]
        rhs = bot if top is None else bot + blk.a @ (thm * top)
        t = sla.solve_triangular(blk.chol, rhs, lower=True, check_finite=False)
        v = sla.solve_triangular(blk.chol.T, t, lower=False, check_finite=False)
        u = thm * (blk.a.T @ v) if top is None else thm * (blk.a.T @ v - top)
        return u, v

    def _aug_solve(self, theta, r_top, r_bot):
        """One preconditioned pass over all blocks plus the shared border.

        The shared columns enter every block's rows; eliminating the block
        unknowns leaves the same small Schur complement as the classic
        normal-equation update, whose solution *is* the shared columns'
        ``dx``.  Block corrections then reuse the basis solves from
        :meth:`factor`.
        """
        dx = np.empty(self.n_tot)
        dy = np.empty(self.m)
        if self._schur is not None:
            g = -r_top[self.shared]
            parts = []
            for blk in self.blocks:
                uk, vk = self._block_solve(blk, theta, r_top[blk.cols], r_bot[blk.rows])
                parts.append((uk, vk))
                g = g + blk.u.T @ vk
            w = sla.cho_solve(self._schur, g, check_finite=False)
            for blk, (uk, vk), ub, vb in zip(self.blocks, parts, self._us, self._vs):
                dy[blk.rows] = vk - vb @ w
                dx[blk.cols] = uk - ub @ w
            dx[self.shared] = w
        else:
            for blk in self.blocks:
                uk, vk = self._block_solve(blk, theta, r_top[blk.cols], r_bot[blk.rows])
                dy[blk.rows] = vk
                dx[blk.cols] = uk
        return dx, dy

    def solve_step(self, theta, rhat, rp):
        """Refined solve of the reduced step system.

        Target: ``A.T dy - diag(1/theta) dx = rhat`` and ``A dx = rp``.
        The factorizations carry the ``delta_d`` shift, but the residuals
        here are taken against the unshifted system, so refinement removes
        the regularization bias.  Both residuals are evaluated in their
        natural scales (no ``theta`` amplification), so the stopping and
        failure tests stay meaningful however extreme the barrier gets.
        Refinement is monotone (a worsening correction is rolled back); a
        relative residual beyond a few percent -- far outside what an
        inexact Newton step tolerates -- means the factorization failed,
        which the caller handles by raising the shift.
        """
        dcoef = 1.0 / theta
        sc_t = 1.0 + float(np.max(np.abs(rhat), initial=0.0))
        sc_b = 1.0 + float(np.max(np.abs(rp), initial=0.0))

        def residuals(dx, dy):
            r_top = rhat - (self.at @ dy - dcoef * dx)
            r_bot = rp - self.amat @ dx
            norm = max(
                float(np.max(np.abs(r_top), initial=0.0)) / sc_t,
                float(np.max(np.abs(r_bot), initial=0.0)) / sc_b,
            )
            return r_top, r_bot, norm

        dx, dy = self._aug_solve(theta, rhat, rp)
        r_top, r_bot, res = residuals(dx, dy)
        for _ in range(10):
            if res <= 1e-11:
                break
            ddx, ddy = self._aug_solve(theta, r_top, r_bot)
            cx, cy = dx + ddx, dy + ddy
            ct, cb, cres = residuals(cx, cy)
            if cres >= 0.5 * res:
                if cres < res:
                    dx, dy, r_top, r_bot, res = cx, cy, ct, cb, cres
                break
            dx, dy, r_top, r_bot, res = cx, cy, ct, cb, cres
        if not np.isfinite(res) or res > 1e-6:
            raise _FactorTrouble(f"step residual {res:.2e}")
        return dx, dy

    # -- Newton step ------------------------------------------------------
    def newton_step(self, theta, rp, rd, rcl, rcu, p, q, zl, zu):
        rhat = rd.copy()
        fl, fu = self.fl, self.fu
        rhat[fl] -= rcl[fl] / p[fl]
        rhat[fu] += rcu[fu] / q[fu]
        dx, dy = self.solve_step(theta, rhat, rp)
        dzl = np.zeros_like(zl)
        dzu = np.zeros_like(zu)
        dzl[fl] = (rcl[fl] - zl[fl] * dx[fl]) / p[fl]
        dzu[fu] = (rcu[fu] + zu[fu] * dx[fu]) / q[fu]
        return dx, dy, dzl, dzu

    # -- reporting ----------------------------------------------------------
    def result(self, model, x, y, zl, zu, iters, status):
        yo = y.copy()
        yo[self.flip] *= -1.0
        xs = np.empty(model.n_cols)
        z = np.empty(model.n_cols)
        keep = ~self.fixed
        xs[keep] = x[: self.n_struct]
        z[keep] = (zl - zu)[: self.n_struct]
        if self.fixed.any():
            xs[self.fixed] = self.fixed_vals
            afix = sp.csc_matrix(model.a)[:, np.flatnonzero(self.fixed)]
            z[self.fixed] = model.c[self.fixed] - afix.T @ yo
        obj = float(model.c @ xs)
        return LPResult(
            status=status,
            objective=obj,
            x=xs,
            y=yo,
            z=z,
            dual_objective=dual_objective_value(model, yo, z),
            iterations=iters,
            backend="interior",
        )
