"""Independent validation of primal/dual solution pairs.

The checks recompute everything from the model — nothing is trusted from
the backend beyond the candidate ``(x, y, z)`` triple — so the same
routine certifies vertex solutions from the simplex and interior points
from the barrier backend.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from srosi.lp.model import EQ, GE, LE, LPModel, LPResult, dual_objective_value


@dataclass
class CertificateReport:
    primal_residual: float
    bound_residual: float
    dual_residual: float
    dual_sign_violation: float
    complementarity: float
    duality_gap: float
    feas_tol: float
    gap_tol: float

    @property
    def ok(self) -> bool:
        return (
            self.primal_residual <= self.feas_tol
            and self.bound_residual <= self.feas_tol
            and self.dual_residual <= self.feas_tol
            and self.dual_sign_violation <= self.feas_tol
            and self.complementarity <= self.gap_tol
            and self.duality_gap <= self.gap_tol
        )


def check_certificate(
    model: LPModel,
    result: LPResult,
    feas_tol: float = 1e-7,
    gap_tol: float = 1e-6,
) -> CertificateReport:
    """Validate primal feasibility, dual feasibility and complementarity.

    Tolerances scale with the data: row residuals against
    ``feas_tol * (1 + max|b|)``, the duality gap against
    ``gap_tol * (1 + |objective|)``.  Raises ``ValueError`` when the result
    carries no solution.
    """
    if result.x is None or result.y is None:
        raise ValueError("result carries no primal/dual pair to certify")
    x, y = result.x, result.y
    z = result.z if result.z is not None else model.c - np.asarray(model.a.T @ y).ravel()

    bscale = 1.0 + (float(np.max(np.abs(model.b))) if model.n_rows else 0.0)
    ax = model.row_activity(x) if model.n_rows else np.zeros(0)
    res = ax - model.b
    le = model.senses == LE
    ge = model.senses == GE
    eq = model.senses == EQ
    primal = 0.0
    if model.n_rows:
        primal = max(
            float(np.max(res[le], initial=-np.inf)),
            float(np.max(-res[ge], initial=-np.inf)),
            float(np.max(np.abs(res[eq]), initial=-np.inf)),
            0.0,
        )

    below = np.where(np.isfinite(model.lo), model.lo - x, 0.0)
    above = np.where(np.isfinite(model.hi), x - model.hi, 0.0)
    bound = float(np.max(np.maximum(below, above), initial=0.0))

    # Dual feasibility: c - A'y = zl - zu with zl, zu >= 0 and zl (zu)
    # attached only to finite lower (upper) bounds.
    zres = model.c - np.asarray(model.a.T @ y).ravel() - z
    dual = float(np.max(np.abs(zres), initial=0.0))
    zl = np.maximum(z, 0.0)
    zu = np.maximum(-z, 0.0)
    no_lo = ~np.isfinite(model.lo)
    no_hi = ~np.isfinite(model.hi)
    dual = max(
        dual,
        float(np.max(zl[no_lo], initial=0.0)),
        float(np.max(zu[no_hi], initial=0.0)),
    )

    sign = 0.0
    if model.n_rows:
        sign = max(
            float(np.max(y[le], initial=0.0)),  # duals of <= rows must be <= 0
            float(np.max(-y[ge], initial=0.0)),
            0.0,
        )

    comp = 0.0
    if model.n_rows:
        comp = float(np.max(np.abs(y * res), initial=0.0))
    slack_lo = np.where(np.isfinite(model.lo), x - model.lo, 0.0)
    slack_hi = np.where(np.isfinite(model.hi), model.hi - x, 0.0)
    comp = max(
        comp,
        float(np.max(np.abs(zl * slack_lo), initial=0.0)),
        float(np.max(np.abs(zu * slack_hi), initial=0.0)),
    )

    obj = float(model.c @ x)
    gap = abs(obj - dual_objective_value(model, y, z))
    cscale = 1.0 + abs(obj)

    return CertificateReport(
        primal_residual=primal,
        bound_residual=bound,
        dual_residual=dual,
        dual_sign_violation=sign,
        complementarity=comp,
        duality_gap=gap,
        feas_tol=feas_tol * bscale,
        gap_tol=gap_tol * cscale,
    )
