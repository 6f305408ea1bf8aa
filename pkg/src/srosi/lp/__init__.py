"""Self-contained linear-programming backends.

Two solvers live behind one entry point.  :func:`solve_lp` dispatches on
``SolveOptions.method``:

``"simplex"``
    Bounded-variable two-phase revised simplex.  Deterministic pivoting,
    exact vertex solutions, clean duals.  The right tool for anything up
    to a couple of thousand rows.
``"interior"``
    Primal-dual interior point.  When the model declares a block-angular
    layout (:class:`BlockStructure`) the normal-equation solves run block
    by block with a small Schur complement on the linking columns, which
    is what makes the large decision-rule reformulations tractable here.
``"auto"``
    Simplex, unless the model declares blocks and is too large for the
    dense tableau to be sensible.

Both backends return the same :class:`LPResult` and both must pass
:func:`check_certificate`; an uncertified point is never returned (the
solvers raise :class:`srosi.errors.IterLimit` instead).
"""

from __future__ import annotations

from srosi.lp.certify import CertificateReport, check_certificate
from srosi.lp.interior import solve_interior
from srosi.lp.model import (
    EQ,
    GE,
    LE,
    BlockStructure,
    LPModel,
    LPResult,
    SolveOptions,
    Status,
    dual_objective_value,
)
from srosi.lp.mps import export_mps
from srosi.lp.simplex import solve_simplex

_AUTO_SIMPLEX_CAP = 600  # rows; beyond this a blocked model goes interior


def solve_lp(model: LPModel, opts: SolveOptions | None = None) -> LPResult:
    opts = opts or SolveOptions()
    method = opts.method
    if method == "auto":
        if model.blocks is not None and model.n_rows > _AUTO_SIMPLEX_CAP:
            method = "interior"
        else:
            method = "simplex"
    if method == "simplex":
        return solve_simplex(model, opts)
    if method == "interior":
        return solve_interior(model, opts)
    raise ValueError(f"unknown method {opts.method!r}")


__all__ = [
    "BlockStructure",
    "CertificateReport",
    "EQ",
    "GE",
    "LE",
    "LPModel",
    "LPResult",
    "SolveOptions",
    "Status",
    "check_certificate",
    "dual_objective_value",
    "export_mps",
    "solve_interior",
    "solve_lp",
    "solve_simplex",
]
