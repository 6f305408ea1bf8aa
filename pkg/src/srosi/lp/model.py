"""Problem and result containers for the linear-programming backends.

A model is the finite-dimensional program::

    minimize    c @ x
    subject to  A[r] @ x  (<=|==|>=)  b[r]      for every row r
                lo <= x <= hi                   (entries may be +-inf)

Rows are stated with explicit senses instead of pre-negated right-hand
sides so that duals keep their natural signs: ``y[r] <= 0`` for ``<=``
rows, ``y[r] >= 0`` for ``>=`` rows, free for equalities.  The dual
objective used throughout is::

    b @ y + sum(lo[j] * zl[j] over finite lo) - sum(hi[j] * zu[j] over finite hi)

with ``c - A.T @ y = zl - zu`` and ``zl, zu >= 0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from srosi.errors import InvalidParameter

MatrixLike = Union[np.ndarray, sp.spmatrix]

LE, EQ, GE = "<=", "==", ">="
_SENSES = (LE, EQ, GE)


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


@dataclass
class BlockStructure:
    """Declares a block-angular layout of a model.

    ``row_groups[k]`` / ``col_groups[k]`` index the rows and columns of the
    k-th independent block.  Row groups must partition all rows; column
    groups must be disjoint, and a block's columns may appear only in its
    own rows.  Columns in no group are *linking* columns shared by all
    blocks.  The interior-point backend exploits this layout; the simplex
    backend ignores it.
    """

    row_groups: Sequence[np.ndarray]
    col_groups: Sequence[np.ndarray]

    def validate(self, a: MatrixLike) -> None:
        m, n = a.shape
        rows_seen = np.zeros(m, dtype=bool)
        for grp in self.row_groups:
            if rows_seen[grp].any():
                raise InvalidParameter("block row groups overlap")
            rows_seen[grp] = True
        if not rows_seen.all():
            raise InvalidParameter("block row groups must cover every row")
        cols_seen = np.zeros(n, dtype=bool)
        for grp in self.col_groups:
            if cols_seen[grp].any():
                raise InvalidParameter("block column groups overlap")
            cols_seen[grp] = True
        # Every block column may only touch its own block's rows.
        csc = sp.csc_matrix(a)
        for rows, cols in zip(self.row_groups, self.col_groups):
            inside = np.zeros(m, dtype=bool)
            inside[rows] = True
            for j in cols:
                touched = csc.indices[csc.indptr[j] : csc.indptr[j + 1]]
                if not inside[touched].all():
                    raise InvalidParameter(
                        f"column {int(j)} declared in a block but used outside it"
                    )

    @property
    def n_blocks(self) -> int:
        return len(self.row_groups)


@dataclass
class LPModel:
    """Dense or sparse LP in row-sense form. See module docstring."""

    c: np.ndarray
    a: MatrixLike
    senses: np.ndarray  # array of "<=", "==", ">=" strings
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    blocks: Optional[BlockStructure] = None
    name: str = "lp"

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.senses = np.asarray(self.senses, dtype=object).ravel()
        self.lo = np.asarray(self.lo, dtype=float).ravel()
        self.hi = np.asarray(self.hi, dtype=float).ravel()
        if not sp.issparse(self.a):
            self.a = np.asarray(self.a, dtype=float)
            if self.a.ndim != 2:
                raise InvalidParameter("constraint matrix must be 2-d")
        m, n = self.a.shape
        if self.c.shape != (n,):
            raise InvalidParameter(f"c has length {self.c.size}, expected {n}")
        if self.b.shape != (m,) or self.senses.shape != (m,):
            raise InvalidParameter("b/senses length must match row count")
        if self.lo.shape != (n,) or self.hi.shape != (n,):
            raise InvalidParameter("bounds length must match column count")
        bad = [s for s in self.senses if s not in _SENSES]
        if bad:
            raise InvalidParameter(f"unknown row sense {bad[0]!r}")
        if np.any(self.lo > self.hi):
            j = int(np.argmax(self.lo > self.hi))
            raise InvalidParameter(f"empty bound interval on column {j}")
        if not (np.isfinite(self.c).all() and np.isfinite(self.b).all()):
            raise InvalidParameter("c and b must be finite")
        if self.blocks is not None:
            self.blocks.validate(self.a)

    @property
    def n_rows(self) -> int:
        return self.a.shape[0]

    @property
    def n_cols(self) -> int:
        return self.a.shape[1]

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        ax = self.a @ x
        return np.asarray(ax).ravel()


@dataclass
class LPResult:
    """Solution report; ``x``/``y``/``z`` are None unless status is OPTIMAL.

    ``y`` are row duals under the sign convention of the module docstring
    and ``z = zl - zu`` are the bound duals (reduced costs at a vertex).
    ``ray`` is an unbounded improving direction, ``farkas`` a row
    aggregation proving infeasibility, when the respective status applies
    and the backend produced one.
    """

    status: Status
    objective: Optional[float] = None
    x: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    dual_objective: Optional[float] = None
    iterations: int = 0
    backend: str = ""
    basis: Optional[np.ndarray] = None
    ray: Optional[np.ndarray] = None
    farkas: Optional[np.ndarray] = None

    @property
    def gap(self) -> float:
        if self.objective is None or self.dual_objective is None:
            return float("nan")
        return abs(self.objective - self.dual_objective)


@dataclass
class SolveOptions:
    """Knobs shared by both backends.

    ``method`` picks the backend: ``"simplex"``, ``"interior"``, or
    ``"auto"`` (simplex unless the model declares blocks and is large).
    """

    feas_tol: float = 1e-7
    opt_tol: float = 1e-9
    pivot_tol: float = 1e-9
    max_iters: Optional[int] = None
    method: str = "auto"
    stall_limit: int = 120
    refactor_every: int = 120
    ipm_tol: float = 1e-9
    ipm_max_iters: int = 120
    dense_cap: int = 40_000_000  # max m*n the simplex backend will densify

    def resolved_max_iters(self, m: int, n: int) -> int:
        if self.max_iters is not None:
            return self.max_iters
        return 200 * (m + n) + 20_000


def dual_objective_value(model: LPModel, y: np.ndarray, z: np.ndarray) -> float:
    """Bound-aware dual objective ``b@y + lo@zl - hi@zu`` (finite parts)."""
    zl = np.maximum(z, 0.0)
    zu = np.maximum(-z, 0.0)
    val = float(model.b @ y)
    fin_lo = np.isfinite(model.lo)
    fin_hi = np.isfinite(model.hi)
    val += float(model.lo[fin_lo] @ zl[fin_lo])
    val -= float(model.hi[fin_hi] @ zu[fin_hi])
    return val
