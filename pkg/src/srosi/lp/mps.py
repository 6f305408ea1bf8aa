"""Plain-text export of a model in fixed-section MPS dialect.

The dialect is the classic one: NAME / ROWS / COLUMNS / RHS / BOUNDS /
ENDATA, free-format whitespace, minimization objective named ``COST``.
Row senses map to ``L``/``E``/``G`` records; bounds use ``LO``/``UP``/
``FR``/``FX``/``MI``/``PL``.  Only export is provided — the package never
reads MPS back — so round-tripping is a non-goal; the format exists to
eyeball models in external tools.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from srosi.lp.model import EQ, GE, LPModel


def export_mps(model: LPModel, name: str | None = None) -> str:
    rows = []
    rows.append(f"NAME          {name or model.name}")
    rows.append("ROWS")
    rows.append(" N  COST")
    sense_code = {EQ: "E", GE: "G"}
    for r, s in enumerate(model.senses):
        rows.append(f" {sense_code.get(s, 'L')}  R{r}")

    a = sp.csc_matrix(model.a)
    rows.append("COLUMNS")
    for j in range(model.n_cols):
        if model.c[j] != 0.0:
            rows.append(f"    X{j}  COST  {model.c[j]:.17g}")
        start, stop = a.indptr[j], a.indptr[j + 1]
        for r, v in zip(a.indices[start:stop], a.data[start:stop]):
            if v != 0.0:
                rows.append(f"    X{j}  R{r}  {v:.17g}")

    rows.append("RHS")
    for r, v in enumerate(model.b):
        if v != 0.0:
            rows.append(f"    RHS  R{r}  {v:.17g}")

    rows.append("BOUNDS")
    for j in range(model.n_cols):
        lo, hi = model.lo[j], model.hi[j]
        if lo == hi:
            rows.append(f" FX BND  X{j}  {lo:.17g}")
        elif np.isneginf(lo) and np.isposinf(hi):
            rows.append(f" FR BND  X{j}")
        else:
            if np.isneginf(lo):
                rows.append(f" MI BND  X{j}")
            elif lo != 0.0:
                rows.append(f" LO BND  X{j}  {lo:.17g}")
            if np.isposinf(hi):
                if lo != 0.0 or np.isneginf(lo):
                    rows.append(f" PL BND  X{j}")
            else:
                rows.append(f" UP BND  X{j}  {hi:.17g}")

    rows.append("ENDATA")
    return "\n".join(rows) + "\n"
