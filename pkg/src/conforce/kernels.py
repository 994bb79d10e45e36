"""Backend selection for the hot kernels.

The compiled extension is preferred when present; CONFORCE_PURE_PYTHON=1
forces the pure-Python path. Both backends produce bit-identical results
(same integer arithmetic); the test suite asserts agreement against the
reference evaluator.
"""

from __future__ import annotations

import os
from typing import Optional

import numpy as np

_impl = None
if os.environ.get("CONFORCE_PURE_PYTHON") != "1":
    try:  # pragma: no cover - depends on the build environment
        from . import _speedups as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = None

backend = "compiled" if _impl is not None else "python"


def triangle_violation(metric_rows, n: int) -> Optional[tuple[int, int, int]]:
    if _impl is not None:
        return _impl.triangle_violation(metric_rows, n)
    m = np.asarray(metric_rows, dtype=np.int64).reshape(n, n)
    for k in range(n):
        slack = m[:, k][:, None] + m[k, :][None, :] - m
        if (slack < 0).any():
            i, j = map(int, np.argwhere(slack < 0)[0])
            return (i, k, j)
    return None


def eval_sentence(phi, structure) -> Optional["object"]:
    """Fast exact evaluation of a sentence on a structure, or None when
    the formula is outside the compilable fragment. Returns a Dyadic."""
    from .program import compile_formula, eval_program_py
    from .values import Dyadic

    pred_names = [s.name for s in structure.sig.predicates]
    pred_ids = {name: i for i, name in enumerate(pred_names)}
    prog = compile_formula(phi, structure.grid_exp, pred_ids, structure.constants)
    if prog is None:
        return None
    n = structure.n
    metric_flat = [structure.metric[i][j] for i in range(n) for j in range(n)]
    import itertools

    tables = []
    for name in pred_names:
        sym = structure.sig.predicate(name)
        tbl = structure.predicates[name]
        flat = [tbl[args] for args in itertools.product(range(n), repeat=sym.arity)]
        tables.append(flat or [0])
    if _impl is not None:
        num = _impl.eval_program(prog, n, metric_flat, tables)
    else:
        num = eval_program_py(prog, n, metric_flat, tables)
    return Dyadic(int(num), structure.grid_exp + prog.lift)
