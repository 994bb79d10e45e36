# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: exact program evaluation and metric triangle
scanning. Mirrors program.eval_program_py and the numpy triangle check;
results are bit-identical by construction (same integer arithmetic)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64


cdef i64 _run(
    i64[::1] kind, i64[::1] aa, i64[::1] bb, i64[::1] cc,
    i64[::1] args_pool, i64[::1] child_pool,
    i64[::1] env, int n, i64 lift, i64 full,
    i64[::1] metric, i64[:, ::1] pred_flat, i64 i
) noexcept nogil:
    cdef i64 k = kind[i]
    cdef i64 start, arity, pid, idx, t, code, u, v, s, slot, saved, best, e
    if k == 0:
        start = aa[i]; arity = bb[i]; pid = cc[i]
        idx = 0
        for t in range(arity):
            code = args_pool[start + t]
            if code >= 0:
                idx = idx * n + code
            else:
                idx = idx * n + env[~code]
        return pred_flat[pid, idx] << lift
    if k == 1:
        start = aa[i]
        code = args_pool[start]
        u = code if code >= 0 else env[~code]
        code = args_pool[start + 1]
        v = code if code >= 0 else env[~code]
        return metric[u * n + v] << lift
    if k == 2:
        return full - _run(kind, aa, bb, cc, args_pool, child_pool, env, n, lift, full, metric, pred_flat, aa[i])
    if k == 3:
        return _run(kind, aa, bb, cc, args_pool, child_pool, env, n, lift, full, metric, pred_flat, aa[i]) >> 1
    if k == 4:
        s = _run(kind, aa, bb, cc, args_pool, child_pool, env, n, lift, full, metric, pred_flat, aa[i]) \
            + _run(kind, aa, bb, cc, args_pool, child_pool, env, n, lift, full, metric, pred_flat, bb[i])
        return s if s < full else full
    if k == 5 or k == 6:
        slot = bb[i]
        saved = env[slot]
        best = -1
        for e in range(n):
            env[slot] = e
            v = _run(kind, aa, bb, cc, args_pool, child_pool, env, n, lift, full, metric, pred_flat, aa[i])
            if best < 0:
                best = v
            elif k == 5:
                if v > best:
                    best = v
            else:
                if v < best:
                    best = v
        env[slot] = saved
        return best
    start = aa[i]; arity = bb[i]
    best = -1
    for t in range(arity):
        v = _run(kind, aa, bb, cc, args_pool, child_pool, env, n, lift, full, metric, pred_flat, child_pool[start + t])
        if best < 0:
            best = v
        elif k == 7:
            if v < best:
                best = v
        else:
            if v > best:
                best = v
    return best


def eval_program(object prog, int n, object metric_list, object pred_tables):
    """Evaluate a compiled Program; returns the lifted numerator."""
    cdef cnp.ndarray[i64, ndim=1] kind = np.asarray(prog.kind, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] aa = np.asarray(prog.a, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] bb = np.asarray(prog.b, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] cc = np.asarray(prog.c, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] args_pool = np.asarray(prog.args_pool or [0], dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] child_pool = np.asarray(prog.child_pool or [0], dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] metric = np.asarray(metric_list, dtype=np.int64)
    width = max((len(t) for t in pred_tables), default=1)
    cdef cnp.ndarray[i64, ndim=2] pred_flat = np.zeros((max(len(pred_tables), 1), max(width, 1)), dtype=np.int64)
    for i, tbl in enumerate(pred_tables):
        for j, v in enumerate(tbl):
            pred_flat[i, j] = v
    cdef cnp.ndarray[i64, ndim=1] env = np.zeros(8, dtype=np.int64)
    return int(_run(kind, aa, bb, cc, args_pool, child_pool, env, n,
                    prog.lift, prog.full, metric, pred_flat, prog.root))


def triangle_violation(object metric_rows, int n):
    """First (i, k, j) with d(i,j) > d(i,k) + d(k,j), or None."""
    cdef cnp.ndarray[i64, ndim=2] m = np.asarray(metric_rows, dtype=np.int64).reshape(n, n)
    cdef int i, j, k
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if m[i, j] > m[i, k] + m[k, j]:
                    return (i, k, j)
    return None
