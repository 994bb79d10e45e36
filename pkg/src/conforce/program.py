"""Compile formulas to a flat node program for fast exact evaluation.

The program works on integer numerators lifted to a common denominator
2^(grid_exp + half_depth), so halving is an exact right shift. It covers
formulas whose atoms use only variables and interpreted constants (no
function terms) and at most 8 quantified variables; anything else makes
compile() return None and callers fall back to the reference evaluator.

Node encoding (parallel lists):
    kind: 0 pred atom, 1 dist atom, 2 neg, 3 half, 4 dotplus,
          5 sup, 6 inf, 7 join, 8 meet
    a, b: payloads
      atoms:    a = start into args_pool, b = arity (pred id packed in c)
      neg/half: a = child
      dotplus:  a = left child, b = right child
      sup/inf:  a = child, b = variable slot
      join/meet:a = start into child_pool, b = member count
args_pool entries: >= 0 fixed element index, < 0 variable slot ~s.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from .logic import (
    Atomic,
    Const,
    Dist,
    DotPlus,
    Formula,
    Half,
    Inf,
    Join,
    Meet,
    Neg,
    Sup,
    Var,
    half_depth,
)


@dataclass
class Program:
    kind: list[int]
    a: list[int]
    b: list[int]
    c: list[int]  # pred id for atom nodes
    child_pool: list[int]
    args_pool: list[int]
    root: int
    n_vars: int
    lift: int  # extra shift applied to raw table numerators
    full: int  # numerator of 1 at the lifted denominator


MAX_VARS = 8


def compile_formula(
    phi: Formula,
    grid_exp: int,
    pred_ids: Mapping[str, int],
    constants: Mapping[int, int],
) -> Optional[Program]:
    lift = half_depth(phi)
    prog = Program([], [], [], [], [], [], 0, 0, lift, 1 << (grid_exp + lift))
    var_slots: dict[int, int] = {}

    def term_code(t) -> Optional[int]:
        if isinstance(t, Const):
            e = constants.get(t.index)
            return None if e is None else e
        if isinstance(t, Var):
            s = var_slots.get(t.index)
            return None if s is None else ~s
        return None  # function terms are out of scope

    def emit(kind: int, a: int, b: int, c: int = 0) -> int:
        prog.kind.append(kind)
        prog.a.append(a)
        prog.b.append(b)
        prog.c.append(c)
        return len(prog.kind) - 1

    def go(f: Formula) -> Optional[int]:
        if isinstance(f, Atomic):
            pid = pred_ids.get(f.name)
            if pid is None:
                return None
            start = len(prog.args_pool)
            for t in f.args:
                code = term_code(t)
                if code is None:
                    return None
                prog.args_pool.append(code)
            return emit(0, start, len(f.args), pid)
        if isinstance(f, Dist):
            start = len(prog.args_pool)
            for t in (f.left, f.right):
                code = term_code(t)
                if code is None:
                    return None
                prog.args_pool.append(code)
            return emit(1, start, 2)
        if isinstance(f, Neg):
            child = go(f.sub)
            return None if child is None else emit(2, child, 0)
        if isinstance(f, Half):
            child = go(f.sub)
            return None if child is None else emit(3, child, 0)
        if isinstance(f, DotPlus):
            left = go(f.left)
            if left is None:
                return None
            right = go(f.right)
            return None if right is None else emit(4, left, right)
        if isinstance(f, (Sup, Inf)):
            if f.var in var_slots:
                shadow = var_slots[f.var]
            else:
                shadow = None
            slot = len(var_slots) if shadow is None else shadow
            if slot >= MAX_VARS:
                return None
            var_slots[f.var] = slot
            child = go(f.body)
            if shadow is None:
                del var_slots[f.var]
            else:
                var_slots[f.var] = shadow
            if child is None:
                return None
            return emit(5 if isinstance(f, Sup) else 6, child, slot)
        if isinstance(f, (Join, Meet)):
            children = []
            for m in f.members:
                ci = go(m)
                if ci is None:
                    return None
                children.append(ci)
            start = len(prog.child_pool)
            prog.child_pool.extend(children)
            return emit(7 if isinstance(f, Join) else 8, start, len(children))
        return None

    root = go(phi)
    if root is None:
        return None
    prog.root = root
    prog.n_vars = MAX_VARS
    return prog


def eval_program_py(
    prog: Program,
    n: int,
    metric: list[int],
    pred_tables: list[list[int]],
) -> int:
    """Reference (pure Python) program evaluator; mirrors the compiled
    kernel instruction for instruction. Tables hold raw numerators in
    row-major order; the result is a numerator over the lifted grid."""
    env = [0] * MAX_VARS
    kind, aa, bb, cc = prog.kind, prog.a, prog.b, prog.c
    args_pool, child_pool = prog.args_pool, prog.child_pool
    lift, full = prog.lift, prog.full

    def resolve(code: int) -> int:
        return code if code >= 0 else env[~code]

    def run(i: int) -> int:
        k = kind[i]
        if k == 0:
            start, arity, pid = aa[i], bb[i], cc[i]
            idx = 0
            for t in range(arity):
                idx = idx * n + resolve(args_pool[start + t])
            return pred_tables[pid][idx] << lift
        if k == 1:
            start = aa[i]
            u = resolve(args_pool[start])
            v = resolve(args_pool[start + 1])
            return metric[u * n + v] << lift
        if k == 2:
            return full - run(aa[i])
        if k == 3:
            return run(aa[i]) >> 1
        if k == 4:
            s = run(aa[i]) + run(bb[i])
            return s if s < full else full
        if k == 5 or k == 6:
            slot = bb[i]
            saved = env[slot]
            best = -1
            for e in range(n):
                env[slot] = e
                v = run(aa[i])
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
        start, count = aa[i], bb[i]
        best = -1
        for t in range(count):
            v = run(child_pool[start + t])
            if best < 0:
                best = v
            elif k == 7:
                if v < best:
                    best = v
            else:
                if v > best:
                    best = v
        return best

    return run(prog.root)
