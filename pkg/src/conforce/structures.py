"""Finite [0,1]-valued structures on a dyadic grid.

A structure stores a metric table and predicate tables as integer
numerators over a common denominator 2^grid_exp, function tables as
element indices, and a partial interpretation of the witness constants.
The metric is bounded by 1 and separates points (distinct elements have
positive distance). In classical mode every predicate entry is 0 or 1
and the metric is discrete.

Evaluation of formulas is exact: values are Dyadic, quantifiers range
over the (finite) universe.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .values import Dyadic, Interval, ZERO, ONE, dmax, dmin
from .logic import (
    Atomic,
    Const,
    Dist,
    DotPlus,
    Formula,
    Func,
    FunctionSymbol,
    Half,
    Inf,
    Join,
    Meet,
    Neg,
    PredicateSymbol,
    Signature,
    Sup,
    Term,
    Var,
    constants_of,
    free_vars,
)


class UninterpretedConstantError(KeyError):
    pass


@dataclass(frozen=True)
class Violation:
    """First structure-validation failure found, with its location."""

    kind: str
    detail: str
    where: tuple = ()

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail} at {self.where}"


@dataclass(frozen=True)
class FiniteStructure:
    sig: Signature
    n: int
    grid_exp: int
    metric: tuple[tuple[int, ...], ...]  # numerators over 2^grid_exp
    predicates: Mapping[str, Mapping[tuple[int, ...], int]] = field(default_factory=dict)
    functions: Mapping[str, Mapping[tuple[int, ...], int]] = field(default_factory=dict)
    constants: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "predicates", dict(self.predicates))
        object.__setattr__(self, "functions", dict(self.functions))
        object.__setattr__(self, "constants", dict(self.constants))

    # -- value access --

    def metric_value(self, i: int, j: int) -> Dyadic:
        return Dyadic(self.metric[i][j], self.grid_exp)

    def pred_value(self, name: str, args: tuple[int, ...]) -> Dyadic:
        return Dyadic(self.predicates[name][args], self.grid_exp)

    def func_value(self, name: str, args: tuple[int, ...]) -> int:
        return self.functions[name][args]

    def constant(self, index: int) -> int:
        try:
            return self.constants[index]
        except KeyError:
            raise UninterpretedConstantError(f"c{index} is not interpreted") from None

    def named_elements(self) -> dict[int, int]:
        return dict(self.constants)

    @property
    def denominator(self) -> int:
        return 1 << self.grid_exp

    # -- derived --

    def refine(self, new_exp: int) -> "FiniteStructure":
        """Re-express every table on a finer grid (values unchanged)."""
        if new_exp < self.grid_exp:
            raise ValueError("refinement must not coarsen the grid")
        f = 1 << (new_exp - self.grid_exp)
        return FiniteStructure(
            sig=self.sig,
            n=self.n,
            grid_exp=new_exp,
            metric=tuple(tuple(v * f for v in row) for row in self.metric),
            predicates={
                p: {k: v * f for k, v in tbl.items()} for p, tbl in self.predicates.items()
            },
            functions={f_: dict(tbl) for f_, tbl in self.functions.items()},
            constants=dict(self.constants),
        )

    def expand_constants(self, plan: Mapping[int, int]) -> "FiniteStructure":
        """Interpret additional witness constants. Conflicting
        reinterpretation is an error; agreeing entries are fine."""
        merged = dict(self.constants)
        for c, e in plan.items():
            if not (0 <= e < self.n):
                raise ValueError(f"element {e} outside universe")
            if c in merged and merged[c] != e:
                raise ValueError(f"constant c{c} already interpreted differently")
            merged[c] = e
        out = FiniteStructure(
            self.sig, self.n, self.grid_exp, self.metric,
            self.predicates, self.functions, merged,
        )
        if getattr(self, "_validated", False):
            # tables unchanged and the plan was range-checked above
            object.__setattr__(out, "_validated", True)
        return out

    def canonical_at_scale(self) -> bool:
        """Every element named by some constant."""
        return set(self.constants.values()) == set(range(self.n))

    def is_classical_valued(self) -> bool:
        full = self.denominator
        for tbl in self.predicates.values():
            for v in tbl.values():
                if v not in (0, full):
                    return False
        for i in range(self.n):
            for j in range(self.n):
                if i != j and self.metric[i][j] != full:
                    return False
        return True


# ---------------------------------------------------------------------------
# validation


def _metric_arrays(a: FiniteStructure) -> np.ndarray:
    return np.array(a.metric, dtype=np.int64).reshape(a.n, a.n)


def validate_structure(a: FiniteStructure) -> Optional[Violation]:
    """None when all axioms hold, else the first violation found.

    Checks: table shapes and ranges, metric axioms (zero diagonal,
    positivity off the diagonal, symmetry, triangle), declared moduli of
    predicates and functions, classical-mode value restriction, constant
    interpretations in range.
    """
    if getattr(a, "_validated", False):
        return None
    n, full = a.n, a.denominator
    if n <= 0:
        return Violation("universe", "empty universe")
    if len(a.metric) != n or any(len(r) != n for r in a.metric):
        return Violation("shape", "metric table is not n by n")
    m = _metric_arrays(a)
    if (m < 0).any() or (m > full).any():
        i, j = map(int, np.argwhere((m < 0) | (m > full))[0])
        return Violation("range", f"metric entry {a.metric[i][j]} outside [0,1]", (i, j))
    if (np.diag(m) != 0).any():
        i = int(np.argwhere(np.diag(m) != 0)[0][0])
        return Violation("metric", "nonzero self-distance", (i, i))
    if (m != m.T).any():
        i, j = map(int, np.argwhere(m != m.T)[0])
        return Violation("metric", "asymmetric distance", (i, j))
    off = m + np.diag([full + 1] * n)
    if (off <= 0).any():
        i, j = map(int, np.argwhere(off <= 0)[0])
        return Violation("metric", "zero distance between distinct elements", (i, j))
    from . import kernels

    tri = kernels.triangle_violation(m, n)
    if tri is not None:
        i, k, j = tri
        return Violation("metric", "triangle inequality fails", (i, k, j))
    if a.sig.classical:
        offdiag = m + np.diag([full] * n)
        if (offdiag != full).any():
            i, j = map(int, np.argwhere(offdiag != full)[0])
            return Violation("classical", "metric not discrete", (i, j))

    for sym in a.sig.predicates:
        tbl = a.predicates.get(sym.name)
        if tbl is None:
            return Violation("shape", f"missing table for {sym.name}")
        keys = set(itertools.product(range(n), repeat=sym.arity))
        if set(tbl.keys()) != keys:
            return Violation("shape", f"table for {sym.name} has wrong domain")
        for k, v in tbl.items():
            if not (0 <= v <= full):
                return Violation("range", f"{sym.name}{k} = {v}/{full} outside [0,1]", k)
            if a.sig.classical and v not in (0, full):
                return Violation("classical", f"{sym.name}{k} not 0/1", k)
        # declared modulus: |P(u) - P(v)| <= L * max_i d(u_i, v_i).
        # With a discrete metric (classical mode) the bound is trivially
        # met for L >= 1, so skip the quartic loop there.
        if not a.sig.classical:
            for u in keys:
                for v in keys:
                    bound = sym.lipschitz * max(
                        (m[ui][vi] for ui, vi in zip(u, v)), default=0
                    )
                    if abs(tbl[u] - tbl[v]) > bound:
                        return Violation(
                            "modulus", f"{sym.name} moves faster than its modulus", (u, v)
                        )
    for sym in a.sig.functions:
        tbl = a.functions.get(sym.name)
        if tbl is None:
            return Violation("shape", f"missing table for {sym.name}")
        keys = set(itertools.product(range(n), repeat=sym.arity))
        if set(tbl.keys()) != keys:
            return Violation("shape", f"table for {sym.name} has wrong domain")
        for k, v in tbl.items():
            if not (0 <= v < n):
                return Violation("range", f"{sym.name}{k} maps outside the universe", k)
        if not a.sig.classical:
            for u in keys:
                for v in keys:
                    bound = sym.lipschitz * max(
                        (m[ui][vi] for ui, vi in zip(u, v)), default=0
                    )
                    if m[tbl[u]][tbl[v]] > bound:
                        return Violation(
                            "modulus", f"{sym.name} moves faster than its modulus", (u, v)
                        )
    for c, e in a.constants.items():
        if not (0 <= e < n):
            return Violation("range", f"c{c} interpreted outside the universe", (c,))
    object.__setattr__(a, "_validated", True)  # immutable, so cache the pass
    return None


# ---------------------------------------------------------------------------
# evaluation


def eval_term(t: Term, a: FiniteStructure, asg: Mapping[int, int]) -> int:
    if isinstance(t, Var):
        try:
            return asg[t.index]
        except KeyError:
            raise ValueError(f"unbound variable x{t.index}") from None
    if isinstance(t, Const):
        return a.constant(t.index)
    args = tuple(eval_term(u, a, asg) for u in t.args)
    return a.func_value(t.name, args)


def evaluate(
    phi: Formula, a: FiniteStructure, asg: Optional[Mapping[int, int]] = None
) -> Dyadic:
    asg = dict(asg or {})

    def go(f: Formula, env: dict[int, int]) -> Dyadic:
        if isinstance(f, Atomic):
            args = tuple(eval_term(t, a, env) for t in f.args)
            return a.pred_value(f.name, args)
        if isinstance(f, Dist):
            i = eval_term(f.left, a, env)
            j = eval_term(f.right, a, env)
            return a.metric_value(i, j)
        if isinstance(f, Neg):
            return go(f.sub, env).neg()
        if isinstance(f, Half):
            return go(f.sub, env).half()
        if isinstance(f, DotPlus):
            return go(f.left, env).dotplus(go(f.right, env))
        if isinstance(f, Sup):
            best = None
            for e in range(a.n):
                env2 = dict(env)
                env2[f.var] = e
                v = go(f.body, env2)
                if best is None or v > best:
                    best = v
            return best if best is not None else ZERO
        if isinstance(f, Inf):
            best = None
            for e in range(a.n):
                env2 = dict(env)
                env2[f.var] = e
                v = go(f.body, env2)
                if best is None or v < best:
                    best = v
            return best if best is not None else ONE
        if isinstance(f, Join):
            return dmin([go(x, env) for x in f.members])
        if isinstance(f, Meet):
            return dmax([go(x, env) for x in f.members])
        raise TypeError(f"not a formula: {f!r}")

    return go(phi, asg)


# ---------------------------------------------------------------------------
# substructures and embeddings


def generated_substructure(a: FiniteStructure, const_indices: Sequence[int]) -> FiniteStructure:
    """Substructure generated by the named constants: closure of their
    interpretations under the function symbols, tables restricted, only
    the generating constants kept (re-indexed universe)."""
    seed = []
    for c in const_indices:
        e = a.constant(c)
        if e not in seed:
            seed.append(e)
    closure = list(seed)
    changed = True
    while changed:
        changed = False
        for sym in a.sig.functions:
            for args in itertools.product(closure, repeat=sym.arity):
                out = a.func_value(sym.name, args)
                if out not in closure:
                    closure.append(out)
                    changed = True
    closure_sorted = sorted(closure)
    remap = {e: i for i, e in enumerate(closure_sorted)}
    k = len(closure_sorted)
    metric = tuple(
        tuple(a.metric[u][v] for v in closure_sorted) for u in closure_sorted
    )
    preds = {
        sym.name: {
            tuple(remap[x] for x in args): a.predicates[sym.name][args]
            for args in itertools.product(closure_sorted, repeat=sym.arity)
        }
        for sym in a.sig.predicates
    }
    funcs = {
        sym.name: {
            tuple(remap[x] for x in args): remap[a.func_value(sym.name, args)]
            for args in itertools.product(closure_sorted, repeat=sym.arity)
        }
        for sym in a.sig.functions
    }
    consts = {c: remap[a.constant(c)] for c in const_indices}
    return FiniteStructure(a.sig, k, a.grid_exp, metric, preds, funcs, consts)


def _common_exp_values(x: Dyadic, y: Dyadic) -> tuple[int, int, int]:
    e = max(x.exp, y.exp)
    return x.num << (e - x.exp), y.num << (e - y.exp), e


def check_embedding(
    a: FiniteStructure,
    b: FiniteStructure,
    theta: Mapping[int, int],
    eta: Dyadic,
) -> Optional[Violation]:
    """theta maps universe(a) -> universe(b). Checks every atomic value is
    preserved within eta, functions commute within eta (in b's metric),
    and shared constants land within eta of their b-interpretation."""
    if set(theta.keys()) != set(range(a.n)):
        return Violation("shape", "map does not cover the domain universe")
    for e in theta.values():
        if not (0 <= e < b.n):
            return Violation("range", "map leaves the codomain universe")
    for i in range(a.n):
        for j in range(a.n):
            da = a.metric_value(i, j)
            db = b.metric_value(theta[i], theta[j])
            if da.dotminus(db) > eta or db.dotminus(da) > eta:
                return Violation("metric", "distance distorted beyond eta", (i, j))
    for sym in a.sig.predicates:
        for args in itertools.product(range(a.n), repeat=sym.arity):
            va = a.pred_value(sym.name, args)
            vb = b.pred_value(sym.name, tuple(theta[x] for x in args))
            if va.dotminus(vb) > eta or vb.dotminus(va) > eta:
                return Violation("predicate", f"{sym.name} distorted beyond eta", args)
    for sym in a.sig.functions:
        for args in itertools.product(range(a.n), repeat=sym.arity):
            fa = theta[a.func_value(sym.name, args)]
            fb = b.func_value(sym.name, tuple(theta[x] for x in args))
            if b.metric_value(fa, fb) > eta:
                return Violation("function", f"{sym.name} does not commute within eta", args)
    for c, e in a.constants.items():
        if c in b.constants:
            if b.metric_value(theta[e], b.constants[c]) > eta:
                return Violation("constant", f"c{c} displaced beyond eta", (c,))
    return None


def check_ec_at(
    a: FiniteStructure,
    b: FiniteStructure,
    theta: Mapping[int, int],
    formulas: Sequence[Formula],
    eta: Dyadic,
) -> str:
    """Existential-closedness probe for the map theta at the given family
    of existential formulas: 'holds' when no formula's inf improves in b
    by more than eta below its value in a, 'fails' otherwise, 'unknown'
    for an empty family."""
    from .logic import classify, free_vars

    if not formulas:
        return "unknown"
    for phi in formulas:
        if not classify(phi).existential:
            raise ValueError("check_ec_at needs existential formulas")
        fv = sorted(free_vars(phi))
        for tup in itertools.product(range(a.n), repeat=len(fv)):
            env_a = dict(zip(fv, tup))
            va = evaluate(phi, a, env_a)
            env_b = {v: theta[e] for v, e in env_a.items()}
            vb = evaluate(phi, b, env_b)
            if va.dotminus(vb) > eta:
                return "fails"
    return "holds"


# ---------------------------------------------------------------------------
# JSON round trip


def structure_to_json(a: FiniteStructure) -> dict:
    def dy(numerator: int) -> str:
        return str(Dyadic(numerator, a.grid_exp))

    return {
        "universe": a.n,
        "grid_exp": a.grid_exp,
        "metric": [[dy(v) for v in row] for row in a.metric],
        "predicates": {
            name: {
                ",".join(map(str, k)): dy(v) for k, v in sorted(tbl.items())
            }
            for name, tbl in sorted(a.predicates.items())
        },
        "functions": {
            name: {",".join(map(str, k)): v for k, v in sorted(tbl.items())}
            for name, tbl in sorted(a.functions.items())
        },
        "constants": {str(c): e for c, e in sorted(a.constants.items())},
    }


def structure_from_json(doc: dict, sig: Signature) -> FiniteStructure:
    g = int(doc["grid_exp"])
    full = 1 << g

    def num(text: str) -> int:
        v = Dyadic.parse(text)
        if v.exp > g:
            raise ValueError(f"value {text} finer than the declared grid")
        return v.num << (g - v.exp)

    def key(text: str) -> tuple[int, ...]:
        return tuple(int(x) for x in text.split(",")) if text else ()

    n = int(doc["universe"])
    metric = tuple(tuple(num(v) for v in row) for row in doc["metric"])
    preds = {
        name: {key(k): num(v) for k, v in tbl.items()}
        for name, tbl in doc.get("predicates", {}).items()
    }
    funcs = {
        name: {key(k): int(v) for k, v in tbl.items()}
        for name, tbl in doc.get("functions", {}).items()
    }
    consts = {int(c): int(e) for c, e in doc.get("constants", {}).items()}
    return FiniteStructure(sig, n, g, metric, preds, funcs, consts)


def dump_structure(a: FiniteStructure) -> str:
    return json.dumps(structure_to_json(a), sort_keys=True, indent=1)


def load_structure(text: str, sig: Signature) -> FiniteStructure:
    return structure_from_json(json.loads(text), sig)


# ---------------------------------------------------------------------------
# bounded enumeration


def enumerate_structures(sig: Signature, max_n: int, grid_exp: int):
    """Every structure up to the given universe size and grid, with no
    named constants. Purely combinatorial; callers keep the bounds tiny."""
    if sig.functions:
        raise ValueError("enumeration over function symbols is not supported")
    full = 1 << grid_exp
    for n in range(1, max_n + 1):
        pair_slots = [(i, j) for i in range(n) for j in range(i + 1, n)]
        dists = [full] if sig.classical else list(range(1, full + 1))
        pred_slots = [
            (sym.name, args)
            for sym in sig.predicates
            for args in itertools.product(range(n), repeat=sym.arity)
        ]
        levels = [0, full] if sig.classical else list(range(full + 1))
        for dvals in itertools.product(dists, repeat=len(pair_slots)):
            metric = [[0] * n for _ in range(n)]
            for (i, j), v in zip(pair_slots, dvals):
                metric[i][j] = metric[j][i] = v
            cand_metric = tuple(tuple(row) for row in metric)
            for pvals in itertools.product(levels, repeat=len(pred_slots)):
                preds: dict[str, dict[tuple, int]] = {s.name: {} for s in sig.predicates}
                for (name, args), v in zip(pred_slots, pvals):
                    preds[name][args] = v
                cand = FiniteStructure(sig, n, grid_exp, cand_metric, preds, {}, {})
                if validate_structure(cand) is None:
                    yield cand


def seminorm_lower_bound(
    phi: Formula, sig: Signature, max_n: int = 2, grid_exp: int = 2
) -> Dyadic:
    """Largest value phi takes over the enumerated structures, closing
    free variables by sup and trying every constant placement. A lower
    bound on the true supremum over all models."""
    closed = phi
    for v in sorted(free_vars(phi), reverse=True):
        closed = Sup(v, closed)
    consts = sorted(constants_of(closed))
    best = ZERO
    for a in enumerate_structures(sig, max_n, grid_exp):
        for placement in itertools.product(range(a.n), repeat=len(consts)):
            b = a.expand_constants(dict(zip(consts, placement)))
            v = evaluate(closed, b)
            if v > best:
                best = v
    return best
