"""Existential types at desk scale.

A type approximation records interval values of a fixed, canonically
ordered catalog of existential formulas at a tuple. Catalog depth 0 is
the tuple's atomic diagram; depth 1 adds inf quantifiers over single
atoms and pairwise meets touching one extra point. The catalog order is
depth-lexicographic and carries a version string, so two approximations
are compared entry-by-entry at the shared index, never by re-parsing.

Every catalog formula is 1-Lipschitz in each coordinate, so the
entrywise sup-difference of two approximations is a sound lower bound
on any realization distance; a bounded joint realization search
produces the matching upper bound. Probes for isolation and maximality
quantify over "searched types": the maximal types found in theory
models up to the search bound.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .values import Dyadic, Interval, ZERO, ONE, dmax
from .logic import (
    Atomic,
    Const,
    Dist,
    Formula,
    Inf,
    Meet,
    Signature,
    Var,
    dotminus_f,
    scalar_f,
    substitute,
)
from .oracle import SearchBounds, Theory
from .structures import FiniteStructure, enumerate_structures, evaluate
from .syntax import canonical_key, formula_key, print_formula

CATALOG_VERSION = "et2"


def _depth0_atoms(sig: Signature, arity: int) -> list[Formula]:
    xs = [Var(i) for i in range(arity)]
    out: list[Formula] = []
    for i in range(arity):
        for j in range(i + 1, arity):
            out.append(Dist(xs[i], xs[j]))
    for sym in sig.predicates:
        for args in itertools.product(xs, repeat=sym.arity):
            out.append(Atomic(sym.name, args))
    return out


def _depth1_atoms(sig: Signature, arity: int) -> list[Formula]:
    """Atoms over {x0..x_arity} that mention the bound variable x_arity."""
    xs = [Var(i) for i in range(arity + 1)]
    fresh = xs[arity]
    out: list[Formula] = [Dist(xs[i], fresh) for i in range(arity)]
    for sym in sig.predicates:
        for args in itertools.product(xs, repeat=sym.arity):
            if fresh in args:
                out.append(Atomic(sym.name, args))
    return out


def catalog(sig: Signature, arity: int = 1, depth: int = 1) -> list[Formula]:
    """The canonical existential-formula catalog for `arity` free
    variables, depth-lexicographic order."""
    if sig.functions:
        raise ValueError("type catalogs cover relational signatures only")
    if arity < 1:
        raise ValueError("catalog arity must be at least 1")
    if depth not in (0, 1):
        raise ValueError("catalog depth must be 0 or 1")
    out = list(_depth0_atoms(sig, arity))
    if depth >= 1:
        singles = _depth1_atoms(sig, arity)
        for a in singles:
            out.append(Inf(arity, a))
        for a, b in itertools.combinations(singles, 2):
            out.append(Inf(arity, Meet((a, b))))
    return out


@dataclass(frozen=True)
class ETypeApprox:
    """Interval values of the catalog at one tuple, in catalog order."""

    version: str
    arity: int
    depth: int
    entries: tuple[tuple[str, Interval], ...]
    provenance: str = "structure"

    def __post_init__(self) -> None:
        for _, iv in self.entries:
            if not (ZERO <= iv.lo <= iv.hi <= ONE):
                raise ValueError("type entry outside [0,1]")

    def value(self, index: int) -> Interval:
        return self.entries[index][1]

    def point(self, index: int) -> Dyadic:
        iv = self.entries[index][1]
        return iv.lo

    def is_point(self) -> bool:
        return all(iv.lo == iv.hi for _, iv in self.entries)

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "arity": self.arity,
            "depth": self.depth,
            "provenance": self.provenance,
            "entries": [
                {"formula": k, "lo": str(iv.lo), "hi": str(iv.hi)}
                for k, iv in self.entries
            ],
        }


def _check_comparable(t1: ETypeApprox, t2: ETypeApprox) -> None:
    if t1.version != t2.version:
        raise ValueError("catalog versions differ")
    if t1.arity != t2.arity or t1.depth != t2.depth:
        raise ValueError("type approximations have different shapes")


def separation(t1: ETypeApprox, t2: ETypeApprox) -> Dyadic:
    """Entrywise certain gap: a sound lower bound on the distance of any
    pair of realizations."""
    _check_comparable(t1, t2)
    best = ZERO
    for (_, a), (_, b) in zip(t1.entries, t2.entries):
        gap = dmax((a.lo.dotminus(b.hi), b.lo.dotminus(a.hi)))
        if gap > best:
            best = gap
    return best


def _instantiate(phi: Formula, plan: Sequence[int], base: int) -> Formula:
    """Substitute x_i -> scratch constant base+i for the tuple slots."""
    return substitute(phi, {i: Const(base + i) for i in range(len(plan))})


def etype_of(
    source: Union[FiniteStructure, "object"],
    tup: Sequence[int],
    depth: int = 1,
) -> ETypeApprox:
    """Catalog values at a tuple.

    On a FiniteStructure the tuple lists element indices and every entry
    is a point interval. On a CompiledApprox the tuple lists constant
    indices; atomic entries reuse the compiled bound intervals when the
    instantiated atom is tracked, everything else is read off the
    witness.
    """
    compiled = hasattr(source, "witness") and hasattr(source, "interval_for")
    if compiled:
        a: FiniteStructure = source.witness
        elems = []
        for c in tup:
            if c not in a.constants:
                raise ValueError(f"missing constant interpretation c{c}")
            elems.append(a.constants[c])
    else:
        a = source
        elems = list(tup)
        for e in elems:
            if not (0 <= e < a.n):
                raise ValueError("element out of range")
    arity = len(elems)
    if arity < 1:
        raise ValueError("empty tuple")
    base = (max(a.constants) + 1) if a.constants else 0
    b = a.expand_constants({base + i: e for i, e in enumerate(elems)})
    entries: list[tuple[str, Interval]] = []
    for phi in catalog(a.sig, arity, depth):
        key = formula_key(phi)
        sent = _instantiate(phi, elems, base)
        iv: Optional[Interval] = None
        if compiled:
            named = substitute(phi, {i: Const(int(c)) for i, c in enumerate(tup)})
            iv = source.get(canonical_key(named))
        if iv is None:
            v = evaluate(sent, b)
            iv = Interval(v, v)
        entries.append((key, iv))
    provenance = "compiled" if compiled else "structure"
    return ETypeApprox(CATALOG_VERSION, arity, depth, tuple(entries), provenance)


# ---------------------------------------------------------------------------
# the type metric


@dataclass(frozen=True)
class TypeDistance:
    interval: Interval

    def to_json(self) -> dict:
        return {"lo": str(self.interval.lo), "hi": str(self.interval.hi)}


def models_theory(a: FiniteStructure, theory: Theory, tol: Dyadic = ZERO) -> bool:
    return all(evaluate(ax, a) <= tol for ax in theory.axioms)


def _tuples(n: int, arity: int):
    return itertools.product(range(n), repeat=arity)


def _tuple_distance(a: FiniteStructure, s: Sequence[int], t: Sequence[int]) -> Dyadic:
    return dmax([a.metric_value(x, y) for x, y in zip(s, t)] or [ZERO])


def _matches(cand: ETypeApprox, target: ETypeApprox, tol: Dyadic) -> bool:
    return separation(cand, target) <= tol


def etype_distance(
    theory: Theory,
    t1: ETypeApprox,
    t2: ETypeApprox,
    bounds: Optional[SearchBounds] = None,
    tol: Dyadic = ZERO,
) -> TypeDistance:
    """Bracket the type distance: lower bound from separation, upper
    bound from the best bounded joint realization (1 when none shows up
    at these bounds)."""
    _check_comparable(t1, t2)
    b = bounds or SearchBounds()
    lower = separation(t1, t2)
    upper = ONE
    found = False
    arity = t1.arity
    for a in enumerate_structures(theory.sig, b.max_universe, b.grid_exp):
        if not models_theory(a, theory):
            continue
        typed: dict[tuple[int, ...], ETypeApprox] = {}

        def typ(tp: tuple[int, ...]) -> ETypeApprox:
            if tp not in typed:
                typed[tp] = etype_of(a, tp, t1.depth)
            return typed[tp]

        for s in _tuples(a.n, arity):
            if not _matches(typ(s), t1, tol):
                continue
            for t in _tuples(a.n, arity):
                if not _matches(typ(t), t2, tol):
                    continue
                found = True
                val = _tuple_distance(a, s, t)
                if val < upper:
                    upper = val
        if upper == lower:
            break
    if upper < lower:
        upper = lower
    # classical enumeration at the bound is exhaustive, so the best joint
    # realization certifies the distance exactly
    if found and theory.sig.classical and upper > lower:
        lower = upper
    return TypeDistance(Interval(lower, upper))


# ---------------------------------------------------------------------------
# searched type families


def searched_types(
    theory: Theory,
    arity: int,
    depth: int,
    bounds: Optional[SearchBounds] = None,
) -> list[ETypeApprox]:
    """All distinct tuple types found in theory models up to the bound,
    in first-found canonical order."""
    b = bounds or SearchBounds()
    seen: dict[tuple, ETypeApprox] = {}
    for a in enumerate_structures(theory.sig, b.max_universe, b.grid_exp):
        if not models_theory(a, theory):
            continue
        for tp in _tuples(a.n, arity):
            t = etype_of(a, tp, depth)
            key = tuple((k, str(iv.lo), str(iv.hi)) for k, iv in t.entries)
            seen.setdefault(key, t)
    return list(seen.values())


def _dominates(small: ETypeApprox, big: ETypeApprox) -> bool:
    """Pointwise at-most with one strict drop: `small` extends `big` by
    realizing more of the zero-sets."""
    le = all(a.hi <= b.lo for (_, a), (_, b) in zip(small.entries, big.entries))
    if not le:
        return False
    return any(a.hi < b.lo for (_, a), (_, b) in zip(small.entries, big.entries))


def maximal_types(types: Sequence[ETypeApprox]) -> list[ETypeApprox]:
    return [t for t in types if not any(_dominates(o, t) for o in types)]


# ---------------------------------------------------------------------------
# probes


@dataclass(frozen=True)
class ProbeResult:
    kind: str  # isolated | not_isolated_at_bound | maximal_at_bound | extended_by | unknown
    eps: Optional[Dyadic] = None
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        doc = {"kind": self.kind, "detail": self.detail}
        if self.eps is not None:
            doc["eps"] = str(self.eps)
        return doc


def deviation_formula(t: ETypeApprox, sig: Signature, indices: Sequence[int]) -> Formula:
    """One-sided deviations e_i -. value_i joined conjunctively over the
    chosen entries: an existential formula, so its bounds can be played as
    game moves after instantiating the quantified variables. Small values
    pick out types lying entrywise below t + eta, which over a space of
    maximal types is a genuine neighborhood of t."""
    cat = catalog(sig, t.arity, t.depth)
    anchor = Var(0)
    devs = [dotminus_f(cat[i], scalar_f(t.entries[i][1].lo, anchor)) for i in indices]
    return devs[0] if len(devs) == 1 else Meet(tuple(devs))


def _ball_membership(rho: ETypeApprox, pi: ETypeApprox, indices: Sequence[int]) -> Dyadic:
    """Value of the deviation formula at rho (entrywise, by shared index)."""
    best = ZERO
    for i in indices:
        gap = rho.entries[i][1].lo.dotminus(pi.entries[i][1].lo)
        if gap > best:
            best = gap
    return best


def is_isolated_probe(
    theory: Theory,
    t: ETypeApprox,
    eps: Dyadic,
    bounds: Optional[SearchBounds] = None,
) -> ProbeResult:
    """Three-valued isolation probe over the searched maximal types.

    isolated: some basic neighborhood [theta < eta] around t contains
    only searched types within eps of t (certificate carries theta and
    eta). not_isolated_at_bound: every candidate neighborhood contains
    two searched types separated by at least eps. Otherwise unknown.
    """
    b = bounds or SearchBounds()
    if eps >= ONE:
        idx = tuple(range(len(t.entries)))
        theta = deviation_formula(t, theory.sig, idx)
        return ProbeResult(
            "isolated",
            eps,
            {
                "theta": print_formula(theta),
                "eta": str(ONE),
                "indices": list(idx),
                "values": [str(t.entries[i][1].lo) for i in idx],
                "trivial": True,
            },
        )
    space = maximal_types(searched_types(theory, t.arity, t.depth, b))
    if not space:
        return ProbeResult("unknown", eps, {"reason": "no searched types at bound"})
    all_idx = range(len(t.entries))
    candidates: list[tuple[tuple[int, ...], Dyadic]] = []
    etas = [Dyadic(1, j) for j in range(1, max(b.grid_exp, 1) + 1)]
    for idx in [tuple(all_idx)] + [(i,) for i in all_idx]:
        for eta in etas:
            candidates.append((idx, eta))

    dist_memo: dict[tuple[int, int], Interval] = {}

    def dist(i: int, j: int, r1: ETypeApprox, r2: ETypeApprox) -> Interval:
        key = (min(i, j), max(i, j))
        if key not in dist_memo:
            dist_memo[key] = etype_distance(theory, r1, r2, b).interval
        return dist_memo[key]

    witness_pair = None
    for idx, eta in candidates:
        ball = [
            (k, rho)
            for k, rho in enumerate(space)
            if _ball_membership(rho, t, idx) < eta
        ]
        good = all(dist(k, -1, rho, t).hi <= eps for k, rho in ball)
        if good:
            theta = deviation_formula(t, theory.sig, idx)
            return ProbeResult(
                "isolated",
                eps,
                {
                    "theta": print_formula(theta),
                    "eta": str(eta),
                    "indices": list(idx),
                    "values": [str(t.entries[i][1].lo) for i in idx],
                    "searched": len(space),
                    "ball": len(ball),
                },
            )
        # a certified-far pair inside this failing ball supports the
        # negative verdict; remember the first one
        if witness_pair is None:
            for (k1, r1), (k2, r2) in itertools.combinations(ball, 2):
                if dist(k1, k2, r1, r2).lo >= eps:
                    witness_pair = (r1, r2)
                    break
    if witness_pair is None:
        return ProbeResult("unknown", eps, {"reason": "no certificate at bound"})
    # every candidate failed; confirm each ball really holds a far pair
    for idx, eta in candidates:
        ball = [
            (k, rho)
            for k, rho in enumerate(space)
            if _ball_membership(rho, t, idx) < eta
        ]
        far = any(
            dist(k1, k2, r1, r2).lo >= eps
            for (k1, r1), (k2, r2) in itertools.combinations(ball, 2)
        )
        if not far:
            return ProbeResult("unknown", eps, {"reason": "no certificate at bound"})
    r1, r2 = witness_pair
    return ProbeResult(
        "not_isolated_at_bound",
        eps,
        {"pair": [r1.to_json(), r2.to_json()], "searched": len(space)},
    )


def maximality_probe(
    theory: Theory,
    t: ETypeApprox,
    bounds: Optional[SearchBounds] = None,
) -> ProbeResult:
    """Search bounded realizations for a type extending t (pointwise
    smaller values: more zero-set membership)."""
    b = bounds or SearchBounds()
    if b.max_universe <= 0:
        return ProbeResult("unknown", None, {"reason": "zero budget"})
    for rho in searched_types(theory, t.arity, t.depth, b):
        if _dominates(rho, t):
            return ProbeResult("extended_by", None, {"witness": rho.to_json()})
    return ProbeResult("maximal_at_bound", None, {"universe": b.max_universe})
