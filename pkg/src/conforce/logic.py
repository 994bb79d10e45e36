"""Restricted [0,1]-valued formulas.

Connectives are negation (1-x), halving, and truncated addition, plus the
two quantifiers (sup/inf over the structure) and finite join/meet families.
Atoms are predicate applications and the metric d. Terms are variables xN,
witness constants cN, and applications of signature function symbols.

Value convention: 0 means "holds". In classical mode all atoms take values
in {0,1} and d is the discrete metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Sequence, Union

from .values import Dyadic, ZERO, ONE, dmax, dmin


# ---------------------------------------------------------------------------
# signatures


RESERVED_WORDS = {"d", "sup", "inf", "join", "meet", "half"}


@dataclass(frozen=True)
class PredicateSymbol:
    name: str
    arity: int
    lipschitz: int = 1  # modulus slope w.r.t. the max metric on tuples


@dataclass(frozen=True)
class FunctionSymbol:
    name: str
    arity: int
    lipschitz: int = 1


def _check_symbol_name(name: str) -> None:
    if not name or not (name[0].isalpha() or name[0] == "_"):
        raise ValueError(f"bad symbol name {name!r}")
    if not all(ch.isalnum() or ch == "_" for ch in name):
        raise ValueError(f"bad symbol name {name!r}")
    if name in RESERVED_WORDS:
        raise ValueError(f"symbol name {name!r} is reserved")
    # cN / xN shapes belong to witness constants and variables
    if name[0] in "cx" and name[1:].isdigit():
        raise ValueError(f"symbol name {name!r} collides with term syntax")


@dataclass(frozen=True)
class Signature:
    """Predicate and function symbols, plus the logic mode.

    classical=True restricts atom values to {0,1} and makes d discrete.
    """

    predicates: tuple[PredicateSymbol, ...] = ()
    functions: tuple[FunctionSymbol, ...] = ()
    classical: bool = False

    def __post_init__(self) -> None:
        seen = set()
        for sym in self.predicates + self.functions:
            _check_symbol_name(sym.name)
            if sym.name in seen:
                raise ValueError(f"duplicate symbol {sym.name!r}")
            seen.add(sym.name)

    def predicate(self, name: str) -> PredicateSymbol:
        for p in self.predicates:
            if p.name == name:
                return p
        raise KeyError(name)

    def function(self, name: str) -> FunctionSymbol:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def has_predicate(self, name: str) -> bool:
        return any(p.name == name for p in self.predicates)

    def has_function(self, name: str) -> bool:
        return any(f.name == name for f in self.functions)

    @property
    def relational(self) -> bool:
        return not self.functions


# ---------------------------------------------------------------------------
# terms


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Const:
    """Witness constant cN (the shared countable supply)."""

    index: int


@dataclass(frozen=True)
class Func:
    name: str
    args: tuple["Term", ...]


Term = Union[Var, Const, Func]


# ---------------------------------------------------------------------------
# formulas


@dataclass(frozen=True)
class Atomic:
    name: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class Dist:
    left: Term
    right: Term


@dataclass(frozen=True)
class Neg:
    sub: "Formula"


@dataclass(frozen=True)
class Half:
    sub: "Formula"


@dataclass(frozen=True)
class DotPlus:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Sup:
    var: int
    body: "Formula"


@dataclass(frozen=True)
class Inf:
    var: int
    body: "Formula"


@dataclass(frozen=True)
class Join:
    members: tuple["Formula", ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("empty join family")


@dataclass(frozen=True)
class Meet:
    members: tuple["Formula", ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("empty meet family")


Formula = Union[Atomic, Dist, Neg, Half, DotPlus, Sup, Inf, Join, Meet]


# ---------------------------------------------------------------------------
# traversals


def term_vars(t: Term) -> set[int]:
    if isinstance(t, Var):
        return {t.index}
    if isinstance(t, Const):
        return set()
    out: set[int] = set()
    for a in t.args:
        out |= term_vars(a)
    return out


def term_consts(t: Term) -> set[int]:
    if isinstance(t, Const):
        return {t.index}
    if isinstance(t, Var):
        return set()
    out: set[int] = set()
    for a in t.args:
        out |= term_consts(a)
    return out


def subformulas(phi: Formula) -> Iterator[Formula]:
    yield phi
    if isinstance(phi, (Neg, Half)):
        yield from subformulas(phi.sub)
    elif isinstance(phi, DotPlus):
        yield from subformulas(phi.left)
        yield from subformulas(phi.right)
    elif isinstance(phi, (Sup, Inf)):
        yield from subformulas(phi.body)
    elif isinstance(phi, (Join, Meet)):
        for m in phi.members:
            yield from subformulas(m)


def free_vars(phi: Formula) -> set[int]:
    if isinstance(phi, Atomic):
        out: set[int] = set()
        for t in phi.args:
            out |= term_vars(t)
        return out
    if isinstance(phi, Dist):
        return term_vars(phi.left) | term_vars(phi.right)
    if isinstance(phi, (Neg, Half)):
        return free_vars(phi.sub)
    if isinstance(phi, DotPlus):
        return free_vars(phi.left) | free_vars(phi.right)
    if isinstance(phi, (Sup, Inf)):
        return free_vars(phi.body) - {phi.var}
    out = set()
    for m in phi.members:
        out |= free_vars(m)
    return out


def constants_of(phi: Formula) -> set[int]:
    out: set[int] = set()
    for sub in subformulas(phi):
        if isinstance(sub, Atomic):
            for t in sub.args:
                out |= term_consts(t)
        elif isinstance(sub, Dist):
            out |= term_consts(sub.left) | term_consts(sub.right)
    return out


def is_sentence(phi: Formula) -> bool:
    return not free_vars(phi)


def depth(phi: Formula) -> int:
    if isinstance(phi, (Atomic, Dist)):
        return 0
    if isinstance(phi, (Neg, Half)):
        return 1 + depth(phi.sub)
    if isinstance(phi, DotPlus):
        return 1 + max(depth(phi.left), depth(phi.right))
    if isinstance(phi, (Sup, Inf)):
        return 1 + depth(phi.body)
    return 1 + max(depth(m) for m in phi.members)


def half_depth(phi: Formula) -> int:
    """Max nesting of halving; bounds the value's extra grid exponent."""
    if isinstance(phi, (Atomic, Dist)):
        return 0
    if isinstance(phi, Half):
        return 1 + half_depth(phi.sub)
    if isinstance(phi, Neg):
        return half_depth(phi.sub)
    if isinstance(phi, DotPlus):
        return max(half_depth(phi.left), half_depth(phi.right))
    if isinstance(phi, (Sup, Inf)):
        return half_depth(phi.body)
    return max(half_depth(m) for m in phi.members)


def _subst_term(t: Term, mapping: Mapping[int, Term]) -> Term:
    if isinstance(t, Var):
        return mapping.get(t.index, t)
    if isinstance(t, Const):
        return t
    return Func(t.name, tuple(_subst_term(a, mapping) for a in t.args))


def substitute(phi: Formula, mapping: Mapping[int, Term]) -> Formula:
    """Substitute terms for free variables. Substituted terms must be
    closed (the engine only instantiates with constants), so no capture."""
    if not mapping:
        return phi
    for t in mapping.values():
        if term_vars(t):
            raise ValueError("substitution terms must be closed")
    if isinstance(phi, Atomic):
        return Atomic(phi.name, tuple(_subst_term(a, mapping) for a in phi.args))
    if isinstance(phi, Dist):
        return Dist(_subst_term(phi.left, mapping), _subst_term(phi.right, mapping))
    if isinstance(phi, Neg):
        return Neg(substitute(phi.sub, mapping))
    if isinstance(phi, Half):
        return Half(substitute(phi.sub, mapping))
    if isinstance(phi, DotPlus):
        return DotPlus(substitute(phi.left, mapping), substitute(phi.right, mapping))
    if isinstance(phi, (Sup, Inf)):
        inner = {k: v for k, v in mapping.items() if k != phi.var}
        cls = Sup if isinstance(phi, Sup) else Inf
        return cls(phi.var, substitute(phi.body, inner))
    if isinstance(phi, Join):
        return Join(tuple(substitute(m, mapping) for m in phi.members))
    return Meet(tuple(substitute(m, mapping) for m in phi.members))


def _rename_term(t: Term, perm: Mapping[int, int]) -> Term:
    if isinstance(t, Const):
        return Const(perm.get(t.index, t.index))
    if isinstance(t, Var):
        return t
    return Func(t.name, tuple(_rename_term(a, perm) for a in t.args))


def rename_constants(phi: Formula, perm: Mapping[int, int]) -> Formula:
    """Apply a (finitely supported) permutation of witness constants."""
    if isinstance(phi, Atomic):
        return Atomic(phi.name, tuple(_rename_term(a, perm) for a in phi.args))
    if isinstance(phi, Dist):
        return Dist(_rename_term(phi.left, perm), _rename_term(phi.right, perm))
    if isinstance(phi, Neg):
        return Neg(rename_constants(phi.sub, perm))
    if isinstance(phi, Half):
        return Half(rename_constants(phi.sub, perm))
    if isinstance(phi, DotPlus):
        return DotPlus(rename_constants(phi.left, perm), rename_constants(phi.right, perm))
    if isinstance(phi, Sup):
        return Sup(phi.var, rename_constants(phi.body, perm))
    if isinstance(phi, Inf):
        return Inf(phi.var, rename_constants(phi.body, perm))
    if isinstance(phi, Join):
        return Join(tuple(rename_constants(m, perm) for m in phi.members))
    return Meet(tuple(rename_constants(m, perm) for m in phi.members))


def _term_order_key(t: Term) -> tuple:
    if isinstance(t, Const):
        return (0, t.index)
    if isinstance(t, Var):
        return (1, t.index)
    return (2, t.name, tuple(_term_order_key(a) for a in t.args))


def canonical_form(phi: Formula) -> Formula:
    """Rewrite with the arguments of each distance atom in a fixed order.

    The metric is symmetric, so d(t,u) and d(u,t) denote the same value;
    comparisons between bounds go through this form so that, e.g., a
    renamed condition matches the canonically enumerated move pool.
    """
    if isinstance(phi, Atomic):
        return phi
    if isinstance(phi, Dist):
        if _term_order_key(phi.right) < _term_order_key(phi.left):
            return Dist(phi.right, phi.left)
        return phi
    if isinstance(phi, Neg):
        return Neg(canonical_form(phi.sub))
    if isinstance(phi, Half):
        return Half(canonical_form(phi.sub))
    if isinstance(phi, DotPlus):
        return DotPlus(canonical_form(phi.left), canonical_form(phi.right))
    if isinstance(phi, Sup):
        return Sup(phi.var, canonical_form(phi.body))
    if isinstance(phi, Inf):
        return Inf(phi.var, canonical_form(phi.body))
    if isinstance(phi, Join):
        return Join(tuple(canonical_form(m) for m in phi.members))
    return Meet(tuple(canonical_form(m) for m in phi.members))


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class Classification:
    restricted: bool
    quantifier_free: bool
    existential: bool
    universal: bool
    sup_join_inf: bool


def _strip_infs(phi: Formula) -> Formula:
    while isinstance(phi, Inf):
        phi = phi.body
    return phi


def _strip_sups(phi: Formula) -> Formula:
    while isinstance(phi, Sup):
        phi = phi.body
    return phi


def classify(phi: Formula) -> Classification:
    qf = not any(isinstance(s, (Sup, Inf)) for s in subformulas(phi))
    existential = qf or (
        isinstance(phi, Inf)
        and not any(isinstance(s, (Sup, Inf)) for s in subformulas(_strip_infs(phi)))
    )
    universal = qf or (
        isinstance(phi, Sup)
        and not any(isinstance(s, (Sup, Inf)) for s in subformulas(_strip_sups(phi)))
    )
    sji = False
    if isinstance(phi, Sup):
        core = _strip_sups(phi)
        if isinstance(core, Join):
            sji = all(classify(m).existential for m in core.members)
    # the AST has no connective outside {neg, half, dotplus} so every
    # formula it can express is restricted by construction
    return Classification(
        restricted=True,
        quantifier_free=qf,
        existential=existential,
        universal=universal,
        sup_join_inf=sji,
    )


# ---------------------------------------------------------------------------
# derived connectives


def dotminus_f(a: Formula, b: Formula) -> Formula:
    """a "-" b = max(0, a-b), expressed with the base connectives."""
    return Neg(DotPlus(Neg(a), b))


def min_f(a: Formula, b: Formula) -> Formula:
    return dotminus_f(a, dotminus_f(a, b))


def max_f(a: Formula, b: Formula) -> Formula:
    return Neg(min_f(Neg(a), Neg(b)))


def abs_diff_f(a: Formula, b: Formula) -> Formula:
    return DotPlus(dotminus_f(a, b), dotminus_f(b, a))


def scalar_f(r: Dyadic, anchor: Term) -> Formula:
    """A closed formula of constant value r, built from d(anchor,anchor)=0
    by negation and halving along the binary expansion of r."""
    zero: Formula = Dist(anchor, anchor)
    if r == ZERO:
        return zero
    if r == ONE:
        return Neg(zero)
    # r = 0.b1..bm binary; fold v_{i} = (b_i + v_{i+1})/2 from v_{m+1} = 0,
    # using half(x) for bit 0 and ~half(~x) = (1+x)/2 for bit 1
    bits = [(r.num >> (r.exp - 1 - i)) & 1 for i in range(r.exp)]
    acc: Formula = zero
    for bit in reversed(bits):
        acc = Neg(Half(Neg(acc))) if bit else Half(acc)
    return acc
