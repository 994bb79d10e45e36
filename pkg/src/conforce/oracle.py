"""Bounded satisfiability oracle for conditions.

A condition is a finite set of strict bounds `phi < r` on quantifier-free
restricted sentences with witness constants. The oracle searches for a
finite structure on a dyadic grid that models the ambient theory exactly
(axiom value 0) and satisfies every bound strictly. Search is iterative
deepening on the universe size with per-atom interval propagation and
interval-evaluation pruning; every Sat answer carries a witness that is
re-validated before being returned.

Verdicts are three-way: sat / unsat_at_bound / unknown. An unsat verdict
is only marked *sound* when exhaustion genuinely covers all models:
contradictory rational bounds on a single atom, or classical relational
search at universe cap >= number of mentioned constants.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

from .values import Dyadic, Interval, ZERO, ONE, dmin, dmax
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
    Signature,
    Sup,
    Var,
    classify,
    constants_of,
    is_sentence,
    rename_constants,
    subformulas,
)
from .structures import (
    FiniteStructure,
    UninterpretedConstantError,
    evaluate,
    validate_structure,
)
from .syntax import canonical_key, formula_key, print_formula
from . import kernels


# ---------------------------------------------------------------------------
# theories


@dataclass(frozen=True)
class Theory:
    name: str
    sig: Signature
    axioms: tuple[Formula, ...] = ()
    references: tuple[FiniteStructure, ...] = ()

    def __post_init__(self) -> None:
        for ax in self.axioms:
            if not is_sentence(ax):
                raise ValueError(f"axiom {print_formula(ax)} has free variables")
            if constants_of(ax):
                raise ValueError("axioms must not mention witness constants")
            if not classify(ax).universal:
                raise ValueError(f"axiom {print_formula(ax)} is not universal")
        for ref in self.references:
            bad = validate_structure(ref)
            if bad is not None:
                raise ValueError(f"reference structure invalid: {bad}")
            for ax in self.axioms:
                if evaluate(ax, ref) != ZERO:
                    raise ValueError(
                        f"reference structure violates axiom {print_formula(ax)}"
                    )


# ---------------------------------------------------------------------------
# conditions


class ConditionError(ValueError):
    pass


def _check_member(phi: Formula, r: Dyadic) -> None:
    if not is_sentence(phi):
        raise ConditionError(f"bound on open formula {print_formula(phi)}")
    if not classify(phi).quantifier_free:
        raise ConditionError(f"bound on quantified sentence {print_formula(phi)}")
    if not (ZERO < r <= ONE):
        raise ConditionError(f"bound {r} outside (0,1]")


@dataclass(frozen=True)
class Condition:
    """A finite, canonically ordered set of strict bounds."""

    bounds: tuple[tuple[Formula, Dyadic], ...] = ()
    certificate: Optional["Verdict"] = field(default=None, compare=False, repr=False)

    @staticmethod
    def make(
        pairs: Iterable[tuple[Formula, Dyadic]],
        certificate: Optional["Verdict"] = None,
    ) -> "Condition":
        uniq = {}
        for phi, r in pairs:
            _check_member(phi, r)
            # first spelling wins; d-symmetric respellings collapse
            uniq.setdefault((canonical_key(phi), str(r)), (phi, r))
        ordered = tuple(uniq[k] for k in sorted(uniq))
        return Condition(ordered, certificate)

    def extend(self, additions: Iterable[tuple[Formula, Dyadic]]) -> "Condition":
        return Condition.make(tuple(self.bounds) + tuple(additions))

    def extends(self, other: "Condition") -> bool:
        mine = set(self.key())
        return all(k in mine for k in other.key())

    def canon_map(self) -> dict[str, Dyadic]:
        """Least stored bound per canonical formula key (cached)."""
        m = getattr(self, "_canon", None)
        if m is None:
            m = {}
            for phi, r in self.bounds:
                k = canonical_key(phi)
                cur = m.get(k)
                if cur is None or r < cur:
                    m[k] = r
            object.__setattr__(self, "_canon", m)
        return m

    def constants(self) -> list[int]:
        cached = getattr(self, "_consts", None)
        if cached is None:
            out: set[int] = set()
            for phi, _ in self.bounds:
                out |= constants_of(phi)
            cached = sorted(out)
            object.__setattr__(self, "_consts", cached)
        return cached

    def key(self) -> tuple[tuple[str, str], ...]:
        cached = getattr(self, "_key", None)
        if cached is None:
            cached = tuple(
                sorted((canonical_key(phi), str(r)) for phi, r in self.bounds)
            )
            object.__setattr__(self, "_key", cached)
        return cached

    def rename(self, perm: Mapping[int, int]) -> "Condition":
        return Condition.make(
            [(rename_constants(phi, perm), r) for phi, r in self.bounds]
        )

    def __len__(self) -> int:
        return len(self.bounds)

    def pretty(self) -> list[str]:
        return [f"{print_formula(phi)} < {r}" for phi, r in self.bounds]


EMPTY_CONDITION = Condition()


def condition_to_json(p: Condition) -> dict:
    """Wire form: ordered bound list with formulas as text and dyadic bounds
    as k/2^m strings. Certificates are not serialized; reload re-certifies."""
    return {
        "bounds": [
            {"formula": print_formula(phi), "bound": str(r)} for phi, r in p.bounds
        ]
    }


def condition_from_json(doc: dict, sig: Signature) -> Condition:
    from .syntax import parse_formula

    pairs = []
    for item in doc.get("bounds", []):
        phi = parse_formula(item["formula"], sig)
        r = Dyadic.parse(item["bound"])
        pairs.append((phi, r))
    return Condition.make(pairs)


# ---------------------------------------------------------------------------
# verdicts and budgets


@dataclass(frozen=True)
class SearchBounds:
    max_universe: int = 4
    grid_exp: int = 4
    node_budget: int = 50_000

    @property
    def strictness(self) -> Dyadic:
        """One grid step; a strict bound holds with at least this slack."""
        return Dyadic(1, self.grid_exp)

    def key(self) -> tuple:
        return (self.max_universe, self.grid_exp, self.node_budget)


@dataclass(frozen=True)
class Verdict:
    kind: str  # 'sat' | 'unsat_at_bound' | 'unknown'
    witness: Optional[FiniteStructure] = None
    bounds: Optional[SearchBounds] = None
    sound: bool = False
    reason: str = ""

    @property
    def is_sat(self) -> bool:
        return self.kind == "sat"


# ---------------------------------------------------------------------------
# per-atom interval propagation

# an atom key is ('d', i, j) with i <= j, or (pred_name, args...)
AtomKey = tuple


def atom_key(phi: Formula) -> Optional[AtomKey]:
    if isinstance(phi, Dist):
        if isinstance(phi.left, Const) and isinstance(phi.right, Const):
            i, j = phi.left.index, phi.right.index
            return ("d", min(i, j), max(i, j))
        return None
    if isinstance(phi, Atomic):
        if all(isinstance(t, Const) for t in phi.args):
            return (phi.name,) + tuple(t.index for t in phi.args)
        return None
    return None


@dataclass
class _RationalWindow:
    """Open rational window (lo, hi), endpoints num/2^exp, unclamped."""

    lo_num: int = -1
    lo_exp: int = 0
    hi_num: int = 2
    hi_exp: int = 0

    def tighten_below(self, num: int, exp: int) -> None:  # value < num/2^exp
        if _rat_lt((num, exp), (self.hi_num, self.hi_exp)):
            self.hi_num, self.hi_exp = num, exp

    def tighten_above(self, num: int, exp: int) -> None:  # value > num/2^exp
        if _rat_lt((self.lo_num, self.lo_exp), (num, exp)):
            self.lo_num, self.lo_exp = num, exp

    def rationally_empty(self) -> bool:
        # intersected with [0,1]
        if not _rat_lt((self.lo_num, self.lo_exp), (self.hi_num, self.hi_exp)):
            return True
        if not _rat_lt((0, 0), (self.hi_num, self.hi_exp)):
            return True
        if not _rat_lt((self.lo_num, self.lo_exp), (1, 0)):
            return True
        return False

    def grid_range(self, g: int) -> tuple[int, int]:
        """Allowed numerators [lo, hi] over 2^g (may be empty: lo > hi)."""
        lo = _floor_mul(self.lo_num, self.lo_exp, g) + 1
        hi = _ceil_mul(self.hi_num, self.hi_exp, g) - 1
        return max(lo, 0), min(hi, 1 << g)

    def allows_zero(self) -> bool:
        return _rat_lt((self.lo_num, self.lo_exp), (0, 0)) and _rat_lt(
            (0, 0), (self.hi_num, self.hi_exp)
        )


def _rat_lt(a: tuple[int, int], b: tuple[int, int]) -> bool:
    an, ae = a
    bn, be = b
    e = max(ae, be)
    return an << (e - ae) < bn << (e - be)


def _floor_mul(num: int, exp: int, g: int) -> int:
    """floor(num/2^exp * 2^g)."""
    if exp <= g:
        return num << (g - exp)
    return num >> (exp - g)


def _ceil_mul(num: int, exp: int, g: int) -> int:
    if exp <= g:
        return num << (g - exp)
    sh = exp - g
    return -((-num) >> sh)


def _closed_value(phi: Formula) -> Optional[tuple[int, int]]:
    """Exact value (num, exp meaning num/2^exp) of a formula whose value is
    the same in every structure: d(t,t) combined with Neg, Half, DotPlus,
    Meet and Join. None when the value can vary."""
    if isinstance(phi, Dist) and phi.left == phi.right:
        return 0, 0
    if isinstance(phi, Neg):
        v = _closed_value(phi.sub)
        return None if v is None else ((1 << v[1]) - v[0], v[1])
    if isinstance(phi, Half):
        v = _closed_value(phi.sub)
        return None if v is None else (v[0], v[1] + 1)
    if isinstance(phi, DotPlus):
        a = _closed_value(phi.left)
        b = _closed_value(phi.right)
        if a is None or b is None:
            return None
        e = max(a[1], b[1])
        s = (a[0] << (e - a[1])) + (b[0] << (e - b[1]))
        return min(s, 1 << e), e
    if isinstance(phi, (Meet, Join)):
        best: Optional[tuple[int, int]] = None
        for m in phi.members:
            v = _closed_value(m)
            if v is None:
                return None
            if best is None:
                best = v
            elif isinstance(phi, Meet):  # value of Meet is the max
                if _rat_lt(best, v):
                    best = v
            elif _rat_lt(v, best):
                best = v
        return best
    return None


def _unary_constraints(
    phi: Formula, r: Dyadic
) -> Optional[list[tuple[AtomKey, str, int, int]]]:
    """Decompose `phi < r` into per-atom strict constraints when phi is a
    chain of Neg/Half over an atom, a Meet of such, or a DotPlus with a
    constant-valued side. Returns a list of (atom, op, num, exp) with op
    '<' or '>', or None when no decomposition applies."""

    out: list[tuple[AtomKey, str, int, int]] = []

    def walk(f: Formula, op: str, num: int, exp: int) -> bool:
        if isinstance(f, Neg):
            # 1 - v < q  =>  v > 1 - q
            flipped = "<" if op == ">" else ">"
            return walk(f.sub, flipped, (1 << exp) - num, exp)
        if isinstance(f, Half):
            # v/2 < q  =>  v < 2q
            if exp > 0:
                return walk(f.sub, op, num, exp - 1)
            return walk(f.sub, op, num * 2, exp)
        if isinstance(f, DotPlus):
            lv = _closed_value(f.left)
            rv = _closed_value(f.right)
            if lv is not None and rv is not None:
                return True  # a constant constrains no atom
            if lv is not None or rv is not None:
                s, other = (lv, f.right) if lv is not None else (rv, f.left)
                e = max(exp, s[1])
                q = num << (e - exp)
                t = q - (s[0] << (e - s[1]))
                if op == "<":
                    # min(1, v+s) < q: vacuous when q > 1, else v < q - s
                    if q > (1 << e):
                        return True
                    return walk(other, "<", t, e)
                # min(1, v+s) > q forces v > q - s
                return walk(other, ">", t, e)
            if op == "<":
                # x (+) y dominates both halves
                return walk(f.left, op, num, exp) and walk(f.right, op, num, exp)
            return False
        if isinstance(f, Meet) and op == "<":
            # max < q  =>  every member < q
            return all(walk(m, op, num, exp) for m in f.members)
        if isinstance(f, Join) and op == ">":
            # min > q  =>  every member > q
            return all(walk(m, op, num, exp) for m in f.members)
        key = atom_key(f)
        if key is None:
            return False
        out.append((key, op, num, exp))
        return True

    if walk(phi, "<", r.num, r.exp):
        return out
    return None


def necessary_windows(
    bounds: Sequence[tuple[Formula, Dyadic]]
) -> tuple[Optional[dict[AtomKey, _RationalWindow]], str]:
    """Necessary per-atom windows implied by the decomposable bounds.
    Second component: '' or the atom description that is rationally
    contradictory (grid-independent unsat)."""
    windows: dict[AtomKey, _RationalWindow] = {}
    for phi, r in bounds:
        cons = _unary_constraints(phi, r)
        if cons is None:
            # necessary (not sufficient) component constraints
            if isinstance(phi, DotPlus):
                cons = []
                for part in (phi.left, phi.right):
                    sub = _unary_constraints(part, r)
                    if sub:
                        cons.extend(sub)
            if not cons:
                continue
        for key, op, num, exp in cons:
            w = windows.setdefault(key, _RationalWindow())
            if op == "<":
                w.tighten_below(num, exp)
            else:
                w.tighten_above(num, exp)
    for key, w in windows.items():
        if key[0] == "d" and key[1] == key[2]:
            if not w.allows_zero():
                return None, f"d(c{key[1]},c{key[1]}) forced away from 0"
        if w.rationally_empty():
            return None, _describe_atom(key)
    return windows, ""


def _describe_atom(key: AtomKey) -> str:
    if key[0] == "d":
        return f"d(c{key[1]},c{key[2]})"
    return f"{key[0]}({', '.join('c%d' % i for i in key[1:])})"


_AXIOM_EPS = Dyadic(1, 40)


def _axiom_constraint_templates(theory) -> list[tuple[int, list]]:
    """Literal constraints forced by sup-quantified axioms, kept symbolic:
    variable number v appears inside the atom keys as the sentinel constant
    index -1-v. Axioms whose matrices do not decompose into literals
    contribute nothing, which is sound, just less eager."""
    from .logic import free_vars, substitute

    out = []
    for ax in theory.axioms:
        body = ax
        vars_: list[int] = []
        while isinstance(body, Sup):
            vars_.append(body.var)
            body = body.body
        if free_vars(body) - set(vars_):
            continue
        sent = substitute(body, {v: Const(-1 - i) for i, v in enumerate(vars_)})
        cons = _unary_constraints(sent, _AXIOM_EPS)
        if cons:
            out.append((len(vars_), cons))
    return out


def _subst_key(key: AtomKey, tup: tuple[int, ...]) -> AtomKey:
    def real(i: int) -> int:
        return tup[-1 - i] if i < 0 else i

    if key[0] == "d":
        a, b = real(key[1]), real(key[2])
        return ("d", min(a, b), max(a, b))
    return (key[0],) + tuple(real(i) for i in key[1:])


def _classical_refutation(
    consts: Sequence[int],
    windows: dict[AtomKey, _RationalWindow],
    templates: list[tuple[int, list]],
) -> Optional[str]:
    """Collapse classically merged constant names and look for an atom with
    no {0,1} value left. A distance bound below one forces distance zero in
    a two-valued metric, so the two names denote one element and constraints
    on either name hit the same atoms. The argument never mentions a
    universe size, so a contradiction refutes models of every size."""
    if not consts:
        return None

    def allowed01(lo: tuple[int, int], hi: tuple[int, int]) -> frozenset:
        return frozenset(
            v for v in (0, 1) if _rat_lt(lo, (v, 0)) and _rat_lt((v, 0), hi)
        )

    literal: dict[AtomKey, frozenset] = {}

    def add(key: AtomKey, vals: frozenset) -> None:
        cur = literal.get(key)
        literal[key] = vals if cur is None else (cur & vals)

    for key, w in windows.items():
        add(key, allowed01((w.lo_num, w.lo_exp), (w.hi_num, w.hi_exp)))
    for nvars, cons in templates:
        for tup in itertools.product(consts, repeat=nvars):
            for key, op, num, exp in cons:
                if op == "<":
                    vals = frozenset(v for v in (0, 1) if _rat_lt((v, 0), (num, exp)))
                else:
                    vals = frozenset(v for v in (0, 1) if _rat_lt((num, exp), (v, 0)))
                add(_subst_key(key, tup), vals)

    parent = {c: c for c in consts}

    def find(c: int) -> int:
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    def union(a: int, b: int) -> bool:
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[max(ra, rb)] = min(ra, rb)
        return True

    changed = True
    while changed:
        changed = False
        table: dict[AtomKey, frozenset] = {}
        for key, vals in literal.items():
            rk = _subst_key(
                (key[0],) + tuple(find(i) for i in key[1:]), ()
            )
            cur = table.get(rk)
            table[rk] = vals if cur is None else (cur & vals)
        for rk, vals in table.items():
            if rk[0] == "d" and rk[1] == rk[2]:
                if 0 not in vals:
                    return (
                        f"d(c{rk[1]},c{rk[1]}) forced positive after "
                        "collapsing merged names"
                    )
                continue
            if not vals:
                return (
                    f"contradictory bounds on {_describe_atom(rk)} "
                    "after collapsing merged names"
                )
            if rk[0] == "d" and vals == frozenset((0,)):
                if union(rk[1], rk[2]):
                    changed = True
    return None


# ---------------------------------------------------------------------------
# interval evaluation over partially assigned tables (pruning)


class _PartialTables:
    def __init__(self, n: int, g: int, sig: Signature):
        self.n = n
        self.g = g
        self.sig = sig
        self.metric: dict[tuple[int, int], int] = {}
        self.pred: dict[tuple, int] = {}
        self.func: dict[tuple, int] = {}

    def metric_iv(self, i: int, j: int) -> Interval:
        if i == j:
            return Interval.point(ZERO)
        key = (min(i, j), max(i, j))
        v = self.metric.get(key)
        if v is None:
            return Interval(Dyadic(1, self.g) if not self.sig.classical else ONE, ONE)
        return Interval.point(Dyadic(v, self.g))

    def pred_iv(self, name: str, args: tuple[int, ...]) -> Interval:
        v = self.pred.get((name,) + args)
        if v is None:
            return Interval.full()
        return Interval.point(Dyadic(v, self.g))


def eval_interval(
    phi: Formula, tables: _PartialTables, env: dict[int, int], consts: Mapping[int, int]
) -> Interval:
    """Sound bracketing of the value over all completions of the tables.
    Unassigned function slots make term evaluation impossible; those
    formulas get the full interval."""
    from .logic import Var

    def term(t, env2: dict[int, int]) -> Optional[int]:
        if isinstance(t, Const):
            return consts.get(t.index)
        if isinstance(t, Var):
            return env2.get(t.index)
        args = tuple(term(u, env2) for u in t.args)
        if any(a is None for a in args):
            return None
        return tables.func.get((t.name,) + args)

    def go(f: Formula, env2: dict[int, int]) -> Interval:
        if isinstance(f, Atomic):
            args = tuple(term(t, env2) for t in f.args)
            if any(a is None for a in args):
                return Interval.full()
            return tables.pred_iv(f.name, tuple(args))
        if isinstance(f, Dist):
            i, j = term(f.left, env2), term(f.right, env2)
            if i is None or j is None:
                return Interval.full()
            return tables.metric_iv(i, j)
        if isinstance(f, Neg):
            return go(f.sub, env2).neg()
        if isinstance(f, Half):
            return go(f.sub, env2).half()
        if isinstance(f, DotPlus):
            return go(f.left, env2).dotplus(go(f.right, env2))
        if isinstance(f, Sup):
            out = None
            for e in range(tables.n):
                env3 = dict(env2)
                env3[f.var] = e
                iv = go(f.body, env3)
                out = iv if out is None else out.meet(iv)
            return out if out is not None else Interval.point(ZERO)
        if isinstance(f, Inf):
            out = None
            for e in range(tables.n):
                env3 = dict(env2)
                env3[f.var] = e
                iv = go(f.body, env3)
                out = iv if out is None else out.join(iv)
            return out if out is not None else Interval.point(ONE)
        if isinstance(f, Join):
            out = None
            for m in f.members:
                iv = go(m, env2)
                out = iv if out is None else out.join(iv)
            return out
        out = None
        for m in f.members:
            iv = go(m, env2)
            out = iv if out is None else out.meet(iv)
        return out

    return go(phi, env)


def _ground_slot_deps(
    phi: Formula, const_map: Mapping[int, int]
) -> Optional[frozenset]:
    """Table slots a quantifier-free all-constant formula reads. None when
    the value can depend on any slot (variables or function terms)."""
    deps: set[tuple] = set()

    def walk(f: Formula) -> bool:
        if isinstance(f, Dist):
            le, ri = f.left, f.right
            if not (isinstance(le, Const) and isinstance(ri, Const)):
                return False
            if le.index not in const_map or ri.index not in const_map:
                return False
            i, j = const_map[le.index], const_map[ri.index]
            if i != j:
                deps.add(("d", min(i, j), max(i, j)))
            return True
        if isinstance(f, Atomic):
            if not all(isinstance(t, Const) for t in f.args):
                return False
            if not all(t.index in const_map for t in f.args):
                return False
            deps.add((f.name,) + tuple(const_map[t.index] for t in f.args))
            return True
        if isinstance(f, (Neg, Half)):
            return walk(f.sub)
        if isinstance(f, DotPlus):
            return walk(f.left) and walk(f.right)
        if isinstance(f, (Meet, Join)):
            return all(walk(m) for m in f.members)
        return False

    if walk(phi):
        return frozenset(deps)
    return None


# ---------------------------------------------------------------------------
# assignment patterns


def _assignment_patterns(k: int, n: int, surjective: bool) -> Iterable[tuple[int, ...]]:
    """Canonical first-occurrence maps of k constants onto elements of
    [0,n): each value is at most 1 + max of the previous values. Iterative
    so the constant count never touches the recursion limit."""
    if k == 0:
        if not surjective or n == 0:
            yield ()
        return
    vals = [0] * k
    used = [1] * k  # distinct values among vals[:i+1]
    while True:
        if not surjective or used[k - 1] == n:
            yield tuple(vals)
        i = k - 1
        while i >= 0:
            cap = min((used[i - 1] if i else 0) + 1, n)
            if vals[i] + 1 < cap:
                vals[i] += 1
                for j in range(i, k):
                    if j > i:
                        vals[j] = 0
                    prev = used[j - 1] if j else 0
                    used[j] = max(prev, vals[j] + 1)
                break
            i -= 1
        if i < 0:
            return


# ---------------------------------------------------------------------------
# the search


class OracleSession:
    """Owns a theory, a memo table, and call statistics. All public entry
    points are deterministic for fixed inputs."""

    def __init__(self, theory: Theory, default_bounds: Optional[SearchBounds] = None):
        self.theory = theory
        self.default_bounds = default_bounds or SearchBounds()
        self.memo: dict[tuple, Verdict] = {}
        self.stats = {"calls": 0, "memo_hits": 0, "hint_hits": 0, "nodes": 0}
        self.revalidate = True  # debug mode: double-check every Sat witness
        self._templates: Optional[list[tuple[int, list]]] = None

    def _axiom_templates(self) -> list[tuple[int, list]]:
        if self._templates is None:
            self._templates = _axiom_constraint_templates(self.theory)
        return self._templates

    # -- public API --

    def check(
        self,
        condition: Condition | Sequence[tuple[Formula, Dyadic]],
        bounds: Optional[SearchBounds] = None,
        hint: Optional[FiniteStructure] = None,
    ) -> Verdict:
        cond = condition if isinstance(condition, Condition) else Condition.make(condition)
        b = bounds or self.default_bounds
        self.stats["calls"] += 1
        memo_key = (cond.key(), b.key())
        cached = self.memo.get(memo_key)
        if cached is not None and (hint is None or cached.is_sat or cached.sound):
            self.stats["memo_hits"] += 1
            return cached
        if hint is not None:
            v = self._try_witness(cond, hint, b)
            if v is not None:
                self.stats["hint_hits"] += 1
                self.memo[memo_key] = v
                return v
        if cached is not None:
            # a failed hint never downgrades the remembered verdict
            self.stats["memo_hits"] += 1
            return cached
        verdict = self._search(cond, b)
        self.memo[memo_key] = verdict
        return verdict

    def certify(self, condition: Condition, bounds: Optional[SearchBounds] = None,
                hint: Optional[FiniteStructure] = None) -> Condition:
        v = self.check(condition, bounds, hint)
        if not v.is_sat:
            raise ConditionError(
                f"condition not certified satisfiable ({v.kind}: {v.reason})"
            )
        return Condition(condition.bounds, v)

    def extend_check(
        self,
        p: Condition,
        additions: Sequence[tuple[Formula, Dyadic]],
        bounds: Optional[SearchBounds] = None,
        hint: Optional[FiniteStructure] = None,
    ) -> Verdict:
        """Certify p plus additions, trying cheap witness reuse first."""
        b = bounds or self.default_bounds
        q = p.extend(additions)
        self.stats["calls"] += 1
        memo_key = (q.key(), b.key())
        cached = self.memo.get(memo_key)
        if cached is not None and (hint is None or cached.is_sat or cached.sound):
            self.stats["memo_hits"] += 1
            return cached
        if hint is not None:
            v = self._try_witness(q, hint, b)
            if v is not None:
                self.stats["hint_hits"] += 1
                self.memo[memo_key] = v
                return v
        prev = p.certificate.witness if (p.certificate and p.certificate.is_sat) else None
        if prev is not None:
            v = self._try_witness_with_expansion(q, prev, b)
            if v is not None:
                self.stats["hint_hits"] += 1
                self.memo[memo_key] = v
                return v
        if cached is not None:
            self.stats["memo_hits"] += 1
            return cached
        verdict = self._search(q, b)
        self.memo[memo_key] = verdict
        return verdict

    def move_pool(self, p: Condition, budget: "PoolBudget") -> list[Condition]:
        """Certified single-bound extensions of p, in canonical order,
        identity first. Only Sat-certified moves enter the pool."""
        out = [p if p.certificate else self.certify(p, budget.bounds)]
        consts = p.constants()
        fresh = []
        nxt = (max(consts) + 1) if consts else 0
        for _ in range(budget.fresh):
            fresh.append(nxt)
            nxt += 1
        window = consts + fresh
        atoms = _atoms_over(self.theory.sig, window)
        atoms = atoms[: budget.atoms]
        for alpha in atoms:
            for tau in budget.thresholds:
                for polarity in (False, True) if budget.both_polarities else (False,):
                    phi: Formula = Neg(alpha) if polarity else alpha
                    pair = (phi, tau)
                    if pair in p.bounds:
                        continue
                    v = self.extend_check(p, [pair], budget.bounds)
                    if v.is_sat:
                        out.append(Condition(p.extend([pair]).bounds, v))
                        if budget.max_pool and len(out) >= budget.max_pool:
                            return out
        return out

    # -- witness handling --

    def _witness_satisfies(
        self, cond: Condition, w: FiniteStructure, b: SearchBounds
    ) -> bool:
        def value(phi: Formula) -> Dyadic:
            v = kernels.eval_sentence(phi, w)
            return v if v is not None else evaluate(phi, w)

        s = b.strictness
        try:
            for ax in self.theory.axioms:
                if value(ax) != ZERO:
                    return False
            for phi, r in cond.bounds:
                # phi < r is realized one grid step strictly: eval <= r - s
                up = value(phi).try_add(s)
                if up is None or not (up <= r):
                    return False
        except UninterpretedConstantError:
            return False
        return True

    def _try_witness(
        self, cond: Condition, w: FiniteStructure, b: SearchBounds
    ) -> Optional[Verdict]:
        if self.revalidate and validate_structure(w) is not None:
            return None
        if self._witness_satisfies(cond, w, b):
            return Verdict("sat", witness=w, bounds=b)
        return None

    def _try_witness_with_expansion(
        self, cond: Condition, w: FiniteStructure, b: SearchBounds
    ) -> Optional[Verdict]:
        """Reuse a witness of a weaker condition: as-is, then with any new
        constants placed on existing elements (small exhaustive search)."""
        need = [c for c in cond.constants() if c not in w.constants]
        if not need:
            return self._try_witness(cond, w, b)
        if len(need) > 3 or w.n ** len(need) > 512:
            return None
        for placement in itertools.product(range(w.n), repeat=len(need)):
            cand = w.expand_constants(dict(zip(need, placement)))
            if self._witness_satisfies(cond, cand, b):
                return Verdict("sat", witness=cand, bounds=b)
        return None

    # -- full search --

    def _search(self, cond: Condition, b: SearchBounds) -> Verdict:
        sig = self.theory.sig
        windows, contradiction = necessary_windows(cond.bounds)
        if windows is None:
            return Verdict(
                "unsat_at_bound",
                bounds=b,
                sound=True,
                reason=f"contradictory bounds on {contradiction}",
            )
        consts = cond.constants()
        if sig.classical:
            merged = _classical_refutation(consts, windows, self._axiom_templates())
            if merged is not None:
                return Verdict("unsat_at_bound", bounds=b, sound=True, reason=merged)
        k = len(consts)
        surjective = sig.relational and k > 0
        budget = [b.node_budget]
        truncated = False

        # relational signatures: WLOG every element carries a constant
        # (substructures preserve universal axioms and qf bounds), so the
        # universe never needs to outgrow the constants; with none, one
        # element suffices.
        n_hi = min(b.max_universe, k) if surjective else (
            1 if sig.relational else b.max_universe
        )
        for n in range(1, max(n_hi, 1) + 1):
            for pattern in _assignment_patterns(k, n, surjective):
                budget[0] -= 1  # cheaply refuted patterns must still count
                const_map = dict(zip(consts, pattern))
                found = self._search_tables(cond, windows, n, const_map, b, budget)
                if found is not None:
                    return found
                if budget[0] <= 0:
                    truncated = True
                    break
            if truncated:
                break

        if truncated:
            return Verdict("unknown", bounds=b, reason="node budget exhausted")
        sound = bool(sig.classical and sig.relational and b.max_universe >= max(k, 1))
        return Verdict(
            "unsat_at_bound",
            bounds=b,
            sound=sound,
            reason="search exhausted at bounds"
            + (" (complete for classical relational)" if sound else ""),
        )

    def _search_tables(
        self,
        cond: Condition,
        windows: dict[AtomKey, _RationalWindow],
        n: int,
        const_map: dict[int, int],
        b: SearchBounds,
        budget: list[int],
    ) -> Optional[Verdict]:
        sig = self.theory.sig
        g = b.grid_exp
        full = 1 << g
        tables = _PartialTables(n, g, sig)

        # slot list with domains
        slot_domains: dict[tuple, list[int]] = {}
        for i in range(n):
            for j in range(i + 1, n):
                if sig.classical:
                    slot_domains[("d", i, j)] = [full]
                else:
                    slot_domains[("d", i, j)] = list(range(1, full + 1))
        for sym in sig.predicates:
            for args in itertools.product(range(n), repeat=sym.arity):
                dom = [0, full] if sig.classical else list(range(full + 1))
                slot_domains[(sym.name,) + args] = dom
        for sym in sig.functions:
            for args in itertools.product(range(n), repeat=sym.arity):
                slot_domains[("fn", sym.name) + args] = list(range(n))

        # apply propagated windows through the constant assignment
        for key, w in windows.items():
            lo, hi = w.grid_range(g)
            if key[0] == "d":
                i, j = const_map[key[1]], const_map[key[2]]
                if i == j:
                    if not w.allows_zero():
                        return None
                    continue
                skey = ("d", min(i, j), max(i, j))
            else:
                skey = (key[0],) + tuple(const_map[c] for c in key[1:])
            dom = [v for v in slot_domains[skey] if lo <= v <= hi]
            if not dom:
                return None
            slot_domains[skey] = dom

        order = sorted(slot_domains, key=lambda s: (len(slot_domains[s]), s))
        checks = [(phi, r) for phi, r in cond.bounds]
        check_deps = [_ground_slot_deps(phi, const_map) for phi, _ in checks]
        axioms = self.theory.axioms

        def assign(slot: tuple, value: int) -> None:
            if slot[0] == "d":
                tables.metric[(slot[1], slot[2])] = value
            elif slot[0] == "fn":
                tables.func[(slot[1],) + slot[2:]] = value
            else:
                tables.pred[slot] = value

        def unassign(slot: tuple) -> None:
            if slot[0] == "d":
                tables.metric.pop((slot[1], slot[2]), None)
            elif slot[0] == "fn":
                tables.func.pop((slot[1],) + slot[2:], None)
            else:
                tables.pred.pop(slot, None)

        def triangle_ok(i: int, j: int) -> bool:
            dij = tables.metric[(i, j)]
            for kk in range(n):
                if kk in (i, j):
                    continue
                a = tables.metric.get((min(i, kk), max(i, kk)))
                c = tables.metric.get((min(j, kk), max(j, kk)))
                if a is None or c is None:
                    continue
                if dij > a + c or a > dij + c or c > dij + a:
                    return False
            return True

        def prune(last: tuple, branching: bool) -> bool:
            """True when some bound or axiom is already impossible. Ground
            bounds are rechecked only when the slot just assigned is one
            they read; their brackets cannot move otherwise."""
            for (phi, r), deps in zip(checks, check_deps):
                if deps is not None and last not in deps:
                    continue
                iv = eval_interval(phi, tables, {}, const_map)
                lo_up = iv.lo.try_add(b.strictness)
                if lo_up is None or lo_up > r:
                    return True
            if not branching:
                return False
            for ax in axioms:
                iv = eval_interval(ax, tables, {}, const_map)
                if iv.lo > ZERO:
                    return True
            return False

        def complete() -> Optional[FiniteStructure]:
            metric = tuple(
                tuple(
                    0 if i == j else tables.metric[(min(i, j), max(i, j))]
                    for j in range(n)
                )
                for i in range(n)
            )
            preds = {
                sym.name: {
                    args: tables.pred[(sym.name,) + args]
                    for args in itertools.product(range(n), repeat=sym.arity)
                }
                for sym in sig.predicates
            }
            funcs = {
                sym.name: {
                    args: tables.func[(sym.name,) + args]
                    for args in itertools.product(range(n), repeat=sym.arity)
                }
                for sym in sig.functions
            }
            cand = FiniteStructure(sig, n, g, metric, preds, funcs, dict(const_map))
            if validate_structure(cand) is not None:
                return None
            for ax in axioms:
                if evaluate(ax, cand) != ZERO:
                    return None
            for phi, r in cond.bounds:
                up = evaluate(phi, cand).try_add(b.strictness)
                if up is None or not (up <= r):
                    return None
            return cand

        def dfs(idx: int) -> Optional[FiniteStructure]:
            if budget[0] <= 0:
                return None
            budget[0] -= 1  # interior nodes pay too: pruning work is the cost
            if idx == len(order):
                return complete()
            slot = order[idx]
            for value in slot_domains[slot]:
                assign(slot, value)
                ok = True
                if slot[0] == "d":
                    ok = triangle_ok(slot[1], slot[2])
                if ok and prune(slot, len(slot_domains[slot]) > 1):
                    ok = False
                if ok:
                    out = dfs(idx + 1)
                    if out is not None:
                        return out
                unassign(slot)
                if budget[0] <= 0:
                    return None
            return None

        found = dfs(0)
        self.stats["nodes"] += b.node_budget - budget[0] if budget[0] >= 0 else 0
        if found is None:
            return None
        if self.revalidate:
            assert validate_structure(found) is None
        return Verdict("sat", witness=found, bounds=b)


# ---------------------------------------------------------------------------
# move pools


@dataclass(frozen=True)
class PoolBudget:
    """Caps the legal-move pool: how many fresh constants may enter, how
    many atomic sentences are considered (canonical order), which strict
    thresholds are offered, and the total pool size."""

    fresh: int = 1
    atoms: int = 2
    thresholds: tuple[Dyadic, ...] = (Dyadic(1, 1),)
    both_polarities: bool = True
    max_pool: Optional[int] = None
    bounds: Optional[SearchBounds] = None


def _atoms_over(sig: Signature, constants: Sequence[int]) -> list[Formula]:
    """Atomic sentences over the given constants in canonical order:
    metric atoms first (i < j), then predicate atoms per symbol."""
    out: list[Formula] = []
    for a, i in enumerate(constants):
        for j in constants[a + 1 :]:
            out.append(Dist(Const(i), Const(j)))
    for sym in sig.predicates:
        for args in itertools.product(constants, repeat=sym.arity):
            out.append(Atomic(sym.name, tuple(Const(c) for c in args)))
    return out
