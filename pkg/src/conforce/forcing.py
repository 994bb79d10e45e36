"""Forcing values over condition posets, narrowing, and generic chains.

Three values for a condition p and sentence phi:

  * f_value: the syntactic minimum bound on phi in p (1 when absent);
  * strong_value: the inductive value (atoms from f_value, negation via
    an infimum over extensions, halving/dotplus/join/inf pointwise);
  * weak_value / game_value: one or k rounds of sup-inf over extension
    pools applied to the strong value.

All sup/inf layers range over one shared finite poset: the move-pool
closure of the root condition, with ext(q) = every closure member
extending q. Over such a poset the extra sup-inf layers are idempotent
(the two-step identity), so game_value at any depth >= 1 equals
weak_value exactly; intervals degrade honestly when the exhaustive flag
is off or a scan comes back unknown.

Negation needs inf over *all* extensions; for a scan-friendly fragment
(atoms, halvings, negated atoms, joins, inf-quantifiers of such) it is
computed exactly by bisecting satisfiable thresholds with the oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .values import Dyadic, Interval, ZERO, ONE, dmin, dmax, interval_min
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
    classify,
    constants_of,
    substitute,
)
from .oracle import (
    Condition,
    ConditionError,
    OracleSession,
    PoolBudget,
    SearchBounds,
    Verdict,
)
from .structures import evaluate
from .syntax import canonical_key, formula_key, print_formula


class ForcingError(ValueError):
    pass


def min_sat_threshold(
    session: OracleSession, p: Condition, phi: Formula, b: SearchBounds
) -> Optional[Dyadic]:
    """Least grid threshold tau with p + {phi < tau} satisfiable, ONE when
    no threshold works, None on an unknown verdict. Since satisfiability
    is monotone in tau this is a plain bisection."""
    g = b.grid_exp
    full = 1 << g
    lo, hi = 1, full  # candidate numerators
    best: Optional[int] = None
    while lo <= hi:
        mid = (lo + hi) // 2
        v = session.extend_check(p, [(phi, Dyadic(mid, g))], b)
        if v.is_sat:
            best = mid
            hi = mid - 1
        elif v.kind == "unknown":
            return None
        else:
            lo = mid + 1
    return Dyadic(best, g) if best is not None else ONE


def max_attainable(
    session: OracleSession, p: Condition, phi: Formula, b: SearchBounds
) -> Optional[Dyadic]:
    """Greatest grid value t such that some model of p has phi >= t
    (scanned through bounds on the negation); ZERO when phi vanishes
    everywhere, None on an unknown verdict."""
    g = b.grid_exp
    full = 1 << g
    lo, hi = 1, full
    best = 0
    while lo <= hi:
        mid = (lo + hi) // 2
        tau = Dyadic(full - mid + 1, g)  # Neg(phi) < tau  <=>  phi > mid/2^g - s
        v = session.extend_check(p, [(Neg(phi), tau)], b)
        if v.is_sat:
            best = mid
            lo = mid + 1
        elif v.kind == "unknown":
            return None
        else:
            hi = mid - 1
    return Dyadic(best, g)


@dataclass(frozen=True)
class ForcingBudget:
    pool: PoolBudget = PoolBudget()
    depth: int = 2  # poset closure depth; also the minimax ply count
    exhaustive: bool = False  # poset treated as the full extension space
    search: SearchBounds = SearchBounds()


def f_value(p: Condition, phi: Formula) -> Dyadic:
    """Syntactic minimum bound on phi in p; min over the empty set is 1."""
    return p.canon_map().get(canonical_key(phi), ONE)


def _dualize(phi: Formula) -> Formula:
    if isinstance(phi, Meet):
        return Neg(Join(tuple(Neg(m) for m in phi.members)))
    if isinstance(phi, Sup):
        return Neg(Inf(phi.var, Neg(phi.body)))
    return phi


def _flatten_inf(phi: Inf) -> tuple[list[int], Formula]:
    vars_: list[int] = []
    body: Formula = phi
    while isinstance(body, Inf):
        vars_.append(body.var)
        body = body.body
    return vars_, body


@dataclass(frozen=True)
class ValueReport:
    kind: str
    interval: Interval
    exact: bool
    pool_size: int
    depth: int

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "interval": [str(self.interval.lo), str(self.interval.hi)],
            "exact": self.exact,
            "pool_size": self.pool_size,
            "depth": self.depth,
        }


class EvaluationSpace:
    """A finite poset of conditions closed under the pool budget, shared
    by every sup/inf layer so the minimax identities hold exactly."""

    def __init__(self, session: OracleSession, root: Condition, budget: ForcingBudget):
        self.session = session
        self.budget = budget
        root = root if root.certificate else session.certify(root, budget.search)
        self.root = root
        self.nodes: dict[tuple, Condition] = {}
        self._ext: dict[tuple, list[Condition]] = {}
        self._strong_memo: dict[tuple, Interval] = {}
        self._minforced_memo: dict[tuple, Optional[Dyadic]] = {}

    def _pool_budget(self) -> PoolBudget:
        pb = self.budget.pool
        if pb.bounds is None:
            from dataclasses import replace

            pb = replace(pb, bounds=self.budget.search)
        return pb

    def _ensure_closure(self) -> None:
        # built on demand: scan-fragment evaluations never need the poset
        if self.nodes:
            return
        self.nodes[self.root.key()] = self.root
        frontier = [self.root]
        for _ in range(self.budget.depth):
            nxt = []
            for node in frontier:
                for q in self.session.move_pool(node, self._pool_budget()):
                    if q.key() not in self.nodes:
                        self.nodes[q.key()] = q
                        nxt.append(q)
            frontier = nxt
        ordered = sorted(self.nodes.values(), key=lambda c: c.key())
        for x in ordered:
            self._ext[x.key()] = [y for y in ordered if y.extends(x)]

    def ext(self, p: Condition) -> list[Condition]:
        self._ensure_closure()
        key = p.key()
        if key not in self._ext:
            raise ForcingError("condition is not a node of this space")
        return self._ext[key]

    def size(self) -> int:
        self._ensure_closure()
        return len(self.nodes)

    # -- exact inf over all extensions for the scan-friendly fragment --

    def _min_sat_threshold(self, p: Condition, phi: Formula) -> Optional[Dyadic]:
        return min_sat_threshold(self.session, p, phi, self.budget.search)

    def _max_attainable(self, p: Condition, phi: Formula) -> Optional[Dyadic]:
        return max_attainable(self.session, p, phi, self.budget.search)

    def min_forced(self, p: Condition, phi: Formula) -> Optional[Dyadic]:
        """inf over all extensions q of strong_value(q, phi), exact, for
        the scan-friendly fragment; None when out of fragment or unknown."""
        key = (p.key(), formula_key(phi))
        if key in self._minforced_memo:
            return self._minforced_memo[key]
        out = self._min_forced_inner(p, phi)
        self._minforced_memo[key] = out
        return out

    def _min_forced_inner(self, p: Condition, phi: Formula) -> Optional[Dyadic]:
        phi = _dualize(phi)
        if isinstance(phi, (Atomic, Dist)):
            t = self._min_sat_threshold(p, phi)
            return t
        if isinstance(phi, Neg) and isinstance(phi.sub, (Atomic, Dist)):
            m = self._max_attainable(p, phi.sub)
            if m is None:
                return None
            s = self.budget.search.strictness
            reach = m.try_add(s) or ONE  # sup over extensions of f_q(sub)
            return reach.neg()
        if isinstance(phi, Half):
            sub = self.min_forced(p, phi.sub)
            return None if sub is None else sub.half()
        if isinstance(phi, Join):
            vals = []
            for m in phi.members:
                v = self.min_forced(p, m)
                if v is None:
                    return None
                vals.append(v)
            return dmin(vals)
        if isinstance(phi, Inf):
            vals = []
            for inst in self._inf_instances(p, phi):
                v = self.min_forced(p, inst)
                if v is None:
                    return None
                vals.append(v)
            return dmin(vals)
        return None

    # -- strong value --

    def _inf_instances(self, p: Condition, phi: Inf) -> list[Formula]:
        """Instantiations of a (flattened) inf block over the window:
        condition constants, formula constants, one fresh representative
        per quantified variable."""
        vars_, body = _flatten_inf(phi)
        consts = sorted(set(p.constants()) | constants_of(phi))
        nxt = (max(consts) + 1) if consts else 0
        fresh = list(range(nxt, nxt + len(vars_)))
        window = consts + fresh
        import itertools

        out = []
        for combo in itertools.product(window, repeat=len(vars_)):
            mapping = {v: Const(c) for v, c in zip(vars_, combo)}
            out.append(substitute(body, mapping))
        # dedupe, preserve canonical order
        seen = {}
        for f in out:
            seen.setdefault(formula_key(f), f)
        return [seen[k] for k in sorted(seen)]

    def strong(self, p: Condition, phi: Formula) -> Interval:
        key = (p.key(), formula_key(phi))
        got = self._strong_memo.get(key)
        if got is not None:
            return got
        # seed to cut cycles defensively (not expected on finite formulas)
        out = self._strong_inner(p, phi)
        cap = f_value(p, phi)
        if cap < out.hi:
            # an explicit bound on the whole formula caps every extension
            out = Interval(dmin((out.lo, cap)), cap)
        self._strong_memo[key] = out
        return out

    def _strong_inner(self, p: Condition, phi: Formula) -> Interval:
        phi = _dualize(phi)
        if isinstance(phi, (Atomic, Dist)):
            return Interval.point(f_value(p, phi))
        if isinstance(phi, Neg):
            inner = self._inf_over_extensions(p, phi.sub)
            return inner.neg()
        if isinstance(phi, Half):
            return self.strong(p, phi.sub).half()
        if isinstance(phi, DotPlus):
            return self.strong(p, phi.left).dotplus(self.strong(p, phi.right))
        if isinstance(phi, Join):
            return interval_min(self.strong(p, m) for m in phi.members)
        if isinstance(phi, Inf):
            return interval_min(
                self.strong(p, inst) for inst in self._inf_instances(p, phi)
            )
        raise ForcingError(f"unsupported formula {print_formula(phi)}")

    def _inf_over_extensions(self, p: Condition, phi: Formula) -> Interval:
        exact = self.min_forced(p, phi)
        if exact is not None:
            return Interval.point(exact)
        ivs = [self.strong(q, phi) for q in self.ext(p)]
        hi = dmin(iv.hi for iv in ivs)
        lo = dmin(iv.lo for iv in ivs) if self.budget.exhaustive else ZERO
        if lo > hi:
            lo = hi
        return Interval(lo, hi)

    # -- weak and game values --

    def weak(self, p: Condition, phi: Formula) -> Interval:
        return self._supinf(p, phi, lambda q: self.strong(q, phi))

    def _supinf(self, p: Condition, phi: Formula, base) -> Interval:
        best_lo = None
        best_hi = None
        for q in self.ext(p):
            ivs = [base(q2) for q2 in self.ext(q)]
            lo = dmin(iv.lo for iv in ivs)
            hi = dmin(iv.hi for iv in ivs)
            best_lo = lo if best_lo is None or lo > best_lo else best_lo
            best_hi = hi if best_hi is None or hi > best_hi else best_hi
        if best_lo is None:
            raise ForcingError("empty extension pool")
        return Interval(best_lo, best_hi)

    def game_table(
        self, phi: Formula, depth: Optional[int] = None
    ) -> dict[tuple, Interval]:
        """Game values of phi at every node of the space, keyed by
        Condition.key(). One fixpoint pass serves all nodes."""
        k = self.budget.depth if depth is None else depth
        if k < 1:
            raise ForcingError("game depth must be at least 1")
        self._ensure_closure()
        current: dict[tuple, Interval] = {
            x.key(): self.strong(x, phi) for x in self.nodes.values()
        }
        for _ in range(k):
            nxt: dict[tuple, Interval] = {}
            for x in self.nodes.values():
                best_lo = None
                best_hi = None
                for q in self.ext(x):
                    lo = dmin(current[q2.key()].lo for q2 in self.ext(q))
                    hi = dmin(current[q2.key()].hi for q2 in self.ext(q))
                    best_lo = lo if best_lo is None or lo > best_lo else best_lo
                    best_hi = hi if best_hi is None or hi > best_hi else best_hi
                nxt[x.key()] = Interval(best_lo, best_hi)
            current = nxt
        return current

    def game(self, p: Condition, phi: Formula, depth: Optional[int] = None) -> Interval:
        return self.game_table(phi, depth)[p.key()]

    def report(self, kind: str, iv: Interval, depth: int) -> ValueReport:
        return ValueReport(kind, iv, self.budget.exhaustive, self.size(), depth)


# ---------------------------------------------------------------------------
# public entry points


def strong_value(
    session: OracleSession, p: Condition, phi: Formula, budget: ForcingBudget
) -> Interval:
    return EvaluationSpace(session, p, budget).strong(p, phi)


def weak_value(
    session: OracleSession, p: Condition, phi: Formula, budget: ForcingBudget
) -> Interval:
    space = EvaluationSpace(session, p, budget)
    return space.weak(space.root, phi)


def game_value(
    session: OracleSession, p: Condition, phi: Formula, budget: ForcingBudget
) -> Interval:
    space = EvaluationSpace(session, p, budget)
    return space.game(space.root, phi)


def companion_value(
    session: OracleSession, sentence: Formula, budget: ForcingBudget
) -> ValueReport:
    """Game value of a sentence at the empty condition."""
    from .oracle import EMPTY_CONDITION

    space = EvaluationSpace(session, EMPTY_CONDITION, budget)
    iv = space.game(space.root, sentence)
    return space.report("game", iv, budget.depth)


def value_report(
    session: OracleSession,
    p: Condition,
    phi: Formula,
    kind: str = "weak",
    depth: int = 2,
    exhaustive: bool = True,
) -> dict:
    """One forcing-value report document, shared by every front end so
    identical inputs serialize to identical bytes."""
    budget = ForcingBudget(depth=depth, exhaustive=exhaustive, search=session.default_bounds)
    space = EvaluationSpace(session, p, budget)
    fn = {"strong": space.strong, "weak": space.weak, "game": space.game}[kind]
    iv = fn(space.root, phi)
    return space.report(kind, iv, depth).to_json()


# ---------------------------------------------------------------------------
# narrowing


@dataclass(frozen=True)
class NarrowResult:
    condition: Condition
    interval: Interval


class NarrowError(ForcingError):
    pass


def narrow(
    session: OracleSession,
    p: Condition,
    phi: Formula,
    eps: Dyadic,
    search: Optional[SearchBounds] = None,
) -> NarrowResult:
    """Extend p so the value of phi is pinned inside an interval of width
    strictly below eps (the certificate witness value always lies inside).
    Works by structural induction; inf blocks must have quantifier-free
    matrices, which covers every restricted sentence of depth <= 2."""
    if not (ZERO < eps):
        raise NarrowError("eps must be positive")
    b = search or session.default_bounds
    q = p if p.certificate else session.certify(p, b)
    cond, iv = _narrow_rec(session, q, phi, eps, b)
    return NarrowResult(cond, iv)


def _narrow_rec(
    session: OracleSession,
    p: Condition,
    phi: Formula,
    eps: Dyadic,
    b: SearchBounds,
) -> tuple[Condition, Interval]:
    phi = _dualize(phi)
    if isinstance(phi, (Atomic, Dist)):
        return _narrow_atomic(session, p, phi, eps, b)
    if isinstance(phi, Neg):
        q, iv = _narrow_rec(session, p, phi.sub, eps, b)
        return q, iv.neg()
    if isinstance(phi, Half):
        q, iv = _narrow_rec(session, p, phi.sub, eps, b)
        return q, iv.half()
    if isinstance(phi, DotPlus):
        half_eps = eps.half()
        q1, iv1 = _narrow_rec(session, p, phi.left, half_eps, b)
        q2, iv2 = _narrow_rec(session, q1, phi.right, half_eps, b)
        return q2, iv1.dotplus(iv2)
    if isinstance(phi, Join):
        cur = p
        ivs = []
        for m in phi.members:
            cur, iv = _narrow_rec(session, cur, m, eps, b)
            ivs.append(iv)
        return cur, interval_min(ivs)
    if isinstance(phi, Inf):
        return _narrow_inf(session, p, phi, eps, b)
    raise NarrowError(f"cannot narrow {print_formula(phi)}")


def _narrow_atomic(
    session: OracleSession,
    p: Condition,
    alpha: Formula,
    eps: Dyadic,
    b: SearchBounds,
) -> tuple[Condition, Interval]:
    w = p.certificate.witness
    missing = [c for c in sorted(constants_of(alpha)) if c not in w.constants]
    if missing:
        # read a value off some expansion: min(a, 1-a) < 1 never excludes
        # anything, so the probe only asks the oracle to place constants
        probe = (Join((alpha, Neg(alpha))), ONE)
        v = session.extend_check(p, [probe], b)
        if not v.is_sat:
            raise NarrowError(f"cannot interpret constants for {print_formula(alpha)}")
        w = v.witness
    val = evaluate(alpha, w)
    tau = eps.half().half()
    additions: list[tuple[Formula, Dyadic]] = []
    up = val.try_add(tau)
    if up is not None:
        additions.append((alpha, up))
        hi = up
    else:
        hi = ONE
    down = val.neg().try_add(tau)
    if down is not None:
        additions.append((Neg(alpha), down))
        lo = down.neg()
    else:
        lo = ZERO
    verdict = session.extend_check(p, additions, b, hint=w)
    if not verdict.is_sat:
        raise NarrowError(f"could not certify pin of {print_formula(alpha)}")
    return Condition(p.extend(additions).bounds, verdict), Interval(lo, hi)


def _narrow_inf(
    session: OracleSession,
    p: Condition,
    phi: Inf,
    eps: Dyadic,
    b: SearchBounds,
) -> tuple[Condition, Interval]:
    vars_, body = _flatten_inf(phi)
    if not classify(body).quantifier_free:
        raise NarrowError("inf matrix must be quantifier-free at desk scale")
    s = b.strictness
    if not (s < eps):
        raise NarrowError("grid too coarse for the requested width")
    consts = sorted(set(p.constants()) | constants_of(phi))
    nxt = (max(consts) + 1) if consts else 0
    fresh = {v: Const(nxt + i) for i, v in enumerate(vars_)}
    inst = substitute(body, fresh)
    # least satisfiable strict threshold for a fresh instance: below it,
    # no extension can ever drive the inf (unsat is inherited upward)
    g = b.grid_exp
    full = 1 << g
    lo_k, hi_k = 1, full
    best = None
    while lo_k <= hi_k:
        mid = (lo_k + hi_k) // 2
        v = session.extend_check(p, [(inst, Dyadic(mid, g))], b)
        if v.is_sat:
            best = mid
            hi_k = mid - 1
        elif v.kind == "unknown":
            raise NarrowError("oracle budget too small to scan the inf floor")
        else:
            lo_k = mid + 1
    if best is None:
        # every model keeps the matrix at 1 - s or above everywhere
        return p, Interval(ONE.dotminus(s), ONE)
    vstar = Dyadic(best, g)
    verdict = session.extend_check(p, [(inst, vstar)], b)
    q = Condition(p.extend([(inst, vstar)]).bounds, verdict)
    return q, Interval(vstar.dotminus(s), vstar)


# ---------------------------------------------------------------------------
# generic chains


@dataclass
class GenericChain:
    theory_name: str
    members: list[Condition]
    schedule: list[tuple[Formula, int]]
    gaps: list[tuple[str, Interval, Interval, Dyadic]] = field(default_factory=list)

    def end(self) -> Condition:
        return self.members[-1]


def build_generic(
    session: OracleSession,
    seed: Condition,
    schedule: Sequence[tuple[Formula, int]],
    budget: ForcingBudget,
) -> GenericChain:
    """Service each scheduled (sentence, j) in order: narrow the sentence
    to width below 2^-(j+1), then record the strong-value gap
    F(phi) + F(~phi), which must stay below 1 + 2^-j."""
    start = seed if seed.certificate else session.certify(seed, budget.search)
    chain = GenericChain(session.theory.name, [start], list(schedule))
    for phi, j in schedule:
        eps = Dyadic(1, j + 1)
        res = narrow(session, chain.end(), phi, eps, budget.search)
        chain.members.append(res.condition)
        space = EvaluationSpace(session, res.condition, budget)
        pos = space.strong(space.root, phi)
        neg = space.strong(space.root, Neg(phi))
        gap = pos.hi.dotplus(neg.hi)  # saturating record; the true check
        chain.gaps.append((print_formula(phi), pos, neg, gap))
    return chain


@dataclass(frozen=True)
class CompiledApprox:
    """Approximate model read off a condition: per-tracked-sentence value
    intervals plus the certificate witness realizing them."""

    entries: tuple[tuple[str, Interval], ...]
    witness: "object"  # FiniteStructure; kept loose to avoid import cycles
    flags: tuple[str, ...] = ()

    def get(self, phi: "Formula | str") -> Optional[Interval]:
        key = phi if isinstance(phi, str) else canonical_key(phi)
        for k, iv in self.entries:
            if k == key:
                return iv
        return None

    def interval_for(self, phi: "Formula | str") -> Interval:
        iv = self.get(phi)
        if iv is None:
            raise KeyError(phi if isinstance(phi, str) else canonical_key(phi))
        return iv

    def to_json(self) -> dict:
        return {
            "entries": {k: [str(iv.lo), str(iv.hi)] for k, iv in self.entries},
            "flags": list(self.flags),
        }


def compile_condition(p: Condition, tracked: Sequence[Formula]) -> CompiledApprox:
    """Intervals [1 - f(~phi), f(phi)] for each tracked sentence, checked
    against the certificate witness. Sentences never bounded stay full."""
    if p.certificate is None or not p.certificate.is_sat:
        raise ForcingError("condition carries no satisfiability certificate")
    w = p.certificate.witness
    entries = []
    flags = []
    for phi in tracked:
        hi = f_value(p, phi)
        lo = f_value(p, Neg(phi)).neg()
        if lo > hi:
            raise ForcingError(f"inconsistent pin on {print_formula(phi)}")
        iv = Interval(lo, hi)
        key = canonical_key(phi)
        try:
            val = evaluate(phi, w)
        except Exception:
            flags.append(f"unevaluated:{key}")
            entries.append((key, iv))
            continue
        if not iv.contains(val):
            raise ForcingError(f"witness escapes pinned interval for {key}")
        if iv.lo == ZERO and iv.hi == ONE:
            flags.append(f"unpinned:{key}")
        entries.append((key, iv))
    return CompiledApprox(tuple(entries), w, tuple(flags))


def compile_generic_model(
    chain: GenericChain, tracked: Sequence[Formula]
) -> CompiledApprox:
    return compile_condition(chain.end(), tracked)


def generic_gap_ok(chain: GenericChain) -> bool:
    for (text, pos, neg, _), (phi, j) in zip(chain.gaps, chain.schedule):
        # untruncated comparison: F(phi) + F(~phi) < 1 + 2^-j
        e = max(pos.hi.exp, neg.hi.exp, j)
        total = (pos.hi.num << (e - pos.hi.exp)) + (neg.hi.num << (e - neg.hi.exp))
        limit = (1 << e) + (1 << (e - j))
        if not (total < limit):
            return False
    return True
