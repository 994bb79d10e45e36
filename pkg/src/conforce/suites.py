"""Named verification suites.

Each suite exercises one headline property of the engine at a fixed,
seed-reproducible scale and returns a SuiteReport. The CLI `verify`
command and the acceptance tests both run these functions, so a pass on
the command line and a pass under pytest mean the same thing. Report
bodies carry no timestamps: identical inputs give identical bytes.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .values import Dyadic, Interval, ZERO, ONE, HALF
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
    constants_of,
    rename_constants,
)
from .structures import FiniteStructure, evaluate, generated_substructure, validate_structure
from .oracle import (
    Condition,
    EMPTY_CONDITION,
    OracleSession,
    PoolBudget,
    SearchBounds,
    Theory,
)
from .forcing import (
    EvaluationSpace,
    ForcingBudget,
    build_generic,
    compile_condition,
    compile_generic_model,
    generic_gap_ok,
    narrow,
    NarrowError,
    weak_value,
)
from .game import (
    MischiefStrategy,
    RandomLegalStrategy,
    StallStrategy,
    conjoin,
    lca_address,
    lift_pairwise,
    play,
    play_splitting,
    splitting_leaves,
)
from .enforcers import (
    backforth_compare,
    enforce_ec,
    enforce_extra_canonical,
    enforce_finite_generic,
    enforce_universal,
    graph_extension_family,
    ledger_done,
    metric_extension_family,
    service_ledger,
)
from .syntax import parse_formula, print_formula
from .packs import graphs, metric


@dataclass(frozen=True)
class SuiteReport:
    name: str
    passed: bool
    checks: int
    detail: str
    failures: tuple[str, ...] = ()

    def line(self) -> str:
        word = "PASS" if self.passed else "FAIL"
        return f"[{self.name}] {word} ({self.checks} checks) {self.detail}"

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "checks": self.checks,
            "detail": self.detail,
            "failures": list(self.failures),
        }


def _report(name: str, checks: int, failures: list[str], detail: str) -> SuiteReport:
    return SuiteReport(
        name=name,
        passed=not failures,
        checks=checks,
        detail=detail if not failures else f"{detail}; first: {failures[0]}",
        failures=tuple(failures[:20]),
    )


# ---------------------------------------------------------------------------
# random instance generation for the forcing-value suites


def _rand_atom(rng: random.Random, sig, consts: Sequence[int], var: Optional[int] = None) -> Formula:
    terms = [Const(c) for c in consts]
    if var is not None:
        terms.append(Var(var))
    preds = sorted(sig.predicates, key=lambda s: s.name)
    if preds and rng.random() < 0.6:
        sym = preds[rng.randrange(len(preds))]
        args = tuple(terms[rng.randrange(len(terms))] for _ in range(sym.arity))
        if var is not None and not any(isinstance(t, Var) for t in args):
            args = args[:-1] + (Var(var),)
        return Atomic(sym.name, args)
    a = terms[rng.randrange(len(terms))]
    b = terms[rng.randrange(len(terms))]
    if var is not None and not (isinstance(a, Var) or isinstance(b, Var)):
        b = Var(var)
    return Dist(a, b)


def _rand_formula(
    rng: random.Random, sig, consts: Sequence[int], depth: int, var: Optional[int] = None
) -> Formula:
    if depth == 0:
        return _rand_atom(rng, sig, consts, var)
    r = rng.random()
    if r < 0.18:
        return Neg(_rand_formula(rng, sig, consts, depth - 1, var))
    if r < 0.32:
        return Half(_rand_formula(rng, sig, consts, depth - 1, var))
    if r < 0.46:
        return DotPlus(
            _rand_formula(rng, sig, consts, depth - 1, var),
            _rand_formula(rng, sig, consts, depth - 1, var),
        )
    if r < 0.58:
        return Join(
            (
                _rand_formula(rng, sig, consts, depth - 1, var),
                _rand_formula(rng, sig, consts, depth - 1, var),
            )
        )
    if r < 0.70:
        return Meet(
            (
                _rand_formula(rng, sig, consts, depth - 1, var),
                _rand_formula(rng, sig, consts, depth - 1, var),
            )
        )
    if var is None:
        body = _rand_formula(rng, sig, consts, depth - 1, var=0)
        return Inf(0, body) if rng.random() < 0.5 else Sup(0, body)
    return _rand_atom(rng, sig, consts, var)


_COND_THRESHOLDS = (HALF, Dyadic(1, 2), Dyadic(3, 2), ONE)


def _rand_condition(
    rng: random.Random,
    session: OracleSession,
    consts: Sequence[int],
    min_bounds: int = 0,
) -> Condition:
    """A small certified condition over the given constants (possibly
    empty). Unsat rolls are discarded, so the draw is rejection-sampled
    but still deterministic in the rng."""
    for _ in range(12):
        pairs = []
        for _ in range(rng.randrange(min_bounds, 3)):
            phi = _rand_atom(rng, session.theory.sig, consts)
            if rng.random() < 0.5:
                phi = Neg(phi)
            pairs.append((phi, _COND_THRESHOLDS[rng.randrange(len(_COND_THRESHOLDS))]))
        cand = Condition.make(pairs)
        v = session.check(cand)
        if v.is_sat:
            return Condition.make(pairs, v)
    return Condition((), session.check(EMPTY_CONDITION))


@dataclass
class _TinyInstance:
    pack: str
    session: OracleSession
    condition: Condition
    formula: Formula
    budget: ForcingBudget


def _tiny_instances(seed: int, count: int) -> list[_TinyInstance]:
    """Seeded instances for the coincidence-flavored suites: both theory
    packs, at most 3 constants, formula depth at most 2, exhaustive move
    pools of size at most 8, recursion depth 3."""
    sessions = {
        "graphs": OracleSession(graphs(), SearchBounds(max_universe=4, grid_exp=1)),
        "metric": OracleSession(metric(), SearchBounds(max_universe=4, grid_exp=2)),
    }
    out = []
    i = 0
    while len(out) < count:
        rng = random.Random(seed * 9_999_991 + i)
        i += 1
        pack = "graphs" if rng.random() < 0.5 else "metric"
        session = sessions[pack]
        consts = list(range(1 + rng.randrange(3)))
        p = _rand_condition(rng, session, consts)
        phi = _rand_formula(rng, session.theory.sig, consts, depth=rng.randrange(3))
        budget = ForcingBudget(
            pool=PoolBudget(
                fresh=2, atoms=3, thresholds=(HALF,), both_polarities=True, max_pool=8
            ),
            depth=3,
            exhaustive=True,
            search=session.default_bounds,
        )
        out.append(_TinyInstance(pack, session, p, phi, budget))
    return out


# ---------------------------------------------------------------------------
# forcing-value suites


def suite_coincidence(seed: int = 7, count: int = 200) -> SuiteReport:
    """Weak and game forcing values agree exactly (as point intervals) on
    exhaustively pooled tiny instances."""
    failures: list[str] = []
    for k, inst in enumerate(_tiny_instances(seed, count)):
        w = weak_value(inst.session, inst.condition, inst.formula, inst.budget)
        space = EvaluationSpace(inst.session, inst.condition, inst.budget)
        g = space.game(space.root, inst.formula)
        if w.lo != w.hi or g.lo != g.hi or w != g:
            failures.append(
                f"#{k} {inst.pack} {print_formula(inst.formula)}: weak={w} game={g}"
            )
    return _report(
        "coincidence", count, failures, f"{count} instances, both packs, pools <= 8"
    )


def suite_monotonicity(seed: int = 7, count: int = 200) -> SuiteReport:
    """Game value upper endpoints never grow along pool extensions."""
    failures: list[str] = []
    checks = 0
    for k, inst in enumerate(_tiny_instances(seed, count)):
        space = EvaluationSpace(inst.session, inst.condition, inst.budget)
        table = space.game_table(inst.formula)
        top = table[space.root.key()].hi
        for q in space.ext(space.root):
            checks += 1
            sub = table[q.key()].hi
            if not (sub <= top):
                failures.append(
                    f"#{k} {inst.pack} {print_formula(inst.formula)}: {sub} > {top}"
                )
    return _report(
        "monotonicity", checks, failures, f"{count} instances, every pool extension"
    )


def _homog_instances(seed: int, count: int) -> list[_TinyInstance]:
    """Triples for the homogeneity suite: conditions over at most two
    constants with complete (untruncated) move pools, since only a pool
    enumerated in full is exactly equivariant under renaming."""
    sessions = {
        "graphs": OracleSession(graphs(), SearchBounds(max_universe=4, grid_exp=1)),
        "metric": OracleSession(metric(), SearchBounds(max_universe=4, grid_exp=2)),
    }
    out = []
    for i in range(count):
        rng = random.Random(seed * 4_999_999 + i)
        pack = "graphs" if rng.random() < 0.5 else "metric"
        session = sessions[pack]
        consts = list(range(1 + rng.randrange(2)))
        p = _rand_condition(rng, session, consts, min_bounds=1)
        phi = _rand_formula(rng, session.theory.sig, consts, depth=rng.randrange(3))
        budget = ForcingBudget(
            pool=PoolBudget(fresh=0, atoms=999, thresholds=(HALF,), both_polarities=True),
            depth=3,
            exhaustive=True,
            search=session.default_bounds,
        )
        out.append(_TinyInstance(pack, session, p, phi, budget))
    return out


def suite_homogeneity(seed: int = 11, count: int = 100) -> SuiteReport:
    """Game values are invariant under witness-constant permutations."""
    failures: list[str] = []
    for k, inst in enumerate(_homog_instances(seed, count)):
        rng = random.Random(seed * 31_337 + k)
        image = list(range(6))
        rng.shuffle(image)
        perm = dict(zip(range(6), image))
        space = EvaluationSpace(inst.session, inst.condition, inst.budget)
        base = space.game(space.root, inst.formula)
        moved_p = inst.session.certify(inst.condition.rename(perm))
        moved_phi = rename_constants(inst.formula, perm)
        moved_space = EvaluationSpace(inst.session, moved_p, inst.budget)
        moved = moved_space.game(moved_space.root, moved_phi)
        if base != moved:
            failures.append(
                f"#{k} {inst.pack} {print_formula(inst.formula)}: {base} vs {moved} under {perm}"
            )
    return _report("homogeneity", count, failures, f"{count} permuted triples")


# ---------------------------------------------------------------------------
# narrowing


def _narrowing_sentences(sig) -> list[Formula]:
    """Deterministic capped enumeration of depth <= 2 sentences over the
    first three constants: every structural shape appears, atom choices
    rotate through the pool."""
    E = lambda i, j: Atomic("E", (Const(i), Const(j)))
    d = lambda i, j: Dist(Const(i), Const(j))
    atoms: list[Formula] = [E(0, 1), E(1, 2), E(0, 2), d(0, 1), d(1, 2), d(0, 2)]
    a = lambda i: atoms[i % len(atoms)]
    out: list[Formula] = list(atoms)
    for i in range(len(atoms)):
        out.append(Neg(a(i)))
        out.append(Half(a(i)))
    for i in range(3):
        out.append(DotPlus(a(i), a(i + 1)))
        out.append(Join((a(i), a(i + 2))))
        out.append(Meet((a(i), a(i + 4))))
    out.append(Inf(0, Atomic("E", (Var(0), Const(0)))))
    out.append(Sup(0, Neg(Atomic("E", (Var(0), Const(1))))))
    # depth-2 composites
    out.append(Neg(Half(a(0))))
    out.append(Half(Neg(a(1))))
    out.append(Half(DotPlus(a(2), a(3))))
    out.append(DotPlus(Neg(a(4)), a(5)))
    out.append(Join((Neg(a(0)), Half(a(2)))))
    out.append(Meet((Half(a(1)), Neg(a(3)))))
    out.append(Neg(Inf(0, Atomic("E", (Var(0), Const(2))))))
    out.append(Inf(0, DotPlus(Atomic("E", (Var(0), Const(0))), Atomic("E", (Var(0), Const(1))))))
    out.append(Inf(0, Join((Atomic("E", (Var(0), Const(0))), Atomic("E", (Var(0), Const(2)))))))
    out.append(Sup(0, Meet((Neg(Atomic("E", (Var(0), Const(1)))), Atomic("E", (Var(0), Const(0)))))))
    return out


def _narrowing_seeds(session: OracleSession) -> list[Condition]:
    E = lambda i, j: Atomic("E", (Const(i), Const(j)))
    raw: list[list[tuple[Formula, Dyadic]]] = [
        [],
        [(E(0, 1), HALF)],
        [(Neg(E(0, 1)), HALF)],
        [(E(0, 1), HALF), (E(1, 2), HALF)],
        [(E(0, 1), HALF), (Neg(E(0, 2)), HALF)],
        [(Neg(E(0, 1)), HALF), (Neg(E(1, 2)), HALF)],
        [(E(0, 2), HALF), (E(1, 2), HALF), (Neg(E(0, 1)), HALF)],
        [(E(0, 1), Dyadic(1, 2))],
        [(Neg(E(2, 3)), HALF)],
        [(E(0, 3), HALF), (E(1, 3), HALF)],
    ]
    return [Condition.make(pairs, session.check(Condition.make(pairs))) for pairs in raw]


def suite_narrowing(seed: int = 0, eps: Dyadic = Dyadic(1, 3)) -> SuiteReport:
    """narrow() pins every capped depth <= 2 sentence below the requested
    width from each of ten seed conditions, and the weak value of the
    result stays inside the pinned interval up to one grid step."""
    session = OracleSession(graphs(), SearchBounds(max_universe=5, grid_exp=6))
    step = session.default_bounds.strictness
    sentences = _narrowing_sentences(session.theory.sig)
    seeds = _narrowing_seeds(session)
    budget = ForcingBudget(
        pool=PoolBudget(fresh=0, atoms=1, thresholds=(HALF,), both_polarities=True),
        depth=2,
        exhaustive=True,
        search=session.default_bounds,
    )
    failures: list[str] = []
    checks = 0
    for si, p in enumerate(seeds):
        for phi in sentences:
            checks += 1
            label = f"seed#{si} {print_formula(phi)}"
            try:
                res = narrow(session, p, phi, eps)
            except NarrowError as e:
                failures.append(f"{label}: narrow error {e}")
                continue
            if not (res.interval.width() < eps):
                failures.append(f"{label}: width {res.interval.width()} >= {eps}")
                continue
            wv = weak_value(session, res.condition, phi, budget)
            lo_ok = wv.lo >= res.interval.lo.dotminus(step)
            hi_ok = wv.hi <= res.interval.hi.dotplus(step)
            if not (lo_ok and hi_ok):
                failures.append(f"{label}: weak {wv} outside {res.interval}")
    return _report(
        "narrowing",
        checks,
        failures,
        f"{len(sentences)} sentences x {len(seeds)} seed conditions, eps {eps}",
    )


# ---------------------------------------------------------------------------
# enforcement runs


def _graph_adversary(seed: int, session: OracleSession):
    E = lambda i, j: Atomic("E", (Const(i), Const(j)))
    tracked = [
        Inf(0, Atomic("E", (Var(0), Const(0)))),
        Inf(0, Meet((Atomic("E", (Var(0), Const(1))), Neg(Atomic("E", (Var(0), Const(2))))))),
    ]
    pool = PoolBudget(bounds=SearchBounds(max_universe=12, grid_exp=1, node_budget=4000))
    return MischiefStrategy(tracked=tracked, pool=pool)


def suite_graph_enforcement(seed: int = 3, rounds: int = 200) -> SuiteReport:
    """The canonical + universal + extension-demand stack, played against
    the mischief adversary on the classical graph pack, compiles a graph
    whose named part realizes every one-point extension instance over the
    first six constants and satisfies both graph axioms exactly."""
    theory = graphs()
    session = OracleSession(theory, SearchBounds(max_universe=40, grid_exp=1))
    fam = graph_extension_family(range(6), max_size=3)
    strat = conjoin(
        enforce_extra_canonical([(0, HALF, 1), (2, HALF, 1)]),
        enforce_universal(theory, thresholds=(HALF,)),
        enforce_ec(theory, fam, thresholds=(HALF,)),
    )
    adversary = _graph_adversary(seed, session)
    t = play(session, EMPTY_CONDITION, adversary, strat, rounds)
    final = t.final()
    failures: list[str] = []
    led = service_ledger(strat, session, final)
    pending = [e for e in led if e.state != "done"]
    if pending:
        failures.append(f"{len(pending)} ledger items not done: {pending[0].key}")
    w = final.certificate.witness
    g = generated_substructure(w, sorted(w.constants))
    first6 = sorted({g.constant(c) for c in range(6) if c in g.constants})
    checks = len(led)
    for size in (1, 2, 3):
        for combo in itertools.combinations(first6, size):
            for asz in range(size + 1):
                for A in itertools.combinations(combo, asz):
                    B = tuple(x for x in combo if x not in A)
                    checks += 1
                    ok = any(
                        z not in combo
                        and all(g.pred_value("E", (x, z)) == ZERO for x in A)
                        and all(g.pred_value("E", (y, z)) != ZERO for y in B)
                        for z in range(g.n)
                    )
                    if not ok:
                        failures.append(f"unrealized extension A={A} B={B}")
    for ax in theory.axioms:
        checks += 1
        if evaluate(ax, g) != ZERO:
            failures.append(f"axiom {print_formula(ax)} nonzero on compiled graph")
    return _report(
        "graph-enforcement",
        checks,
        failures,
        f"{rounds} rounds vs mischief, named graph n={g.n}",
    )


def suite_metric_enforcement(seed: int = 3, rounds: int = 200) -> SuiteReport:
    """Same stack on the metric pack at grid 1/16: every admissible
    one-point extension of the four pinned unit-square constants is
    realized by some named point within 1/8."""
    theory = metric()
    session = OracleSession(theory, SearchBounds(max_universe=40, grid_exp=4))
    fam = metric_extension_family(range(4), ONE, grid_exp=2, tol=Dyadic(1, 4))
    strat = conjoin(
        enforce_extra_canonical([(0, Dyadic(1, 2), 1)]),
        enforce_universal(theory),
        enforce_ec(theory, fam),
    )
    tracked = [Inf(0, Dist(Const(0), Var(0))), Inf(0, Neg(Dist(Const(1), Var(0))))]
    adversary = MischiefStrategy(
        tracked=tracked,
        pool=PoolBudget(bounds=SearchBounds(max_universe=12, grid_exp=4, node_budget=4000)),
    )
    t = play(session, EMPTY_CONDITION, adversary, strat, rounds)
    final = t.final()
    failures: list[str] = []
    led = service_ledger(strat, session, final)
    pending = [e for e in led if e.state != "done"]
    if pending:
        failures.append(f"{len(pending)} ledger items not done: {pending[0].key}")
    w = final.certificate.witness
    centers = [w.constant(c) for c in range(4) if c in w.constants]
    checks = len(led)
    if len(centers) < 4:
        failures.append(f"only {len(centers)} of the 4 centers interpreted")
        return _report("metric-enforcement", checks, failures, f"{rounds} rounds vs mischief")
    named = sorted(set(w.constants.values()))
    den = w.denominator
    full = 16  # demands live on the 1/16 grid whatever the witness grid is
    tol = 2 * den  # 1/8, cross-multiplied to units of 1/(16*den)
    count = 0
    worst = 0
    for u in itertools.product(range(full + 1), repeat=4):
        admissible = all(
            u[i] + u[j] >= full for i, j in itertools.combinations(range(4), 2)
        )
        if not admissible:
            continue
        count += 1
        best = min(
            max(abs(full * w.metric[e][centers[i]] - u[i] * den) for i in range(4))
            for e in named
        )
        worst = max(worst, best)
        if best > tol:
            failures.append(f"extension {u} realized only within {best}/{full * den}")
    checks += count
    detailbits = (
        f"worst realization error {worst}/{full * den}"
        if not failures
        else "unrealized extensions found"
    )
    return _report(
        "metric-enforcement",
        checks,
        failures,
        f"{rounds} rounds vs mischief, {count} grid extensions, {detailbits}",
    )


# ---------------------------------------------------------------------------
# generic model, conjunction, splitting, back-and-forth


def _generic_schedule() -> list[tuple[Formula, int]]:
    E = lambda i, j: Atomic("E", (Const(i), Const(j)))
    sentences = [
        E(0, 1),
        Neg(E(0, 2)),
        E(1, 2),
        Half(E(0, 1)),
        Inf(0, Atomic("E", (Var(0), Const(0)))),
        DotPlus(E(0, 1), E(0, 2)),
    ]
    return [(phi, 4) for phi in sentences]


def suite_generic_model(seed: int = 0) -> SuiteReport:
    """build_generic services a six-sentence schedule at gap tolerance
    1 + 1/16; the compiled model's value for every tracked sentence lies
    in its chain-forced interval."""
    session = OracleSession(graphs(), SearchBounds(max_universe=5, grid_exp=8))
    budget = ForcingBudget(
        pool=PoolBudget(fresh=0, atoms=1, thresholds=(HALF,), both_polarities=True),
        depth=2,
        exhaustive=True,
        search=session.default_bounds,
    )
    schedule = _generic_schedule()
    failures: list[str] = []
    chain = build_generic(session, EMPTY_CONDITION, schedule, budget)
    checks = len(schedule)
    if not generic_gap_ok(chain):
        gaps = [(t, str(pos.hi), str(neg.hi)) for t, pos, neg, _ in chain.gaps]
        failures.append(f"gap bound violated: {gaps}")
    tracked = [phi for phi, _ in schedule]
    compiled = compile_generic_model(chain, tracked)
    for phi in tracked:
        checks += 1
        iv = compiled.interval_for(phi)
        v = evaluate(phi, compiled.witness)
        if not (iv.lo <= v <= iv.hi):
            failures.append(f"{print_formula(phi)}: value {v} outside {iv}")
    return _report(
        "generic-model",
        checks,
        failures,
        f"6-sentence schedule at j=4, chain length {len(chain.members)}",
    )


def suite_conjunction(seed: int = 5, plays: int = 50) -> SuiteReport:
    """Two single-atom pinning strategies that separately finish within 4
    rounds are jointly finished by conjoin within 8 rounds against the
    seeded random-legal adversary."""
    theory = graphs()
    eps = Dyadic(1, 3)
    E = lambda i, j: Atomic("E", (Const(i), Const(j)))
    failures: list[str] = []
    checks = 0

    def pin_a():
        return enforce_finite_generic([(E(0, 1), eps)])

    def pin_b():
        return enforce_finite_generic([(E(0, 2), eps)])

    session = OracleSession(theory, SearchBounds(max_universe=5, grid_exp=5))
    for make, tag in ((pin_a, "first"), (pin_b, "second")):
        checks += 1
        s = make()
        t = play(session, EMPTY_CONDITION, RandomLegalStrategy(seed), s, rounds=4)
        if not ledger_done(service_ledger(s, session, t.final())):
            failures.append(f"{tag} strategy alone not done in 4 rounds")
    for k in range(plays):
        checks += 1
        s = conjoin(pin_a(), pin_b())
        t = play(session, EMPTY_CONDITION, RandomLegalStrategy(seed + k), s, rounds=8)
        if not ledger_done(service_ledger(s, session, t.final())):
            failures.append(f"conjoined not done in 8 rounds at seed {seed + k}")
    return _report(
        "conjunction", checks, failures, f"{plays} conjoined plays, 8 rounds each"
    )


def suite_splitting(seed: int = 0, levels: int = 3) -> SuiteReport:
    """Depth-3 splitting play under the pairwise-lifted opposite-atom
    strategy: 8 leaves, verbatim shared prefixes, and every unordered
    leaf pair differs on its split atom."""
    session = OracleSession(graphs(), SearchBounds(max_universe=8, grid_exp=1))
    atom_of = lambda base: Atomic("E", (Const(base), Const(base + 1)))
    nodes = play_splitting(session, EMPTY_CONDITION, lift_pairwise(atom_of), levels)
    leaves = splitting_leaves(nodes, levels)
    failures: list[str] = []
    checks = 1
    if len(leaves) != 2 ** levels:
        failures.append(f"expected {2 ** levels} leaves, got {len(leaves)}")
    for addr, node in nodes.items():
        if addr == "":
            continue
        checks += 1
        parent = nodes[addr[:-1]]
        if not node.condition.extends(parent.condition):
            failures.append(f"node {addr} does not extend its parent verbatim")
    root_atom = nodes[""].atom_key
    if root_atom != print_formula(atom_of(0)):
        failures.append(f"root split atom is {root_atom}")
    sig = session.theory.sig
    keys = sorted({n.atom_key for n in nodes.values() if n.atom_key is not None})
    tracked = {k: parse_formula(k, sig) for k in keys}
    values: dict[str, dict[str, Dyadic]] = {}
    for leaf in leaves:
        compiled = compile_condition(leaf.condition, list(tracked.values()))
        values[leaf.address] = {
            k: evaluate(phi, compiled.witness) for k, phi in tracked.items()
        }
    pairs = 0
    for x, y in itertools.combinations(leaves, 2):
        pairs += 1
        checks += 1
        key = nodes[lca_address(x.address, y.address)].atom_key
        if key is None or values[x.address][key] == values[y.address][key]:
            failures.append(f"leaves {x.address},{y.address} agree on split atom {key}")
    return _report(
        "splitting", checks, failures, f"{len(leaves)} leaves, {pairs} leaf pairs"
    )


def _enforcement_run(session: OracleSession, seed: int, rounds: int):
    theory = session.theory
    fam = graph_extension_family(range(4), max_size=2)
    strat = conjoin(
        enforce_extra_canonical([(0, HALF, 1)]),
        enforce_universal(theory, thresholds=(HALF,)),
        enforce_ec(theory, fam, thresholds=(HALF,)),
    )
    t = play(session, EMPTY_CONDITION, RandomLegalStrategy(seed), strat, rounds)
    return t


def suite_backforth(seed: int = 13, rounds: int = 60) -> SuiteReport:
    """Two independent enforcement runs admit a depth-4 exact partial
    isomorphism; a run against an edgeless compilation fails with an
    existential-type witness."""
    theory = graphs()
    E = lambda i, j: Atomic("E", (Const(i), Const(j)))
    tracked = [E(i, j) for i in range(4) for j in range(4) if i < j]
    failures: list[str] = []
    checks = 0
    sides = []
    for s in (seed, seed + 1):
        session = OracleSession(theory, SearchBounds(max_universe=24, grid_exp=1))
        t = _enforcement_run(session, s, rounds)
        sides.append(compile_condition(t.final(), tracked))
    checks += 1
    res = backforth_compare(sides[0], sides[1], depth=4, eps=ZERO)
    if not res.ok:
        failures.append(f"independent runs unmatched: {res.failure}")
    session = OracleSession(theory, SearchBounds(max_universe=8, grid_exp=1))
    edgeless = Condition.make([(Neg(E(i, j)), HALF) for i in range(4) for j in range(i + 1, 4)])
    edgeless = Condition.make(edgeless.bounds, session.check(edgeless))
    checks += 1
    flat = compile_condition(edgeless, tracked)
    res2 = backforth_compare(sides[0], flat, depth=4, eps=ZERO)
    if res2.ok:
        failures.append("edgeless compilation matched a generic run")
    elif res2.failure is None or "etype" not in res2.failure:
        failures.append("failure carries no etype witness")
    return _report(
        "backforth", checks, failures, f"two runs at {rounds} rounds, depth 4, eps 0"
    )


# ---------------------------------------------------------------------------
# oracle fuzz


def _brute_force_sat(
    theory: Theory,
    bounds: Sequence[tuple[Formula, Dyadic]],
    max_n: int,
    grid_exp: int,
    slack: Dyadic,
) -> bool:
    """Independent enumeration: is some structure of size <= max_n with
    some constant assignment a model of the axioms meeting every bound
    one grid step strictly (eval <= r - slack)?"""
    from .structures import enumerate_structures

    def meets(cand: FiniteStructure) -> bool:
        for phi, r in bounds:
            up = evaluate(phi, cand).try_add(slack)
            if up is None or not (up <= r):
                return False
        return True

    consts = sorted(set().union(*[constants_of(phi) for phi, _ in bounds]) if bounds else set())
    for base in enumerate_structures(theory.sig, max_n, grid_exp):
        if any(evaluate(ax, base) != ZERO for ax in theory.axioms):
            continue
        for assign in itertools.product(range(base.n), repeat=len(consts)):
            if meets(base.expand_constants(dict(zip(consts, assign)))):
                return True
    return False


def suite_oracle_fuzz(seed: int = 1, calls: int = 1000) -> SuiteReport:
    """Random condition checks in debug mode: every Sat witness
    re-validates and satisfies all bounds with one grid step of slack;
    every sound classical refusal is confirmed by brute-force enumeration."""
    sessions = {
        "graphs": OracleSession(graphs(), SearchBounds(max_universe=3, grid_exp=1)),
        "metric": OracleSession(metric(), SearchBounds(max_universe=3, grid_exp=2)),
    }
    failures: list[str] = []
    kinds = {"sat": 0, "unsat_at_bound": 0, "unknown": 0, "confirmed": 0}
    for i in range(calls):
        rng = random.Random(seed * 77_003 + i)
        pack = "graphs" if rng.random() < 0.5 else "metric"
        session = sessions[pack]
        sig = session.theory.sig
        consts = list(range(1 + rng.randrange(3)))
        pairs = []
        for _ in range(1 + rng.randrange(4)):
            phi = _rand_atom(rng, sig, consts)
            for _ in range(rng.randrange(3)):
                phi = Neg(phi) if rng.random() < 0.6 else Half(phi)
            pairs.append((phi, _COND_THRESHOLDS[rng.randrange(len(_COND_THRESHOLDS))]))
        cond = Condition.make(pairs)
        v = session.check(cond)
        kinds[v.kind] += 1
        if v.is_sat:
            w = v.witness
            bad = validate_structure(w)
            if bad is not None:
                failures.append(f"#{i} witness invalid: {bad.kind}")
                continue
            step = session.default_bounds.strictness
            for phi, r in cond.bounds:
                up = evaluate(phi, w).try_add(step)
                if up is None or not (up <= r):
                    failures.append(f"#{i} bound {print_formula(phi)} < {r} without slack")
        elif v.kind == "unsat_at_bound" and v.sound and pack == "graphs":
            n = max(len(cond.constants()), 1)
            b = session.default_bounds
            if _brute_force_sat(session.theory, cond.bounds, n, b.grid_exp, b.strictness):
                failures.append(f"#{i} refuted condition is brute-force satisfiable")
            else:
                kinds["confirmed"] += 1
    detail = (
        f"{calls} calls: {kinds['sat']} sat, {kinds['unsat_at_bound']} unsat"
        f" ({kinds['confirmed']} brute-force confirmed), {kinds['unknown']} unknown"
    )
    return _report("oracle-fuzz", calls, failures, detail)


# ---------------------------------------------------------------------------
# registry


SUITES: dict[str, Callable[..., SuiteReport]] = {
    "coincidence": suite_coincidence,
    "monotonicity": suite_monotonicity,
    "homogeneity": suite_homogeneity,
    "narrowing": suite_narrowing,
    "graph-enforcement": suite_graph_enforcement,
    "metric-enforcement": suite_metric_enforcement,
    "generic-model": suite_generic_model,
    "conjunction": suite_conjunction,
    "splitting": suite_splitting,
    "backforth": suite_backforth,
    "oracle-fuzz": suite_oracle_fuzz,
}


def run_suite(name: str, seed: Optional[int] = None, **kwargs) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; known: {', '.join(sorted(SUITES))}")
    fn = SUITES[name]
    if seed is not None:
        kwargs["seed"] = seed
    return fn(**kwargs)
