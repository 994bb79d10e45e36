"""Strategy library for the building game, plus the back-and-forth comparer.

Every enforcement operation returns a task-based strategy, so strategies
combine with game.conjoin and replay deterministically. Tasks batch their
outstanding bound demands, certify each batch with the oracle before
proposing it, and keep a service ledger: after any play each scheduled
item is in exactly one of the states done (its postcondition re-verifies
against the final condition, with a certificate), flagged (the oracle or
a search could not certify the step; the reason is recorded), or pending.

Witness hints are constructed, not searched: new graph vertices get an
explicit adjacency row, new metric points the capped one-point
amalgamation distances, so oracle validation stays linear in table size.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from .values import Dyadic, Interval, ZERO, ONE, HALF
from .logic import (
    Atomic,
    Const,
    Dist,
    Formula,
    Inf,
    Join,
    Meet,
    Neg,
    Signature,
    Sup,
    Var,
    classify,
    constants_of,
    free_vars,
    dotminus_f,
    abs_diff_f,
    scalar_f,
    substitute,
)
from .oracle import Condition, OracleSession, SearchBounds, Theory
from .structures import FiniteStructure, evaluate
from .forcing import (
    CompiledApprox,
    ForcingError,
    NarrowError,
    _flatten_inf,
    f_value,
    narrow,
)
from .game import Proposal, TaskStrategy
from .etypes import (
    ETypeApprox,
    ProbeResult,
    catalog,
    etype_of,
    is_isolated_probe,
    maximal_types,
    searched_types,
    separation,
)
from .syntax import print_formula

Addition = tuple[Formula, Dyadic]

# default dovetail: thresholds 1/2, 1/4, 1/8 over the first six constants
DEFAULT_THRESHOLDS = (Dyadic(1, 1), Dyadic(1, 2), Dyadic(1, 3))
DEFAULT_WINDOW = 6


# ---------------------------------------------------------------------------
# witness construction helpers


def add_graph_vertex(
    w: FiniteStructure, adjacent_to: set[int], const: int
) -> FiniteStructure:
    """One fresh vertex adjacent exactly to the given elements, distance
    one from everything, named by the given constant."""
    full = w.denominator
    n = w.n
    metric = [list(row) + [full] for row in w.metric]
    metric.append([full] * n + [0])
    etbl = dict(w.predicates.get("E", {}))
    for e in range(n):
        v = 0 if e in adjacent_to else full
        etbl[(n, e)] = v
        etbl[(e, n)] = v
    etbl[(n, n)] = full
    consts = dict(w.constants)
    consts[const] = n
    return FiniteStructure(
        w.sig, n + 1, w.grid_exp,
        tuple(tuple(r) for r in metric),
        {"E": etbl}, {}, consts,
    )


def add_generic_element(w: FiniteStructure, const: int) -> FiniteStructure:
    """One fresh element at the metric cap from everything, every predicate
    value at the cap, named by the given constant. Relational signatures
    only: function tables admit no generic extension."""
    if w.sig.functions:
        raise ValueError("cannot generically extend with function symbols")
    full = w.denominator
    n = w.n
    metric = [list(row) + [full] for row in w.metric]
    metric.append([full] * n + [0])
    preds = {}
    for sym in w.sig.predicates:
        tbl = dict(w.predicates.get(sym.name, {}))
        for args in itertools.product(range(n + 1), repeat=sym.arity):
            if n in args and args not in tbl:
                tbl[args] = full
        preds[sym.name] = tbl
    consts = dict(w.constants)
    consts[const] = n
    return FiniteStructure(
        w.sig, n + 1, w.grid_exp,
        tuple(tuple(r) for r in metric),
        preds, {}, consts,
    )


def add_metric_point(
    w: FiniteStructure, anchor_dists: dict[int, Dyadic], const: int
) -> Optional[FiniteStructure]:
    """One fresh point at the prescribed distances from the anchor
    elements, extended everywhere else by the capped amalgamation formula
    f(u) = min_i(r_i + d(u, a_i)) wedge 1. Returns None when the
    prescription is not admissible over the anchors."""
    g = w.grid_exp
    full = w.denominator
    step = 1

    anchors = {}
    for e, r in anchor_dists.items():
        if r.exp > g:
            return None
        anchors[e] = r.num << (g - r.exp)

    # admissibility over the anchor set
    for (e1, r1), (e2, r2) in itertools.combinations(anchors.items(), 2):
        d12 = w.metric[e1][e2]
        if abs(r1 - r2) > d12 or d12 > r1 + r2:
            return None

    row = []
    for u in range(w.n):
        if u in anchors:
            row.append(anchors[u])
            continue
        v = min(r + w.metric[u][e] for e, r in anchors.items())
        v = min(v, full)
        v = max(v, step)
        row.append(v)
    metric = [list(r) + [row[i]] for i, r in enumerate(w.metric)]
    metric.append(row + [0])
    consts = dict(w.constants)
    consts[const] = w.n
    return FiniteStructure(
        w.sig, w.n + 1, g,
        tuple(tuple(r) for r in metric),
        {p: dict(t) for p, t in w.predicates.items()}, {}, consts,
    )


def free_union(
    a: FiniteStructure, b: FiniteStructure, b_constants: Mapping[int, int]
) -> FiniteStructure:
    """Disjoint union with all cross distances and cross predicate values
    at one; b's elements are renumbered after a's, and b_constants names
    them (constant index -> element index inside b)."""
    if a.sig.functions:
        raise ValueError("free union is only defined for relational signatures")
    g = max(a.grid_exp, b.grid_exp)
    a2, b2 = a.refine(g), b.refine(g)
    full = 1 << g
    n = a2.n + b2.n
    metric = [list(row) + [full] * b2.n for row in a2.metric]
    for i in range(b2.n):
        metric.append([full] * a2.n + list(b2.metric[i]))
    preds: dict[str, dict[tuple[int, ...], int]] = {}
    for sym in a.sig.predicates:
        tbl: dict[tuple[int, ...], int] = {}
        for args in itertools.product(range(n), repeat=sym.arity):
            if all(x < a2.n for x in args):
                tbl[args] = a2.predicates[sym.name][args]
            elif all(x >= a2.n for x in args):
                tbl[args] = b2.predicates[sym.name][tuple(x - a2.n for x in args)]
            else:
                tbl[args] = full
        preds[sym.name] = tbl
    consts = dict(a2.constants)
    for c, e in b_constants.items():
        consts[c] = a2.n + e
    return FiniteStructure(
        a.sig, n, g, tuple(tuple(r) for r in metric), preds, {}, consts
    )


# ---------------------------------------------------------------------------
# service ledger


@dataclass(frozen=True)
class LedgerEntry:
    """State of one scheduled enforcement item after (or during) a play."""

    key: str
    state: str  # done | flagged | pending
    detail: str = ""
    certificate: Optional[dict] = None

    def to_json(self) -> dict:
        doc: dict = {"key": self.key, "state": self.state}
        if self.detail:
            doc["detail"] = self.detail
        if self.certificate is not None:
            doc["certificate"] = self.certificate
        return doc


def service_ledger(
    strategy, session: OracleSession, cond: Condition
) -> tuple[LedgerEntry, ...]:
    """Collect per-item states from every task of a task-based strategy
    (conjoined strategies report all components). Done states are
    recomputed against the condition itself, so the ledger re-verifies
    postconditions rather than trusting play-time bookkeeping."""
    out: list[LedgerEntry] = []
    for task in getattr(strategy, "tasks", ()):
        entries = getattr(task, "entries", None)
        if callable(entries):
            out.extend(entries(session, cond))
    return tuple(out)


def ledger_done(entries: Sequence[LedgerEntry]) -> bool:
    return all(e.state == "done" for e in entries)


def ledger_to_json(entries: Sequence[LedgerEntry]) -> list[dict]:
    return [e.to_json() for e in entries]


# ---------------------------------------------------------------------------
# shared helpers


def _sup_matrix(phi: Formula) -> tuple[list[int], Formula]:
    vars_: list[int] = []
    while isinstance(phi, Sup):
        vars_.append(phi.var)
        phi = phi.body
    return vars_, phi


def _witness(cond: Condition) -> Optional[FiniteStructure]:
    cert = cond.certificate
    return cert.witness if (cert and cert.is_sat) else None


def _holds(cond: Condition, phi: Formula, r: Dyadic) -> bool:
    return f_value(cond, phi) <= r


# ---------------------------------------------------------------------------
# extra canonicity


@dataclass
class ExtraCanonicalTask:
    """Pins, for each scheduled (center, radius, count) triple, that many
    fresh constants within the radius of the center. Always satisfiable:
    the hint interprets every fresh constant at the center's element."""

    schedule: tuple[tuple[int, Dyadic, int], ...]
    name: str = "extra-canonical"
    flags: dict[str, str] = field(default_factory=dict)

    @staticmethod
    def item_key(center: int, radius: Dyadic, count: int) -> str:
        return f"extra:c{center}:{radius}:{count}"

    def reserved(self) -> set[int]:
        return {c for c, _, _ in self.schedule}

    def _pinned(self, cond: Condition, center: int, radius: Dyadic) -> list[int]:
        """Constants bounded within the radius of the center so far."""
        out = set()
        for phi, r in cond.bounds:
            if not isinstance(phi, Dist) or r > radius:
                continue
            le, ri = phi.left, phi.right
            if not (isinstance(le, Const) and isinstance(ri, Const)):
                continue
            if le.index == center and ri.index != center:
                out.add(ri.index)
            elif ri.index == center and le.index != center:
                out.add(le.index)
        return sorted(out)

    def _missing(self, cond: Condition) -> list[tuple[str, int, Dyadic, int]]:
        out = []
        for center, radius, count in self.schedule:
            key = self.item_key(center, radius, count)
            if key in self.flags:
                continue
            need = count - len(self._pinned(cond, center, radius))
            if need > 0:
                out.append((key, center, radius, need))
        return out

    def propose(
        self, session: OracleSession, cond: Condition, fresh_base: int
    ) -> Optional[Proposal]:
        todo = self._missing(cond)
        if not todo:
            return None
        adds: list[Addition] = []
        plan: dict[int, int] = {}
        # fresh names must not collide with centers that are still unplayed
        base = max([fresh_base] + [c + 1 for c, _, _ in self.schedule])
        for _, center, radius, need in todo:
            for _ in range(need):
                adds.append((Dist(Const(base), Const(center)), radius))
                plan[base] = center
                base += 1
        hint = self._hint(cond, plan)
        verdict = session.extend_check(cond, adds, hint=hint)
        if verdict.is_sat:
            return Proposal(tuple(adds), hint=verdict.witness, note=self.name)
        for key, center, radius, need in todo:
            self.flags[key] = f"{verdict.kind}: {verdict.reason}"
        return None

    def _hint(
        self, cond: Condition, plan: dict[int, int]
    ) -> Optional[FiniteStructure]:
        w = _witness(cond)
        if w is None or w.n == 0:
            return None
        assign: dict[int, int] = {}
        for fresh, center in plan.items():
            e = w.constants.get(center)
            if e is None:
                # an uninterpreted center gets its own element; putting it
                # on an existing one would merge names the bounds keep apart
                if w.sig.functions:
                    return None
                w = add_generic_element(w, center)
                e = w.constants[center]
            assign[fresh] = e
        try:
            return w.expand_constants(assign)
        except Exception:
            return None

    def entries(
        self, session: OracleSession, cond: Condition
    ) -> list[LedgerEntry]:
        out = []
        for center, radius, count in self.schedule:
            key = self.item_key(center, radius, count)
            pinned = self._pinned(cond, center, radius)
            if len(pinned) >= count:
                cert = {"constants": pinned[:count], "radius": str(radius)}
                out.append(LedgerEntry(key, "done", certificate=cert))
            elif key in self.flags:
                out.append(LedgerEntry(key, "flagged", self.flags[key]))
            else:
                out.append(LedgerEntry(key, "pending"))
        return out


def enforce_extra_canonical(
    schedule: Sequence[tuple[int, Dyadic, int]]
) -> TaskStrategy:
    """Strategy pinning dense copies: for each (center constant, radius,
    copy count) triple it plays d(c_new, center) < radius for that many
    fresh constants. An empty schedule stalls."""
    items = tuple((c, r, k) for c, r, k in schedule)
    tasks = (ExtraCanonicalTask(items),) if items else ()
    return TaskStrategy(tasks, "E", "extra-canonical")


# ---------------------------------------------------------------------------
# universal axioms


@dataclass
class UniversalInstanceTask:
    """Bounds every axiom matrix instance over the condition's leading
    constants at each scheduled threshold. Instances hold exactly in any
    model of the theory, so the current witness certifies each batch."""

    axioms: tuple[Formula, ...]
    thresholds: tuple[Dyadic, ...] = DEFAULT_THRESHOLDS
    window: int = DEFAULT_WINDOW
    name: str = "universal-instances"
    flags: dict[str, str] = field(default_factory=dict)

    def _items(self, cond: Condition):
        consts = cond.constants()[: self.window]
        for ai, ax in enumerate(self.axioms):
            vars_, matrix = _sup_matrix(ax)
            combos = itertools.product(consts, repeat=len(vars_)) if vars_ else [()]
            for combo in combos:
                inst = substitute(matrix, {v: Const(c) for v, c in zip(vars_, combo)})
                tag = ",".join(f"c{c}" for c in combo)
                for thr in self.thresholds:
                    yield f"universal:{ai}:{tag}:{thr}", inst, thr

    def propose(
        self, session: OracleSession, cond: Condition, fresh_base: int
    ) -> Optional[Proposal]:
        todo = [
            (key, inst, thr)
            for key, inst, thr in self._items(cond)
            if key not in self.flags and not _holds(cond, inst, thr)
        ]
        if not todo:
            return None
        adds = [(inst, thr) for _, inst, thr in todo]
        verdict = session.extend_check(cond, adds, hint=_witness(cond))
        if verdict.is_sat:
            return Proposal(tuple(adds), hint=verdict.witness, note=self.name)
        # isolate the failing instances so the rest still get played
        good: list[Addition] = []
        for key, inst, thr in todo:
            v = session.extend_check(cond, [(inst, thr)], hint=_witness(cond))
            if v.is_sat:
                good.append((inst, thr))
            else:
                self.flags[key] = f"{v.kind}: {v.reason}"
        if not good:
            return None
        verdict = session.extend_check(cond, good, hint=_witness(cond))
        if not verdict.is_sat:
            good = good[:1]
            verdict = session.extend_check(cond, good, hint=_witness(cond))
            if not verdict.is_sat:
                return None
        return Proposal(tuple(good), hint=verdict.witness, note=self.name)

    def entries(
        self, session: OracleSession, cond: Condition
    ) -> list[LedgerEntry]:
        out = []
        for key, inst, thr in self._items(cond):
            if _holds(cond, inst, thr):
                cert = {"bound": print_formula(inst), "threshold": str(thr)}
                out.append(LedgerEntry(key, "done", certificate=cert))
            elif key in self.flags:
                out.append(LedgerEntry(key, "flagged", self.flags[key]))
            else:
                out.append(LedgerEntry(key, "pending"))
        return out


def enforce_universal(
    theory: Theory,
    thresholds: Sequence[Dyadic] = DEFAULT_THRESHOLDS,
    window: int = DEFAULT_WINDOW,
) -> TaskStrategy:
    """Strategy making the compiled structure model the theory's
    universal axioms: each (axiom, constant tuple, threshold) item plays
    the axiom's matrix at the tuple bounded by the threshold. A theory
    without axioms stalls."""
    for ax in theory.axioms:
        if not classify(ax).universal:
            raise ValueError(f"axiom is not universal: {print_formula(ax)}")
    if not theory.axioms:
        return TaskStrategy((), "E", "universal")
    task = UniversalInstanceTask(tuple(theory.axioms), tuple(thresholds), window)
    return TaskStrategy((task,), "E", "universal")


# ---------------------------------------------------------------------------
# existential completeness


@dataclass(frozen=True)
class EcInstance:
    """One existential demand: a closed existential formula to realize
    below the threshold, with an optional constructive witness extender
    mapping (current witness, fresh base) to an extended witness."""

    key: str
    formula: Formula
    threshold: Dyadic
    extend_witness: Optional[
        Callable[[FiniteStructure, int], Optional[FiniteStructure]]
    ] = None
    requires: tuple[int, ...] = ()

    def span(self) -> int:
        vars_, _ = _flatten_inf(self.formula)
        return len(vars_)

    def matrix_at(self, base: int) -> Formula:
        """Quantifier-free matrix with the bound variables instantiated
        at consecutive fresh constants starting at base."""
        vars_, matrix = _flatten_inf(self.formula)
        if not vars_:
            return matrix
        return substitute(matrix, {v: Const(base + i) for i, v in enumerate(vars_)})


@dataclass
class EcTask:
    """Plays unactioned existential demands as single matrix bounds with
    fresh witness constants; joint unsatisfiability is recorded as a
    certificate (the demand is then serviced by its failure branch)."""

    instances: tuple[EcInstance, ...]
    name: str = "extension-demands"
    flags: dict[str, str] = field(default_factory=dict)
    refusals: dict[str, dict] = field(default_factory=dict)
    played: dict[str, int] = field(default_factory=dict)

    def reserved(self) -> set[int]:
        out: set[int] = set()
        for inst in self.instances:
            out |= constants_of(inst.formula)
            out.update(inst.requires)
        return out

    def _actioned_base(self, inst: EcInstance, cond: Condition) -> Optional[int]:
        base = self.played.get(inst.key)
        if base is not None and _holds(cond, inst.matrix_at(base), inst.threshold):
            return base
        if inst.span() == 0:
            return 0 if _holds(cond, inst.matrix_at(0), inst.threshold) else None
        consts = cond.constants()
        top = max(consts) if consts else 0
        for b in range(top + 1):
            if _holds(cond, inst.matrix_at(b), inst.threshold):
                self.played[inst.key] = b
                return b
        return None

    def propose(
        self, session: OracleSession, cond: Condition, fresh_base: int
    ) -> Optional[Proposal]:
        w = _witness(cond)
        todo = [
            inst
            for inst in self.instances
            if inst.key not in self.flags
            and inst.key not in self.refusals
            and self._actioned_base(inst, cond) is None
        ]
        if not todo:
            return None
        ready = [
            inst
            for inst in todo
            if w is None or all(c in w.constants for c in inst.requires)
        ]
        batch = ready if ready else todo[:1]
        prop = self._try_batch(session, cond, batch, fresh_base, w)
        if prop is not None:
            return prop
        # batch refused as a whole: isolate each demand's verdict
        good: list[EcInstance] = []
        for inst in batch:
            single = self._try_batch(session, cond, [inst], fresh_base, w, probe=True)
            if single is not None:
                good.append(inst)
        if good:
            prop = self._try_batch(session, cond, good, fresh_base, w)
            if prop is not None:
                return prop
            return self._try_batch(session, cond, good[:1], fresh_base, w)
        return None

    def _try_batch(
        self,
        session: OracleSession,
        cond: Condition,
        batch: Sequence[EcInstance],
        fresh_base: int,
        w: Optional[FiniteStructure],
        probe: bool = False,
    ) -> Optional[Proposal]:
        adds: list[Addition] = []
        hint = w
        # witness names must clear every constant the demands mention,
        # played or not, or a matrix variable lands on its own parameter
        base = fresh_base
        for inst in batch:
            mentioned = constants_of(inst.formula)
            if mentioned:
                base = max(base, max(mentioned) + 1)
        placed: list[tuple[EcInstance, int]] = []
        for inst in batch:
            adds.append((inst.matrix_at(base), inst.threshold))
            placed.append((inst, base))
            if hint is not None and inst.extend_witness is not None:
                hint = inst.extend_witness(hint, base)
            elif inst.span() > 0:
                hint = None
            base += inst.span()
        verdict = session.extend_check(cond, adds, hint=hint)
        if verdict.is_sat:
            if not probe:
                for inst, b in placed:
                    self.played[inst.key] = b
            return Proposal(tuple(adds), hint=verdict.witness, note=self.name)
        if probe and len(batch) == 1:
            inst = batch[0]
            if verdict.kind == "unsat_at_bound":
                self.refusals[inst.key] = {
                    "kind": verdict.kind,
                    "reason": verdict.reason,
                    "bound": print_formula(inst.formula),
                    "threshold": str(inst.threshold),
                }
            else:
                self.flags[inst.key] = f"{verdict.kind}: {verdict.reason}"
        return None

    def entries(
        self, session: OracleSession, cond: Condition
    ) -> list[LedgerEntry]:
        out = []
        for inst in self.instances:
            base = self._actioned_base(inst, cond)
            if base is not None:
                cert = {
                    "bound": print_formula(inst.matrix_at(base)),
                    "threshold": str(inst.threshold),
                }
                out.append(LedgerEntry(inst.key, "done", certificate=cert))
            elif inst.key in self.refusals:
                out.append(
                    LedgerEntry(
                        inst.key,
                        "done",
                        "unsatisfiable at bound",
                        certificate=self.refusals[inst.key],
                    )
                )
            elif inst.key in self.flags:
                out.append(LedgerEntry(inst.key, "flagged", self.flags[inst.key]))
            else:
                out.append(LedgerEntry(inst.key, "pending"))
        return out


def enforce_ec(
    theory: Theory,
    family: Sequence,
    thresholds: Sequence[Dyadic] = DEFAULT_THRESHOLDS,
    window: Sequence[int] = tuple(range(DEFAULT_WINDOW)),
) -> TaskStrategy:
    """Strategy realizing a family of existential demands. Family members
    are either prepared EcInstance records or existential formulas whose
    free variables are instantiated over the window constants at every
    scheduled threshold. Each serviced demand leaves its matrix bound
    with fresh witness constants in the transcript, or a recorded
    unsatisfiability certificate."""
    instances: list[EcInstance] = []
    for item in family:
        if isinstance(item, EcInstance):
            instances.append(item)
            continue
        phi: Formula = item
        if not classify(phi).existential:
            raise ValueError(f"not existential: {print_formula(phi)}")
        fv = sorted(free_vars(phi))
        combos = itertools.product(window, repeat=len(fv)) if fv else [()]
        for combo in combos:
            closed = substitute(phi, {v: Const(c) for v, c in zip(fv, combo)})
            tag = ",".join(f"c{c}" for c in combo)
            for thr in thresholds:
                key = f"ec:{print_formula(phi)}:{tag}:{thr}"
                instances.append(
                    EcInstance(key, closed, thr, requires=tuple(combo))
                )
    tasks = (EcTask(tuple(instances)),) if instances else ()
    return TaskStrategy(tasks, "E", "ec")


def graph_extension_family(
    constants: Sequence[int] = tuple(range(6)), max_size: int = 3
) -> list[EcInstance]:
    """All one-point graph extension demands over subsets of the given
    constants up to the size cap: a fresh vertex adjacent to A, not
    adjacent to B, distinct from every constant named, plus one demand
    for a vertex distinct from all of them (which also introduces the
    constants themselves)."""
    out: list[EcInstance] = []
    consts = list(constants)

    def build(a_set: tuple[int, ...], b_set: tuple[int, ...], named: tuple[int, ...]):
        z = Var(0)
        parts: list[Formula] = []
        for a in a_set:
            parts.append(Atomic("E", (Const(a), z)))
        for b in b_set:
            parts.append(Neg(Atomic("E", (Const(b), z))))
        for u in named:
            parts.append(Neg(Dist(Const(u), z)))
        matrix = parts[0] if len(parts) == 1 else Meet(tuple(parts))
        formula = Inf(0, matrix)

        def extend(w: FiniteStructure, fresh: int) -> Optional[FiniteStructure]:
            # missing named constants become isolated vertices first
            for c in sorted(set(a_set) | set(b_set) | set(named)):
                if c not in w.constants:
                    w = add_graph_vertex(w, set(), c)
            adj = {w.constant(a) for a in a_set}
            return add_graph_vertex(w, adj, fresh)

        key = "ec:A=%s:B=%s" % (",".join(map(str, a_set)), ",".join(map(str, b_set)))
        out.append(EcInstance(key, formula, HALF, extend, ()))

    for size in range(1, max_size + 1):
        for union in itertools.combinations(consts, size):
            for mask in range(1 << size):
                a_set = tuple(u for k, u in enumerate(union) if mask >> k & 1)
                b_set = tuple(u for k, u in enumerate(union) if not (mask >> k & 1))
                build(a_set, b_set, union)
    build((), (), tuple(consts))
    return out


def metric_extension_family(
    centers: Sequence[int],
    base: Dyadic,
    grid_exp: int = 3,
    tol: Dyadic = Dyadic(1, 4),
) -> list[EcInstance]:
    """One demand per admissible distance vector on the 2^-grid_exp grid
    over centers sitting pairwise at the base distance: a fresh point
    with d(z, c_i) pinned at r_i. Every demand re-pins the base
    distances, so the first one serviced places the centers."""
    out: list[EcInstance] = []
    full = 1 << grid_exp
    k = len(centers)
    base_num = base.num << (grid_exp - base.exp)
    z = Var(0)

    base_parts: list[Formula] = []
    for i, j in itertools.combinations(range(k), 2):
        alpha = Dist(Const(centers[i]), Const(centers[j]))
        base_parts.append(abs_diff_f(alpha, scalar_f(base, Const(centers[i]))))

    def ensure_centers(w: FiniteStructure) -> Optional[FiniteStructure]:
        for c in centers:
            if c in w.constants:
                continue
            plan = {
                w.constant(o): base for o in centers if o in w.constants
            }
            if not plan and w.n > 0:
                plan = {0: ONE}
            nxt = add_metric_point(w, plan, c) if plan else None
            if nxt is None and w.n == 0:
                nxt = FiniteStructure(w.sig, 1, w.grid_exp, ((0,),), {}, {}, {c: 0})
            if nxt is None:
                return None
            w = nxt
        return w

    for vec in itertools.product(range(1, full + 1), repeat=k):
        ok = True
        for x, y in itertools.combinations(range(k), 2):
            if abs(vec[x] - vec[y]) > base_num or base_num > vec[x] + vec[y]:
                ok = False
                break
        if not ok:
            continue
        radii = tuple(Dyadic(v, grid_exp) for v in vec)

        parts = list(base_parts)
        for c, r in zip(centers, radii):
            parts.append(abs_diff_f(Dist(Const(c), z), scalar_f(r, Const(c))))
        formula = Inf(0, Meet(tuple(parts)))

        def extend(
            w: FiniteStructure, fresh: int, radii=radii
        ) -> Optional[FiniteStructure]:
            w2 = ensure_centers(w)
            if w2 is None:
                return None
            plan = {w2.constant(c): r for c, r in zip(centers, radii)}
            return add_metric_point(w2, plan, fresh)

        key = "ec:r=" + ",".join(str(r) for r in radii)
        out.append(EcInstance(key, formula, tol, extend, ()))
    return out


# ---------------------------------------------------------------------------
# sup-join-inf properties


@dataclass
class SupJoinInfTask:
    """Services sup-join-inf property sentences: embeds the current
    condition into an expansion of a reference structure, finds the first
    disjunct whose matrix drops below the threshold there, and plays that
    matrix bound. Failures to embed or to find a disjunct are flagged."""

    sentences: tuple[Formula, ...]
    references: tuple[FiniteStructure, ...]
    thresholds: tuple[Dyadic, ...] = DEFAULT_THRESHOLDS
    window: int = DEFAULT_WINDOW
    embed_cap: int = 8
    name: str = "sup-join-inf"
    flags: dict[str, str] = field(default_factory=dict)

    def reserved(self) -> set[int]:
        out: set[int] = set()
        for sent in self.sentences:
            out |= constants_of(sent)
        return out

    def _items(self, cond: Condition):
        consts = cond.constants()[: self.window]
        for mi, sent in enumerate(self.sentences):
            vars_, body = _sup_matrix(sent)
            combos = itertools.product(consts, repeat=len(vars_)) if vars_ else [()]
            for combo in combos:
                inst_map = {v: Const(c) for v, c in zip(vars_, combo)}
                members = tuple(substitute(m, inst_map) for m in body.members)
                tag = ",".join(f"c{c}" for c in combo)
                for thr in self.thresholds:
                    yield f"sji:{mi}:{tag}:{thr}", members, thr

    def _done(self, cond: Condition, members, thr: Dyadic) -> Optional[dict]:
        consts = cond.constants()
        top = max(consts) if consts else 0
        for member in members:
            vars_, matrix = _flatten_inf(member)
            bases = range(top + 1) if vars_ else (0,)
            for b in bases:
                inst = substitute(
                    matrix, {v: Const(b + i) for i, v in enumerate(vars_)}
                )
                if _holds(cond, inst, thr):
                    return {"bound": print_formula(inst), "threshold": str(thr)}
        return None

    def _embed(
        self, cond: Condition, ref: FiniteStructure
    ) -> Optional[FiniteStructure]:
        """First expansion of the reference satisfying every bound of the
        condition, searching constant assignments in index order."""
        consts = cond.constants()
        by_const: list[tuple[frozenset[int], Formula, Dyadic]] = [
            (frozenset(constants_of(phi)), phi, r) for phi, r in cond.bounds
        ]

        def rec(i: int, plan: dict[int, int]) -> Optional[dict[int, int]]:
            if i == len(consts):
                return plan
            c = consts[i]
            assigned = set(plan) | {c}
            for e in range(ref.n):
                plan[c] = e
                ok = True
                for needs, phi, r in by_const:
                    if c in needs and needs <= assigned:
                        if evaluate(phi, ref.expand_constants(plan)) >= r:
                            ok = False
                            break
                if ok:
                    res = rec(i + 1, plan)
                    if res is not None:
                        return res
                del plan[c]
            return None

        plan = rec(0, {})
        return ref.expand_constants(plan) if plan is not None else None

    def propose(
        self, session: OracleSession, cond: Condition, fresh_base: int
    ) -> Optional[Proposal]:
        for key, members, thr in self._items(cond):
            if key in self.flags or self._done(cond, members, thr) is not None:
                continue
            if len(cond.constants()) > self.embed_cap:
                self.flags[key] = "embedding search exceeded desk bounds"
                continue
            expansion = None
            for ref in self.references:
                expansion = self._embed(cond, ref)
                if expansion is not None:
                    break
            if expansion is None:
                self.flags[key] = "condition does not embed into any reference"
                continue
            move = self._pick(expansion, members, thr, fresh_base)
            if move is None:
                self.flags[key] = "no disjunct below threshold in the expansion"
                continue
            inst, hint = move
            verdict = session.extend_check(cond, [(inst, thr)], hint=hint)
            if verdict.is_sat:
                return Proposal(
                    ((inst, thr),), hint=verdict.witness, note=self.name
                )
            self.flags[key] = f"{verdict.kind}: {verdict.reason}"
        return None

    def _pick(
        self,
        expansion: FiniteStructure,
        members,
        thr: Dyadic,
        fresh_base: int,
    ) -> Optional[tuple[Formula, FiniteStructure]]:
        for member in members:
            vars_, matrix = _flatten_inf(member)
            for elems in itertools.product(range(expansion.n), repeat=len(vars_)):
                plan = {fresh_base + i: e for i, e in enumerate(elems)}
                inst = substitute(
                    matrix, {v: Const(fresh_base + i) for i, v in enumerate(vars_)}
                )
                staged = expansion.expand_constants(plan)
                if evaluate(inst, staged) < thr:
                    return inst, staged
        return None

    def entries(
        self, session: OracleSession, cond: Condition
    ) -> list[LedgerEntry]:
        out = []
        for key, members, thr in self._items(cond):
            cert = self._done(cond, members, thr)
            if cert is not None:
                out.append(LedgerEntry(key, "done", certificate=cert))
            elif key in self.flags:
                out.append(LedgerEntry(key, "flagged", self.flags[key]))
            else:
                out.append(LedgerEntry(key, "pending"))
        return out


def enforce_supjoininf(
    sentences: Sequence[Formula],
    references: Sequence[FiniteStructure],
    thresholds: Sequence[Dyadic] = DEFAULT_THRESHOLDS,
    window: int = DEFAULT_WINDOW,
) -> TaskStrategy:
    """Strategy servicing sup-join-inf property sentences against a
    family of reference structures. Each reference must satisfy every
    sentence exactly (checked here; violations are a load error). An
    empty property list stalls."""
    for sent in sentences:
        vars_, body = _sup_matrix(sent)
        if not vars_ or not isinstance(body, Join):
            raise ValueError(
                f"not a sup-join-inf sentence: {print_formula(sent)}"
            )
        if not all(classify(m).existential for m in body.members):
            raise ValueError(
                f"join member is not existential: {print_formula(sent)}"
            )
        for ref in references:
            if evaluate(sent, ref) != ZERO:
                raise ValueError(
                    f"reference structure violates {print_formula(sent)}"
                )
    if not sentences:
        return TaskStrategy((), "E", "sup-join-inf")
    task = SupJoinInfTask(
        tuple(sentences), tuple(references), tuple(thresholds), window
    )
    return TaskStrategy((task,), "E", "sup-join-inf")


# ---------------------------------------------------------------------------
# finite genericity


@dataclass
class FiniteGenericTask:
    """Narrows each scheduled sentence to an interval of width below its
    tolerance (delegating to forcing.narrow), one sentence per turn."""

    schedule: tuple[tuple[Formula, Dyadic], ...]
    name: str = "finite-generic"
    flags: dict[str, str] = field(default_factory=dict)
    played: dict[str, tuple[tuple[Addition, ...], tuple[str, str]]] = field(
        default_factory=dict
    )

    @staticmethod
    def item_key(phi: Formula, eps: Dyadic) -> str:
        return f"generic:{print_formula(phi)}:{eps}"

    def reserved(self) -> set[int]:
        out: set[int] = set()
        for phi, _ in self.schedule:
            out |= constants_of(phi)
        return out

    def _done(self, cond: Condition, key: str) -> bool:
        rec = self.played.get(key)
        if rec is None:
            return False
        adds, _ = rec
        return all(_holds(cond, phi, r) for phi, r in adds)

    def propose(
        self, session: OracleSession, cond: Condition, fresh_base: int
    ) -> Optional[Proposal]:
        for phi, eps in self.schedule:
            key = self.item_key(phi, eps)
            if key in self.flags or self._done(cond, key):
                continue
            try:
                res = narrow(session, cond, phi, eps)
            except (NarrowError, ForcingError) as e:
                self.flags[key] = str(e)
                continue
            have = set(cond.bounds)
            new = tuple(p for p in res.condition.bounds if p not in have)
            iv = (str(res.interval.lo), str(res.interval.hi))
            self.played[key] = (new, iv)
            if not new:
                continue  # already pinned; recorded as done
            return Proposal(
                new, hint=_witness(res.condition), note=f"{self.name}:{eps}"
            )
        return None

    def entries(
        self, session: OracleSession, cond: Condition
    ) -> list[LedgerEntry]:
        out = []
        for phi, eps in self.schedule:
            key = self.item_key(phi, eps)
            if self._done(cond, key):
                lo, hi = self.played[key][1]
                cert = {"interval": [lo, hi], "eps": str(eps)}
                out.append(LedgerEntry(key, "done", certificate=cert))
            elif key in self.flags:
                out.append(LedgerEntry(key, "flagged", self.flags[key]))
            else:
                out.append(LedgerEntry(key, "pending"))
        return out


def enforce_finite_generic(
    schedule: Sequence[tuple[Formula, Dyadic]]
) -> TaskStrategy:
    """Strategy pinning each scheduled sentence into an interval of width
    below its tolerance. An empty schedule stalls."""
    items = tuple((phi, eps) for phi, eps in schedule)
    tasks = (FiniteGenericTask(items),) if items else ()
    return TaskStrategy(tasks, "E", "finite-generic")


# ---------------------------------------------------------------------------
# e-atomic realization


@dataclass
class EAtomicTask:
    """For each scheduled (constant, delta): probe for an isolated
    existential 1-type at that tolerance, then play the certified
    neighborhood bound theta(c) < eta with the probe certificate. A probe
    that cannot certify isolation flags the item and stalls it."""

    theory: Theory
    items: tuple[tuple[int, Dyadic], ...]
    probe_bounds: Optional[SearchBounds] = None
    name: str = "e-atomic"
    flags: dict[str, str] = field(default_factory=dict)
    played: dict[str, tuple[Formula, Dyadic, dict]] = field(default_factory=dict)
    _cache: dict[str, tuple] = field(default_factory=dict)

    @staticmethod
    def item_key(c: int, delta: Dyadic) -> str:
        return f"eatomic:c{c}:{delta}"

    def reserved(self) -> set[int]:
        return {c for c, _ in self.items}

    def _target(self, delta: Dyadic):
        tag = str(delta)
        if tag not in self._cache:
            b = self.probe_bounds or SearchBounds()
            space = maximal_types(searched_types(self.theory, 1, 1, b))
            found = None
            reason = "no searched types at bound"
            for t in space:
                pr = is_isolated_probe(self.theory, t, delta, b)
                if pr.kind == "isolated":
                    found = (t, pr)
                    break
                reason = f"probe {pr.kind}"
            self._cache[tag] = (found, reason)
        return self._cache[tag]

    def _matrix(
        self, t: ETypeApprox, probe: ProbeResult, c: int, fresh_base: int
    ) -> tuple[Formula, Dyadic]:
        cat = catalog(self.theory.sig, t.arity, t.depth)
        values = [Dyadic.parse(v) for v in probe.detail["values"]]
        terms: list[Formula] = []
        base = fresh_base
        for i, v in zip(probe.detail["indices"], values):
            entry = cat[i]
            if isinstance(entry, Inf):
                body = substitute(entry.body, {entry.var: Const(base)})
                base += 1
            else:
                body = entry
            terms.append(dotminus_f(body, scalar_f(v, Const(c))))
        matrix = terms[0] if len(terms) == 1 else Meet(tuple(terms))
        eta = Dyadic.parse(probe.detail["eta"])
        return substitute(matrix, {0: Const(c)}), eta

    def _hint(
        self,
        cond: Condition,
        t: ETypeApprox,
        c: int,
        matrix: Formula,
        eta: Dyadic,
        fresh_base: int,
    ) -> Optional[FiniteStructure]:
        w = _witness(cond)
        if w is None or self.theory.sig.functions:
            return None
        b = self.probe_bounds or SearchBounds()
        real = self._realizer(t, b)
        if real is None:
            return None
        struct, elem = real
        try:
            union = free_union(w, struct, {c: elem})
        except Exception:
            return None
        fresh = sorted(constants_of(matrix) - set(w.constants) - {c})
        offset = w.n
        for elems in itertools.product(range(struct.n), repeat=len(fresh)):
            staged = union.expand_constants(
                {f: offset + e for f, e in zip(fresh, elems)}
            )
            if evaluate(matrix, staged) < eta:
                return staged
        return None

    def _realizer(
        self, t: ETypeApprox, b: SearchBounds
    ) -> Optional[tuple[FiniteStructure, int]]:
        from .structures import enumerate_structures
        from .etypes import models_theory

        for a in enumerate_structures(self.theory.sig, b.max_universe, b.grid_exp):
            if not models_theory(a, self.theory):
                continue
            for e in range(a.n):
                if etype_of(a, (e,), t.depth).entries == t.entries:
                    return a, e
        return None

    def propose(
        self, session: OracleSession, cond: Condition, fresh_base: int
    ) -> Optional[Proposal]:
        for c, delta in self.items:
            key = self.item_key(c, delta)
            if key in self.flags:
                continue
            rec = self.played.get(key)
            if rec is not None and _holds(cond, rec[0], rec[1]):
                continue
            found, reason = self._target(delta)
            if found is None:
                self.flags[key] = reason
                continue
            t, probe = found
            matrix, eta = self._matrix(t, probe, c, fresh_base)
            hint = self._hint(cond, t, c, matrix, eta, fresh_base)
            verdict = session.extend_check(cond, [(matrix, eta)], hint=hint)
            if verdict.is_sat:
                cert = {
                    "theta": probe.detail.get("theta", ""),
                    "eta": str(eta),
                    "type": t.to_json(),
                    "probe": probe.to_json(),
                }
                self.played[key] = (matrix, eta, cert)
                return Proposal(
                    ((matrix, eta),), hint=verdict.witness, note=self.name
                )
            self.flags[key] = f"{verdict.kind}: {verdict.reason}"
        return None

    def entries(
        self, session: OracleSession, cond: Condition
    ) -> list[LedgerEntry]:
        out = []
        for c, delta in self.items:
            key = self.item_key(c, delta)
            rec = self.played.get(key)
            if rec is not None and _holds(cond, rec[0], rec[1]):
                out.append(LedgerEntry(key, "done", certificate=rec[2]))
            elif key in self.flags:
                out.append(LedgerEntry(key, "flagged", self.flags[key]))
            else:
                out.append(LedgerEntry(key, "pending"))
        return out


def enforce_eatomic(
    theory: Theory,
    schedule: Sequence[tuple[int, Dyadic]],
    probe_bounds: Optional[SearchBounds] = None,
) -> TaskStrategy:
    """Strategy realizing isolated existential types at the scheduled
    constants within the scheduled tolerances, each move carrying the
    isolation probe's certificate. An empty schedule stalls."""
    items = tuple((c, d) for c, d in schedule)
    tasks = (EAtomicTask(theory, items, probe_bounds),) if items else ()
    return TaskStrategy(tasks, "E", "e-atomic")


# ---------------------------------------------------------------------------
# back-and-forth comparison


@dataclass(frozen=True)
class BackForthResult:
    """Chain of partial maps between the constants of two compiled
    approximations, each extending the last; or the first unmatchable
    constant with both type approximations."""

    ok: bool
    depth: int
    eps: Dyadic
    chain: tuple[tuple[tuple[int, int], ...], ...] = ()
    failure: Optional[dict] = None

    def to_json(self) -> dict:
        doc: dict = {
            "ok": self.ok,
            "depth": self.depth,
            "eps": str(self.eps),
            "chain": [[[x, y] for x, y in step] for step in self.chain],
        }
        if self.failure is not None:
            doc["failure"] = self.failure
        return doc


def backforth_compare(
    a: CompiledApprox, b: CompiledApprox, depth: int, eps: Dyadic
) -> BackForthResult:
    """Exhaustive alternating extension over the first `depth` constants
    of each side: a-side constants and b-side constants are inserted in
    turn, each matched to some constant-named element of the other side
    so that atomic values stay aligned within eps and depth-1 existential
    types separate by at most eps. Ties break by lowest constant index;
    the search backtracks, so success is decided exactly over the named
    elements."""
    wa: FiniteStructure = a.witness
    wb: FiniteStructure = b.witness
    if wa.sig != wb.sig:
        raise ValueError("compiled approximations use different signatures")

    ca = sorted(wa.constants)[:depth]
    cb = sorted(wb.constants)[:depth]
    agenda: list[tuple[str, int]] = []
    for i in range(depth):
        if i < len(ca):
            agenda.append(("a", ca[i]))
        if i < len(cb):
            agenda.append(("b", cb[i]))

    def named(w: FiniteStructure) -> tuple[list[int], dict[int, int]]:
        name: dict[int, int] = {}
        for c in sorted(w.constants):
            e = w.constants[c]
            name.setdefault(e, c)
        pool = sorted(name, key=lambda e: name[e])
        return pool, name

    pool_a, name_a = named(wa)
    pool_b, name_b = named(wb)

    types_a: dict[int, ETypeApprox] = {}
    types_b: dict[int, ETypeApprox] = {}

    def typ(w: FiniteStructure, memo: dict, e: int) -> ETypeApprox:
        if e not in memo:
            memo[e] = etype_of(w, (e,), 1)
        return memo[e]

    def gap(x: Dyadic, y: Dyadic) -> Dyadic:
        return x.dotminus(y) if x > y else y.dotminus(x)

    def compatible(
        m: dict[int, int], src: FiniteStructure, dst: FiniteStructure,
        x: int, y: int, tsrc: dict, tdst: dict,
    ) -> bool:
        if separation(typ(src, tsrc, x), typ(dst, tdst, y)) > eps:
            return False
        for u, v in m.items():
            if gap(src.metric_value(x, u), dst.metric_value(y, v)) > eps:
                return False
        dom = list(m) + [x]
        for sym in src.sig.predicates:
            for args in itertools.product(dom, repeat=sym.arity):
                if x not in args:
                    continue
                mapped = tuple(m[u] if u != x else y for u in args)
                if gap(src.pred_value(sym.name, args), dst.pred_value(sym.name, mapped)) > eps:
                    return False
        return True

    ma: dict[int, int] = {}  # a-element -> b-element
    deepest = -1
    deepest_info: Optional[dict] = None

    def record_failure(i: int, side: str, cst: int, elem: int) -> None:
        nonlocal deepest, deepest_info
        if i <= deepest:
            return
        deepest = i
        src, memo = (wa, types_a) if side == "a" else (wb, types_b)
        dst, dmemo = (wb, types_b) if side == "a" else (wa, types_a)
        pool = pool_b if side == "a" else pool_a
        t = typ(src, memo, elem)
        closest = None
        best = None
        for y in pool:
            s = separation(t, typ(dst, dmemo, y))
            if best is None or s < best:
                best, closest = s, typ(dst, dmemo, y)
        deepest_info = {
            "side": side,
            "constant": cst,
            "etype": t.to_json(),
            "closest": None if closest is None else closest.to_json(),
            "separation": None if best is None else str(best),
        }

    def dfs(i: int) -> bool:
        if i == len(agenda):
            return True
        side, cst = agenda[i]
        if side == "a":
            x = wa.constants[cst]
            if x in ma:
                return dfs(i + 1)
            used = set(ma.values())
            for y in pool_b:
                if y in used:
                    continue
                if compatible(ma, wa, wb, x, y, types_a, types_b):
                    ma[x] = y
                    if dfs(i + 1):
                        return True
                    del ma[x]
            record_failure(i, side, cst, x)
            return False
        y = wb.constants[cst]
        inv = {v: u for u, v in ma.items()}
        if y in inv:
            return dfs(i + 1)
        for x in pool_a:
            if x in ma:
                continue
            if compatible(inv, wb, wa, y, x, types_b, types_a):
                ma[x] = y
                if dfs(i + 1):
                    return True
                del ma[x]
        record_failure(i, side, cst, y)
        return False

    ok = dfs(0)
    if not ok:
        return BackForthResult(False, depth, eps, (), deepest_info)

    # reconstruct the chain of constant-level partial maps
    chain: list[tuple[tuple[int, int], ...]] = []
    seen: list[tuple[int, int]] = []
    for side, cst in agenda:
        if side == "a":
            x = wa.constants[cst]
            pair = (cst, name_b[ma[x]])
        else:
            y = wb.constants[cst]
            inv = {v: u for u, v in ma.items()}
            pair = (name_a[inv[y]], cst)
        if pair not in seen:
            seen.append(pair)
        chain.append(tuple(seen))
    return BackForthResult(True, depth, eps, tuple(chain), None)
