"""Two-player building games over conditions.

The odd player (the adversary, labelled A) moves first; the even player
(the builder, labelled E) answers. A move is a finite batch of strict
bounds added to the shared condition and must keep it certifiably
satisfiable. An illegal proposal forfeits: the move is recorded as a
flagged stall and play stops, so a forfeit on the third A turn leaves a
five-entry transcript.

Strategies are stateless: everything they need is recomputed from the
transcript, which makes plays replayable move by move.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Protocol, Sequence

from .values import Dyadic, Interval, ZERO, ONE
from .logic import Formula, Neg, rename_constants
from .oracle import Condition, OracleSession, PoolBudget, SearchBounds, Verdict
from .forcing import CompiledApprox, compile_condition, f_value
from .structures import FiniteStructure, structure_from_json, structure_to_json
from .syntax import formula_key, parse_formula, print_formula

Addition = tuple[Formula, Dyadic]


class GameError(ValueError):
    pass


@dataclass(frozen=True)
class Move:
    player: str  # "A" or "E"
    additions: tuple[Addition, ...] = ()
    flags: tuple[str, ...] = ()
    note: str = ""

    @property
    def is_stall(self) -> bool:
        return not self.additions

    def rename(self, perm) -> "Move":
        return replace(
            self,
            additions=tuple((rename_constants(f, perm), r) for f, r in self.additions),
        )


@dataclass
class Transcript:
    theory_name: str
    initial: Condition
    moves: list[Move] = field(default_factory=list)
    conditions: list[Condition] = field(default_factory=list)

    def final(self) -> Condition:
        return self.conditions[-1] if self.conditions else self.initial

    def next_player(self) -> str:
        return "A" if len(self.moves) % 2 == 0 else "E"

    def fresh_base(self) -> int:
        consts = self.final().constants()
        return (max(consts) + 1) if consts else 0

    def own_moves(self, player: str) -> list[Move]:
        return [m for m in self.moves if m.player == player]

    def forfeited(self) -> bool:
        return any("forfeit" in m.flags for m in self.moves)

    def to_json(self) -> dict:
        def enc(pairs):
            return [[print_formula(f), str(r)] for f, r in pairs]

        moves = []
        for m, cond in zip(self.moves, self.conditions):
            entry = {
                "player": m.player,
                "additions": enc(m.additions),
                "flags": list(m.flags),
                "note": m.note,
            }
            cert = cond.certificate
            if m.additions and cert is not None and cert.witness is not None:
                # the certifying witness rides along so a replay can
                # re-validate moves whose models only an enforcer's
                # construction would find within budget
                entry["witness"] = structure_to_json(cert.witness)
            moves.append(entry)
        return {
            "theory": self.theory_name,
            "initial": enc(self.initial.bounds),
            "moves": moves,
        }


def transcript_from_json(doc: dict, session: OracleSession) -> Transcript:
    """Rebuild and re-certify a transcript from its wire form."""
    sig = session.theory.sig

    def dec(pairs) -> list[Addition]:
        return [(parse_formula(t, sig), Dyadic.parse(r)) for t, r in pairs]

    initial = session.certify(Condition.make(dec(doc.get("initial", []))))
    t = Transcript(doc.get("theory", session.theory.name), initial)
    cond = initial
    for m in doc.get("moves", []):
        move = Move(
            player=m["player"],
            additions=tuple(dec(m.get("additions", []))),
            flags=tuple(m.get("flags", [])),
            note=m.get("note", ""),
        )
        if move.additions and "forfeit" not in move.flags:
            hint = None
            if "witness" in m:
                hint = structure_from_json(m["witness"], sig)
            verdict = session.extend_check(cond, list(move.additions), hint=hint)
            # recorded hints are re-validated, never trusted; a move that
            # was let through unverified may stay unverified on replay
            ok = verdict.is_sat or (
                "unverified" in move.flags and verdict.kind == "unknown"
            )
            if not ok:
                raise GameError("replay found an illegal recorded move")
            cond = Condition(cond.extend(move.additions).bounds, verdict)
        t.moves.append(move)
        t.conditions.append(cond)
    return t


@dataclass(frozen=True)
class MoveReport:
    """Outcome of a legality check; rejections are values, not errors."""

    ok: bool
    reason: str = ""
    verdict: Optional[Verdict] = None

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "reason": self.reason,
            "verdict": self.verdict.kind if self.verdict else None,
        }


def legal_move(
    session: OracleSession,
    t: Transcript,
    q: Condition,
    bounds: Optional[SearchBounds] = None,
    policy: str = "strict",
) -> MoveReport:
    """A proposed next condition is legal iff it extends the current one
    setwise and stays certifiable. Stalling (q equal to the last move) is
    legal because extension is reflexive."""
    last = t.final()
    if not q.extends(last):
        return MoveReport(False, "not an extension")
    verdict = session.extend_check(last, list(q.bounds), bounds)
    ok = verdict.is_sat or (policy == "optimistic" and verdict.kind == "unknown")
    if not ok:
        return MoveReport(False, "not a condition", verdict)
    return MoveReport(True, "", verdict)


# ---------------------------------------------------------------------------
# strategies


@dataclass(frozen=True)
class Proposal:
    additions: tuple[Addition, ...]
    hint: Optional[FiniteStructure] = None
    note: str = ""


STALL = Proposal(())


class Strategy(Protocol):
    name: str

    def propose(self, session: OracleSession, transcript: Transcript) -> Proposal: ...


class Task(Protocol):
    """One unit of building work, consulted round-robin by TaskStrategy.
    Returns None once nothing is left to do at the given condition. A task
    may also expose reserved() -> set[int], the constants its schedule will
    eventually mention, so sibling tasks never claim them as fresh names."""

    name: str

    def propose(
        self, session: OracleSession, cond: Condition, fresh_base: int
    ) -> Optional[Proposal]: ...


@dataclass
class TaskStrategy:
    """Rotates over tasks; the rotation offset is derived from the number
    of own moves already played, so the strategy carries no state."""

    tasks: Sequence[Task]
    player: str = "E"
    name: str = "tasks"

    def propose(self, session: OracleSession, transcript: Transcript) -> Proposal:
        if not self.tasks:
            return STALL
        cond = transcript.final()
        base = transcript.fresh_base()
        for t in self.tasks:
            held = getattr(t, "reserved", None)
            if held is None:
                continue
            # fresh names must clear every constant any sibling schedule
            # will eventually mention, played or not
            for c in held():
                base = max(base, c + 1)
        start = len(transcript.own_moves(self.player)) % len(self.tasks)
        for i in range(len(self.tasks)):
            task = self.tasks[(start + i) % len(self.tasks)]
            prop = task.propose(session, cond, base)
            if prop is None or not prop.additions:
                continue
            verdict = session.extend_check(cond, list(prop.additions), hint=prop.hint)
            if verdict.is_sat:
                return replace(prop, note=prop.note or task.name)
        return STALL


def conjoin(*strategies: TaskStrategy, name: str = "conjoined") -> TaskStrategy:
    """Interleave the task lists of several strategies into one."""
    tasks: list[Task] = []
    for s in strategies:
        tasks.extend(s.tasks)
    player = strategies[0].player if strategies else "E"
    return TaskStrategy(tuple(tasks), player, name)


@dataclass
class StallStrategy:
    name: str = "stall"

    def propose(self, session: OracleSession, transcript: Transcript) -> Proposal:
        return STALL


@dataclass
class RandomLegalStrategy:
    """Plays a uniformly chosen certified pool move; the generator is
    reseeded from (seed, move index) so replays agree."""

    seed: int
    pool: PoolBudget = PoolBudget()
    name: str = "random-legal"

    def propose(self, session: OracleSession, transcript: Transcript) -> Proposal:
        cond = transcript.final()
        moves = session.move_pool(cond, self.pool)
        options = [m for m in moves if m.key() != cond.key()]
        if not options:
            return STALL
        rng = random.Random(self.seed * 1_000_003 + len(transcript.moves) * 7919)
        pick = options[rng.randrange(len(options))]
        new = tuple(b for b in pick.bounds if b not in set(cond.bounds))
        w = pick.certificate.witness if pick.certificate else None
        return Proposal(new, hint=w, note="pool-sample")


@dataclass
class MischiefStrategy:
    """Picks the pool move that keeps the tracked sentences as loose as
    possible (maximal total pinned-interval width), first key on ties."""

    tracked: Sequence[Formula]
    pool: PoolBudget = PoolBudget()
    name: str = "mischief"

    def propose(self, session: OracleSession, transcript: Transcript) -> Proposal:
        cond = transcript.final()
        moves = session.move_pool(cond, self.pool)
        best = None
        best_score = None
        for m in sorted(moves, key=lambda c: c.key()):
            if m.key() == cond.key():
                continue
            score = self._score(m)
            if best_score is None or score > best_score:
                best, best_score = m, score
        if best is None:
            return STALL
        new = tuple(b for b in best.bounds if b not in set(cond.bounds))
        w = best.certificate.witness if best.certificate else None
        return Proposal(new, hint=w, note="mischief")

    def _score(self, cond: Condition) -> tuple:
        exps = [0]
        widths = []
        for phi in self.tracked:
            hi = f_value(cond, phi)
            lo = f_value(cond, Neg(phi)).neg()
            if lo > hi:
                lo = hi
            w = hi.dotminus(lo)
            widths.append(w)
            exps.append(w.exp)
        e = max(exps)
        total = sum(w.num << (e - w.exp) for w in widths)
        return (total, -e)


# ---------------------------------------------------------------------------
# the play loop


def play(
    session: OracleSession,
    initial: Condition,
    adversary: Strategy,
    builder: Strategy,
    rounds: int,
    policy: str = "strict",
    bounds: Optional[SearchBounds] = None,
) -> Transcript:
    """Alternate A and E for the given number of rounds. Policy "strict"
    treats unknown verdicts as illegal; "optimistic" lets them through
    flagged as unverified."""
    if policy not in ("strict", "optimistic"):
        raise GameError(f"unknown policy {policy!r}")
    b = bounds or session.default_bounds
    cond = initial if initial.certificate else session.certify(initial, b)
    t = Transcript(session.theory.name, cond)
    players = {"A": adversary, "E": builder}
    for _ in range(rounds):
        for label in ("A", "E"):
            strat = players[label]
            prop = strat.propose(session, t)
            if not prop.additions:
                t.moves.append(Move(label, (), note=prop.note or "stall"))
                t.conditions.append(t.final())
                continue
            try:
                verdict = session.extend_check(
                    t.final(), list(prop.additions), b, hint=prop.hint
                )
            except Exception:
                verdict = Verdict("unknown", bounds=b, reason="proposal rejected")
            ok = verdict.is_sat or (policy == "optimistic" and verdict.kind == "unknown")
            if not ok:
                t.moves.append(
                    Move(label, (), flags=("forfeit", f"illegal:{verdict.kind}"))
                )
                t.conditions.append(t.final())
                return t
            flags = () if verdict.is_sat else ("unverified",)
            # an unknown verdict rides along so nothing downstream can
            # mistake the condition for a certified one
            nxt = Condition(t.final().extend(prop.additions).bounds, verdict)
            t.moves.append(Move(label, tuple(prop.additions), flags, prop.note))
            t.conditions.append(nxt)
    return t


def play_multi(
    session: OracleSession,
    initial: Condition,
    pairs: Sequence[tuple[Strategy, Strategy]],
    rounds: int,
    policy: str = "strict",
) -> list[Transcript]:
    """Independent plays sharing one oracle session (and so its memo)."""
    return [play(session, initial, a, e, rounds, policy) for a, e in pairs]


# ---------------------------------------------------------------------------
# checks and compilation


@dataclass(frozen=True)
class DefinitiveReport:
    ok: bool
    eps: Dyadic
    entries: tuple[tuple[str, Interval], ...]

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "eps": str(self.eps),
            "entries": {k: [str(iv.lo), str(iv.hi)] for k, iv in self.entries},
        }


def definitive_check(
    transcript: Transcript, tracked: Sequence[Formula], eps: Dyadic
) -> DefinitiveReport:
    """A play is definitive for the tracked sentences when every pinned
    interval [1 - f(~phi), f(phi)] has width at most eps."""
    cond = transcript.final()
    entries = []
    ok = True
    for phi in tracked:
        hi = f_value(cond, phi)
        lo = f_value(cond, Neg(phi)).neg()
        if lo > hi:
            lo = hi
        iv = Interval(lo, hi)
        entries.append((formula_key(phi), iv))
        if not (iv.width() <= eps):
            ok = False
    return DefinitiveReport(ok, eps, tuple(entries))


def compile_transcript(
    transcript: Transcript, tracked: Sequence[Formula]
) -> CompiledApprox:
    return compile_condition(transcript.final(), tracked)


# ---------------------------------------------------------------------------
# transport along constant permutations


def transport_transcript(t: Transcript, perm: dict[int, int]) -> Transcript:
    out = Transcript(t.theory_name, t.initial.rename(perm))
    out.moves = [m.rename(perm) for m in t.moves]
    out.conditions = [c.rename(perm) for c in t.conditions]
    return out


@dataclass
class TransportedStrategy:
    """View of a strategy through a constant permutation: the transcript
    is pulled back, the proposal pushed forward."""

    inner: Strategy
    perm: dict[int, int]
    name: str = "transported"

    def propose(self, session: OracleSession, transcript: Transcript) -> Proposal:
        back = {v: k for k, v in self.perm.items()}
        pulled = transport_transcript(transcript, back)
        prop = self.inner.propose(session, pulled)
        return Proposal(
            tuple((rename_constants(f, self.perm), r) for f, r in prop.additions),
            hint=None,
            note=prop.note,
        )


# ---------------------------------------------------------------------------
# splitting plays


class PairStrategy(Protocol):
    """Produces one split: two certifiable batches that disagree on some
    atom, used at a single node of a splitting play."""

    def split(
        self, session: OracleSession, cond: Condition, address: str
    ) -> tuple[Proposal, Proposal]: ...


@dataclass
class SplitNode:
    address: str  # bitstring, "" for the root
    condition: Condition
    atom_key: Optional[str] = None  # the atom the two children disagree on


def play_splitting(
    session: OracleSession,
    initial: Condition,
    make_pair: Callable[[str], PairStrategy],
    levels: int,
    bounds: Optional[SearchBounds] = None,
) -> dict[str, SplitNode]:
    """Grow a binary tree of conditions: each node is split by its own
    pair strategy, siblings share the parent prefix verbatim. Returns all
    nodes keyed by bitstring address; leaves sit at the given level."""
    b = bounds or session.default_bounds
    root = initial if initial.certificate else session.certify(initial, b)
    nodes: dict[str, SplitNode] = {"": SplitNode("", root)}
    frontier = [""]
    for _ in range(levels):
        nxt = []
        for addr in frontier:
            node = nodes[addr]
            pair = make_pair(addr)
            left, right = pair.split(session, node.condition, addr)
            if not left.additions or not right.additions:
                raise GameError(f"split at {addr!r} returned an empty side")
            vl = session.extend_check(node.condition, list(left.additions), b, hint=left.hint)
            vr = session.extend_check(node.condition, list(right.additions), b, hint=right.hint)
            if not (vl.is_sat and vr.is_sat):
                raise GameError(f"split at {addr!r} is not certifiable on both sides")
            nodes[addr].atom_key = left.note or None
            for bit, prop, v in (("0", left, vl), ("1", right, vr)):
                child = Condition(node.condition.extend(prop.additions).bounds, v)
                nodes[addr + bit] = SplitNode(addr + bit, child)
                nxt.append(addr + bit)
        frontier = nxt
    return nodes


@dataclass
class AtomPairStrategy:
    """Splits on one atom over two fresh constants: the left side pins it
    low, the right side pins it high."""

    atom_of: Callable[[int], Formula]  # fresh base -> atom on fresh constants
    margin: Dyadic = Dyadic(1, 1)

    def split(
        self, session: OracleSession, cond: Condition, address: str
    ) -> tuple[Proposal, Proposal]:
        consts = cond.constants()
        base = (max(consts) + 1) if consts else 0
        alpha = self.atom_of(base)
        key = formula_key(alpha)
        left = Proposal(((alpha, self.margin),), note=key)
        right = Proposal(((Neg(alpha), self.margin),), note=key)
        return left, right


def lift_pairwise(
    atom_of: Callable[[int], Formula], margin: Dyadic = Dyadic(1, 1)
) -> Callable[[str], PairStrategy]:
    """One independent pair strategy per split node (the factory form the
    splitting play expects)."""

    def make(address: str) -> PairStrategy:
        return AtomPairStrategy(atom_of, margin)

    return make


def splitting_leaves(nodes: dict[str, SplitNode], levels: int) -> list[SplitNode]:
    return [nodes[a] for a in sorted(nodes) if len(a) == levels]


def lca_address(a: str, b: str) -> str:
    i = 0
    while i < min(len(a), len(b)) and a[i] == b[i]:
        i += 1
    return a[:i]
