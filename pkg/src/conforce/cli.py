"""Command-line entry points.

Every command prints a deterministic report (no timestamps, sorted keys)
so identical inputs give byte-identical output. Exit codes: 0 on pass,
1 on a definite failure (unsat verdict, failed suite, rejected replay),
2 on usage errors.
"""

from __future__ import annotations

import json
import sys
from typing import Optional

import click

from .values import Dyadic, ONE, HALF
from .logic import PredicateSymbol, Signature, classify, constants_of
from .syntax import parse_formula, print_formula, ParseError
from .structures import evaluate, structure_from_json, structure_to_json
from .oracle import (
    Condition,
    EMPTY_CONDITION,
    OracleSession,
    PoolBudget,
    SearchBounds,
    condition_from_json,
    condition_to_json,
)
from .forcing import NarrowError, narrow, value_report
from .game import play, transcript_from_json
from .enforcers import strategy_from_names
from .packs import load_theory
from . import suites


def _emit(doc: dict) -> None:
    click.echo(json.dumps(doc, indent=2, sort_keys=True))


def _parse_bounds(text: Optional[str]) -> Optional[SearchBounds]:
    if text is None:
        return None
    try:
        n_s, g_s = text.split(",")
        return SearchBounds(max_universe=int(n_s), grid_exp=int(g_s))
    except ValueError:
        raise click.UsageError("--bounds expects N,g (e.g. 6,4)")


def _session(theory_spec: str, bounds: Optional[str]) -> OracleSession:
    theory = load_theory(theory_spec)
    b = _parse_bounds(bounds)
    if b is None:
        g = 1 if theory.sig.classical else 4
        b = SearchBounds(max_universe=6, grid_exp=g)
    return OracleSession(theory, b)


def _load_condition(session: OracleSession, path: Optional[str]) -> Condition:
    if path is None:
        return EMPTY_CONDITION
    with open(path, "r", encoding="utf-8") as fh:
        return condition_from_json(json.load(fh), session.theory.sig)


def _formula(session: OracleSession, text: str):
    try:
        return parse_formula(text, session.theory.sig)
    except ParseError as e:
        raise click.ClickException(f"formula does not parse: {e}")


@click.group()
def main() -> None:
    """Forcing games for continuous first-order logic."""


@main.command("parse")
@click.option("--theory", default="graphs", help="theory pack name or file")
@click.option("--formula", required=True, help="formula text")
def cmd_parse(theory: str, formula: str) -> None:
    """Parse a formula and report its canonical form and class."""
    session = _session(theory, None)
    phi = _formula(session, formula)
    cls = classify(phi)
    _emit(
        {
            "formula": print_formula(phi),
            "constants": sorted(constants_of(phi)),
            "restricted": cls.restricted,
            "quantifier_free": cls.quantifier_free,
            "existential": cls.existential,
            "universal": cls.universal,
            "sup_join_inf": cls.sup_join_inf,
        }
    )


@main.command("eval")
@click.option("--structure", "structure_path", required=True, help="structure file")
@click.option("--formula", required=True, help="formula text")
@click.option("--theory", default=None, help="theory pack supplying the signature")
def cmd_eval(structure_path: str, formula: str, theory: Optional[str]) -> None:
    """Evaluate a sentence on a finite structure."""
    with open(structure_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if theory is not None:
        sig = load_theory(theory).sig
    else:
        # read the shape off the document: names with their key arities
        preds = tuple(
            PredicateSymbol(name, len(next(iter(tbl)).split(",")) if tbl else 1, 1)
            for name, tbl in sorted(doc.get("predicates", {}).items())
        )
        vals = [v for tbl in doc.get("predicates", {}).values() for v in tbl.values()]
        classical = all(Dyadic.parse(v) in (Dyadic(0, 0), ONE) for v in vals)
        sig = Signature(predicates=preds, functions=(), classical=classical)
    a = structure_from_json(doc, sig)
    try:
        phi = parse_formula(formula, sig)
    except ParseError as e:
        raise click.ClickException(f"formula does not parse: {e}")
    click.echo(str(evaluate(phi, a)))


@main.command("sat")
@click.option("--theory", required=True, help="theory pack name or file")
@click.option("--condition", "condition_path", default=None, help="condition file")
@click.option("--bounds", default=None, help="search bounds N,g")
def cmd_sat(theory: str, condition_path: Optional[str], bounds: Optional[str]) -> None:
    """Check a condition against the theory within bounds."""
    session = _session(theory, bounds)
    cond = _load_condition(session, condition_path)
    v = session.check(cond)
    doc = {
        "verdict": v.kind,
        "sound": v.sound,
        "reason": v.reason,
        "witness": structure_to_json(v.witness) if v.witness is not None else None,
    }
    _emit(doc)
    if not v.is_sat:
        sys.exit(1)


@main.command("force")
@click.option("--kind", type=click.Choice(["strong", "weak", "game"]), default="weak")
@click.option("--theory", required=True, help="theory pack name or file")
@click.option("--condition", "condition_path", default=None, help="condition file")
@click.option("--formula", required=True, help="sentence text")
@click.option("--bounds", default=None, help="search bounds N,g")
@click.option("--depth", default=2, show_default=True, help="game recursion depth")
@click.option("--exhaustive/--sampled", default=True, show_default=True)
def cmd_force(
    kind: str,
    theory: str,
    condition_path: Optional[str],
    formula: str,
    bounds: Optional[str],
    depth: int,
    exhaustive: bool,
) -> None:
    """Bracket a forcing value over the move-pool poset."""
    session = _session(theory, bounds)
    cond = _load_condition(session, condition_path)
    phi = _formula(session, formula)
    _emit(value_report(session, cond, phi, kind, depth, exhaustive))


@main.command("narrow")
@click.option("--theory", required=True, help="theory pack name or file")
@click.option("--condition", "condition_path", default=None, help="condition file")
@click.option("--formula", required=True, help="sentence text")
@click.option("--eps", default="1/2^3", show_default=True, help="target width")
@click.option("--bounds", default=None, help="search bounds N,g")
def cmd_narrow(
    theory: str,
    condition_path: Optional[str],
    formula: str,
    eps: str,
    bounds: Optional[str],
) -> None:
    """Extend a condition until it pins the sentence below eps."""
    session = _session(theory, bounds)
    cond = _load_condition(session, condition_path)
    phi = _formula(session, formula)
    try:
        res = narrow(session, cond, phi, Dyadic.parse(eps))
    except NarrowError as e:
        raise click.ClickException(str(e))
    _emit(
        {
            "condition": condition_to_json(res.condition),
            "interval": [str(res.interval.lo), str(res.interval.hi)],
        }
    )


def _strategy(session, names: str, seed: int, tracked):
    try:
        return strategy_from_names(session, names, seed, tracked)
    except ValueError as e:
        raise click.UsageError(str(e))


@main.command("play")
@click.option("--theory", required=True, help="theory pack name or file")
@click.option("--rounds", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option(
    "--policy", type=click.Choice(["strict", "optimistic"]), default="strict",
    show_default=True,
)
@click.option("--bounds", default=None, help="search bounds N,g")
@click.option("--replay", "replay_path", default=None, help="transcript file to replay")
@click.option("--builder", default="canonical+universal+ec", show_default=True)
@click.option("--adversary", default="random", show_default=True)
@click.option("--track", multiple=True, help="sentence the mischief adversary watches")
@click.option("--out", "out_path", default=None, help="write the transcript here")
def cmd_play(
    theory: str,
    rounds: int,
    seed: int,
    policy: str,
    bounds: Optional[str],
    replay_path: Optional[str],
    builder: str,
    adversary: str,
    track: tuple[str, ...],
    out_path: Optional[str],
) -> None:
    """Run a building game, or replay a recorded transcript."""
    session = _session(theory, bounds)
    if replay_path is not None:
        with open(replay_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        try:
            t = transcript_from_json(doc, session)
        except Exception as e:
            _emit({"replay": "rejected", "reason": str(e)})
            sys.exit(1)
        _emit({"replay": "ok", "moves": len(t.moves), "bounds": len(t.final().bounds)})
        return
    tracked = [_formula(session, s) for s in track]
    bld = _strategy(session, builder, seed, tracked)
    adv = _strategy(session, adversary, seed + 1, tracked)
    t = play(session, EMPTY_CONDITION, adv, bld, rounds, policy=policy)
    doc = t.to_json()
    if out_path is not None:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _emit({"moves": len(t.moves), "written": out_path})
    else:
        _emit(doc)


@main.command("verify")
@click.argument("suite", default="all")
@click.option("--seed", default=None, type=int, help="override the suite seed")
def cmd_verify(suite: str, seed: Optional[int]) -> None:
    """Run a named verification suite (or all of them)."""
    names = list(suites.SUITES) if suite == "all" else [suite]
    unknown = [n for n in names if n not in suites.SUITES]
    if unknown:
        raise click.UsageError(
            f"unknown suite {unknown[0]!r}; known: {', '.join(sorted(suites.SUITES))}"
        )
    ok = True
    for name in names:
        rep = suites.run_suite(name, seed=seed)
        click.echo(rep.line())
        ok = ok and rep.passed
    if not ok:
        sys.exit(1)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8765, show_default=True)
def cmd_serve(host: str, port: int) -> None:
    """Serve the interactive session API on loopback."""
    import uvicorn

    from .server import app

    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
