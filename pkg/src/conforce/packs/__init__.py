"""Builtin theory packs and the pack file loader."""

from __future__ import annotations

import json
from importlib import resources
from typing import Optional

from ..logic import FunctionSymbol, PredicateSymbol, Signature
from ..oracle import Theory
from ..structures import structure_from_json
from ..syntax import parse_formula


def theory_from_json(doc: dict) -> Theory:
    sig_doc = doc.get("signature", {})
    preds = tuple(
        PredicateSymbol(p["name"], int(p["arity"]), int(p.get("lipschitz", 1)))
        for p in sig_doc.get("predicates", [])
    )
    funcs = tuple(
        FunctionSymbol(f["name"], int(f["arity"]), int(f.get("lipschitz", 1)))
        for f in sig_doc.get("functions", [])
    )
    sig = Signature(predicates=preds, functions=funcs, classical=bool(doc.get("classical", False)))
    axioms = tuple(parse_formula(text, sig) for text in doc.get("axioms", []))
    refs = tuple(structure_from_json(r, sig) for r in doc.get("references", []))
    return Theory(name=str(doc.get("name", "anonymous")), sig=sig, axioms=axioms, references=refs)


def theory_to_json(theory: Theory) -> dict:
    from ..structures import structure_to_json
    from ..syntax import print_formula

    return {
        "name": theory.name,
        "classical": theory.sig.classical,
        "signature": {
            "predicates": [
                {"name": p.name, "arity": p.arity, "lipschitz": p.lipschitz}
                for p in theory.sig.predicates
            ],
            "functions": [
                {"name": f.name, "arity": f.arity, "lipschitz": f.lipschitz}
                for f in theory.sig.functions
            ],
        },
        "axioms": [print_formula(ax) for ax in theory.axioms],
        "references": [structure_to_json(r) for r in theory.references],
    }


def load_theory_text(text: str) -> Theory:
    return theory_from_json(json.loads(text))


def load_theory(spec: str) -> Theory:
    """Resolve a theory argument: a readable file path wins, then a builtin
    pack name (`graphs`, `metric`)."""
    import os

    if os.path.exists(spec):
        with open(spec, "r", encoding="utf-8") as fh:
            return load_theory_text(fh.read())
    base = spec[:-5] if spec.endswith(".json") else spec
    return builtin_theory(base)


def builtin_theory(name: str) -> Theory:
    try:
        text = resources.files(__package__).joinpath(f"{name}.json").read_text()
    except FileNotFoundError:
        raise KeyError(f"no builtin theory pack named {name!r}") from None
    return load_theory_text(text)


def graphs() -> Theory:
    return builtin_theory("graphs")


def metric() -> Theory:
    return builtin_theory("metric")
