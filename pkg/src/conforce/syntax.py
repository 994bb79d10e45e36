"""Text form of formulas.

Grammar (ASCII):

    formula  := sum
    sum      := unary ( '(+)' unary )*        left associative
    unary    := '~' unary | 'half' unary | quant | primary
    quant    := ('sup'|'inf') xN '.' formula   body extends maximally
    primary  := atom | 'join' '{' formula (';' formula)* '}'
              | 'meet' '{' ... '}' | '(' formula ')'
    atom     := name '(' term (',' term)* ')' | 'd' '(' term ',' term ')'
    term     := 'cN' | 'xN' | fname '(' term (',' term)* ')' | fname

Unary operators bind tighter than '(+)'. Error positions are 1-based
character offsets into the input.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .logic import (
    Atomic,
    Const,
    Dist,
    DotPlus,
    Formula,
    Func,
    Half,
    Inf,
    Join,
    Meet,
    Neg,
    Signature,
    Sup,
    Term,
    Var,
    canonical_form,
)


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.message = message
        self.position = position


@dataclass
class _Token:
    kind: str  # 'ident', 'punct', 'plus', 'end'
    text: str
    pos: int  # 1-based offset of the first character


_PUNCT = "(){},;.~"


def _tokenize(text: str) -> list[_Token]:
    toks: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "(" and text[i : i + 3] == "(+)":
            toks.append(_Token("plus", "(+)", i + 1))
            i += 3
            continue
        if ch in _PUNCT:
            toks.append(_Token("punct", ch, i + 1))
            i += 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Token("ident", text[i:j], i + 1))
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", i + 1)
    toks.append(_Token("end", "", n + 1))
    return toks


class _Parser:
    def __init__(self, text: str, sig: Signature):
        self.toks = _tokenize(text)
        self.sig = sig
        self.idx = 0

    def peek(self) -> _Token:
        return self.toks[self.idx]

    def next(self) -> _Token:
        t = self.toks[self.idx]
        self.idx += 1
        return t

    def expect(self, text: str) -> _Token:
        t = self.peek()
        if t.text != text:
            raise ParseError(f"expected {text!r}", t.pos)
        return self.next()

    # -- terms --

    def _term_from_ident(self, tok: _Token) -> Term:
        name = tok.text
        if name[0] == "c" and name[1:].isdigit():
            return Const(int(name[1:]))
        if name[0] == "x" and name[1:].isdigit():
            return Var(int(name[1:]))
        if not self.sig.has_function(name):
            raise ParseError(f"unknown symbol {name!r}", tok.pos)
        sym = self.sig.function(name)
        args: tuple[Term, ...] = ()
        if self.peek().text == "(":
            self.next()
            parts = [self.term()]
            while self.peek().text == ",":
                self.next()
                parts.append(self.term())
            self.expect(")")
            args = tuple(parts)
        if len(args) != sym.arity:
            raise ParseError(
                f"function {name!r} expects {sym.arity} arguments, got {len(args)}",
                tok.pos,
            )
        return Func(name, args)

    def term(self) -> Term:
        t = self.peek()
        if t.kind != "ident":
            raise ParseError("expected a term", t.pos)
        return self._term_from_ident(self.next())

    # -- formulas --

    def formula(self) -> Formula:
        out = self.unary()
        while self.peek().kind == "plus":
            self.next()
            out = DotPlus(out, self.unary())
        return out

    def unary(self) -> Formula:
        t = self.peek()
        if t.text == "~":
            self.next()
            return Neg(self.unary())
        if t.text == "half":
            self.next()
            return Half(self.unary())
        if t.text in ("sup", "inf"):
            self.next()
            var_tok = self.peek()
            if not (
                var_tok.kind == "ident"
                and var_tok.text[0] == "x"
                and var_tok.text[1:].isdigit()
            ):
                raise ParseError("expected a variable xN", var_tok.pos)
            self.next()
            self.expect(".")
            body = self.formula()
            cls = Sup if t.text == "sup" else Inf
            return cls(int(var_tok.text[1:]), body)
        return self.primary()

    def primary(self) -> Formula:
        t = self.peek()
        if t.text == "(":
            self.next()
            out = self.formula()
            self.expect(")")
            return out
        if t.text in ("join", "meet"):
            self.next()
            self.expect("{")
            members = [self.formula()]
            while self.peek().text == ";":
                self.next()
                members.append(self.formula())
            self.expect("}")
            return Join(tuple(members)) if t.text == "join" else Meet(tuple(members))
        if t.kind == "ident":
            return self.atom()
        raise ParseError("expected a formula", t.pos)

    def atom(self) -> Formula:
        tok = self.next()
        name = tok.text
        if name == "d":
            self.expect("(")
            a = self.term()
            self.expect(",")
            b = self.term()
            self.expect(")")
            return Dist(a, b)
        if not self.sig.has_predicate(name):
            raise ParseError(f"unknown symbol {name!r}", tok.pos)
        sym = self.sig.predicate(name)
        self.expect("(")
        parts = [self.term()]
        while self.peek().text == ",":
            self.next()
            parts.append(self.term())
        self.expect(")")
        if len(parts) != sym.arity:
            raise ParseError(
                f"predicate {name!r} expects {sym.arity} arguments, got {len(parts)}",
                tok.pos,
            )
        return Atomic(name, tuple(parts))


def parse_formula(text: str, sig: Signature) -> Formula:
    p = _Parser(text, sig)
    out = p.formula()
    tail = p.peek()
    if tail.kind != "end":
        raise ParseError(f"unexpected trailing input {tail.text!r}", tail.pos)
    return out


def parse_term(text: str, sig: Signature) -> Term:
    p = _Parser(text, sig)
    out = p.term()
    tail = p.peek()
    if tail.kind != "end":
        raise ParseError(f"unexpected trailing input {tail.text!r}", tail.pos)
    return out


# ---------------------------------------------------------------------------
# printing (canonical; parse(print(phi)) == phi)

# precedence levels: 0 formula/quantifier body, 1 dotplus chain, 2 unary/operand
_PREC_SUM = 1
_PREC_UNARY = 2


def print_term(t: Term) -> str:
    if isinstance(t, Var):
        return f"x{t.index}"
    if isinstance(t, Const):
        return f"c{t.index}"
    if not t.args:
        return t.name
    return f"{t.name}({', '.join(print_term(a) for a in t.args)})"


def _print(phi: Formula, min_prec: int) -> str:
    if isinstance(phi, Atomic):
        return f"{phi.name}({', '.join(print_term(a) for a in phi.args)})"
    if isinstance(phi, Dist):
        return f"d({print_term(phi.left)}, {print_term(phi.right)})"
    if isinstance(phi, Neg):
        return f"~{_print(phi.sub, _PREC_UNARY)}"
    if isinstance(phi, Half):
        return f"half {_print(phi.sub, _PREC_UNARY)}"
    if isinstance(phi, DotPlus):
        body = f"{_print(phi.left, _PREC_SUM)} (+) {_print(phi.right, _PREC_UNARY)}"
        return f"({body})" if min_prec > _PREC_SUM else body
    if isinstance(phi, (Sup, Inf)):
        word = "sup" if isinstance(phi, Sup) else "inf"
        body = f"{word} x{phi.var} . {_print(phi.body, 0)}"
        # a quantifier body extends maximally, so anything but tail
        # position needs parentheses
        return f"({body})" if min_prec > 0 else body
    word = "join" if isinstance(phi, Join) else "meet"
    inner = "; ".join(_print(m, 0) for m in phi.members)
    return f"{word}{{{inner}}}"


def print_formula(phi: Formula) -> str:
    return _print(phi, 0)


def formula_key(phi: Formula) -> str:
    """Canonical total-order key used everywhere determinism matters."""
    return print_formula(phi)


@lru_cache(maxsize=65536)
def canonical_key(phi: Formula) -> str:
    """Key modulo symmetry of the distance atom: matches bounds on the
    same value regardless of how d's arguments were written."""
    return formula_key(canonical_form(phi))
