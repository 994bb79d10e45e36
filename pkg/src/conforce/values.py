"""Exact dyadic arithmetic on [0,1].

Every truth value, bound, and interval endpoint in the engine is a dyadic
rational k/2^m kept in canonical form (k odd, or k in {0,1} with m = 0).
All connective arithmetic stays inside [0,1]: negation is 1-x, dotplus is
addition truncated at 1, dotminus is subtraction truncated at 0. No floats
anywhere; floats appear only in reports, clearly labelled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional


def _normalize(num: int, exp: int) -> tuple[int, int]:
    while exp > 0 and num % 2 == 0:
        num //= 2
        exp -= 1
    return num, exp


@dataclass(frozen=True, order=False)
class Dyadic:
    """A dyadic rational num/2^exp in [0,1], canonical form."""

    num: int
    exp: int

    def __post_init__(self) -> None:
        if self.exp < 0:
            raise ValueError("negative exponent")
        if not (0 <= self.num <= (1 << self.exp)):
            raise ValueError(f"dyadic {self.num}/2^{self.exp} outside [0,1]")
        n, e = _normalize(self.num, self.exp)
        if (n, e) != (self.num, self.exp):
            object.__setattr__(self, "num", n)
            object.__setattr__(self, "exp", e)

    # -- comparisons (exact, via a common power of two) --

    def _pair(self, other: "Dyadic") -> tuple[int, int]:
        e = max(self.exp, other.exp)
        return self.num << (e - self.exp), other.num << (e - other.exp)

    def __lt__(self, other: "Dyadic") -> bool:
        a, b = self._pair(other)
        return a < b

    def __le__(self, other: "Dyadic") -> bool:
        a, b = self._pair(other)
        return a <= b

    def __gt__(self, other: "Dyadic") -> bool:
        return other < self

    def __ge__(self, other: "Dyadic") -> bool:
        return other <= self

    # -- connective arithmetic --

    def neg(self) -> "Dyadic":
        return Dyadic((1 << self.exp) - self.num, self.exp)

    def half(self) -> "Dyadic":
        return Dyadic(self.num, self.exp + 1)

    def dotplus(self, other: "Dyadic") -> "Dyadic":
        e = max(self.exp, other.exp)
        s = (self.num << (e - self.exp)) + (other.num << (e - other.exp))
        cap = 1 << e
        return Dyadic(min(s, cap), e)

    def dotminus(self, other: "Dyadic") -> "Dyadic":
        e = max(self.exp, other.exp)
        dif = (self.num << (e - self.exp)) - (other.num << (e - other.exp))
        return Dyadic(max(dif, 0), e)

    def try_add(self, other: "Dyadic") -> Optional["Dyadic"]:
        """Plain addition, or None when the sum leaves [0,1]."""
        e = max(self.exp, other.exp)
        s = (self.num << (e - self.exp)) + (other.num << (e - other.exp))
        if s > (1 << e):
            return None
        return Dyadic(s, e)

    # -- grid helpers --

    def on_grid(self, g: int) -> bool:
        return self.exp <= g

    def floor_to_grid(self, g: int) -> "Dyadic":
        if self.exp <= g:
            return self
        return Dyadic(self.num >> (self.exp - g), g)

    def ceil_to_grid(self, g: int) -> "Dyadic":
        if self.exp <= g:
            return self
        shift = self.exp - g
        return Dyadic(-((-self.num) >> shift), g)

    # -- formatting --

    def __str__(self) -> str:
        if self.num == 0:
            return "0"
        if self.exp == 0:
            return "1"
        return f"{self.num}/2^{self.exp}"

    def __repr__(self) -> str:
        return f"Dyadic({self})"

    def as_float(self) -> float:
        """Lossy; for human-facing reports only."""
        return self.num / (1 << self.exp)

    @staticmethod
    def parse(text: str) -> "Dyadic":
        t = text.strip()
        if t == "0":
            return ZERO
        if t == "1":
            return ONE
        if "/2^" in t:
            num_s, exp_s = t.split("/2^", 1)
            try:
                return Dyadic(int(num_s), int(exp_s))
            except ValueError as err:
                raise ValueError(f"bad dyadic literal {text!r}: {err}") from None
        raise ValueError(f"bad dyadic literal {text!r}")

    @staticmethod
    def grid(g: int) -> "list[Dyadic]":
        """All grid points k/2^g, k = 0..2^g, ascending."""
        return [Dyadic(k, g) for k in range((1 << g) + 1)]


ZERO = Dyadic(0, 0)
ONE = Dyadic(1, 0)
HALF = Dyadic(1, 1)


def dmin(values: Iterable[Dyadic]) -> Dyadic:
    vs = list(values)
    if not vs:
        raise ValueError("dmin of empty collection")
    out = vs[0]
    for v in vs[1:]:
        if v < out:
            out = v
    return out


def dmax(values: Iterable[Dyadic]) -> Dyadic:
    vs = list(values)
    if not vs:
        raise ValueError("dmax of empty collection")
    out = vs[0]
    for v in vs[1:]:
        if v > out:
            out = v
    return out


@dataclass(frozen=True)
class Interval:
    """A closed subinterval of [0,1] with dyadic endpoints, lo <= hi."""

    lo: Dyadic
    hi: Dyadic

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError(f"interval endpoints out of order: {self.lo} > {self.hi}")

    @staticmethod
    def point(v: Dyadic) -> "Interval":
        return Interval(v, v)

    @staticmethod
    def full() -> "Interval":
        return Interval(ZERO, ONE)

    def is_point(self) -> bool:
        return self.lo == self.hi

    def width(self) -> Dyadic:
        return self.hi.dotminus(self.lo)

    def contains(self, v: Dyadic) -> bool:
        return self.lo <= v <= self.hi

    def intersect(self, other: "Interval") -> Optional["Interval"]:
        lo = dmax([self.lo, other.lo])
        hi = dmin([self.hi, other.hi])
        if lo > hi:
            return None
        return Interval(lo, hi)

    # monotone image under each connective
    def neg(self) -> "Interval":
        return Interval(self.hi.neg(), self.lo.neg())

    def half(self) -> "Interval":
        return Interval(self.lo.half(), self.hi.half())

    def dotplus(self, other: "Interval") -> "Interval":
        return Interval(self.lo.dotplus(other.lo), self.hi.dotplus(other.hi))

    def join(self, other: "Interval") -> "Interval":
        """Pointwise min (the value of a two-member join)."""
        return Interval(dmin([self.lo, other.lo]), dmin([self.hi, other.hi]))

    def meet(self, other: "Interval") -> "Interval":
        return Interval(dmax([self.lo, other.lo]), dmax([self.hi, other.hi]))

    def __str__(self) -> str:
        return f"[{self.lo}, {self.hi}]"


def interval_min(intervals: Iterable[Interval]) -> Interval:
    out = None
    for iv in intervals:
        out = iv if out is None else out.join(iv)
    if out is None:
        raise ValueError("interval_min of empty collection")
    return out


def interval_max(intervals: Iterable[Interval]) -> Interval:
    out = None
    for iv in intervals:
        out = iv if out is None else out.meet(iv)
    if out is None:
        raise ValueError("interval_max of empty collection")
    return out
