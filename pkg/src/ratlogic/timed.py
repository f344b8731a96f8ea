"""Finite timed words, integer-bounded intervals, clock regions and extensions.

Stamps are exact ``Fraction`` values. Positions are 1-based everywhere in the
public API; internally words store 0-based tuples.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Tuple

INF = None  # upper bound marker for unbounded intervals


class WordError(ValueError):
    pass


def to_rational(value) -> Fraction:
    """Exact conversion; decimal strings and floats are read through their text."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    text = str(value).strip()
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise WordError(f"not a rational: {text!r}") from exc


def format_rational(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class TimedWord:
    events: Tuple[frozenset, ...]
    stamps: Tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(frozenset(e) for e in self.events))
        object.__setattr__(self, "stamps", tuple(to_rational(t) for t in self.stamps))
        if len(self.events) != len(self.stamps):
            raise WordError("events and stamps differ in length")

    @classmethod
    def of(cls, pairs: Iterable[Tuple[Iterable[str], object]]) -> "TimedWord":
        """Build from ``(event, stamp)`` pairs; a bare string event is one proposition."""
        events, stamps = [], []
        for ev, t in pairs:
            events.append(frozenset([ev]) if isinstance(ev, str) else frozenset(ev))
            stamps.append(t)
        return cls(tuple(events), tuple(stamps))

    def __len__(self) -> int:
        return len(self.events)

    def event(self, i: int) -> frozenset:
        return self.events[i - 1]

    def stamp(self, i: int) -> Fraction:
        return self.stamps[i - 1]

    def positions(self) -> range:
        return range(1, len(self) + 1)

    def props(self) -> frozenset:
        out = set()
        for e in self.events:
            out |= e
        return frozenset(out)

    def is_strict(self) -> bool:
        return all(a < b for a, b in zip(self.stamps, self.stamps[1:]))

    def with_events(self, events: Sequence[Iterable[str]]) -> "TimedWord":
        return TimedWord(tuple(frozenset(e) for e in events), self.stamps)

    def __str__(self) -> str:
        return format_word(self)


def validate_word(w: TimedWord, strict: bool = False) -> Optional[str]:
    """Return ``None`` for a well-formed word, else a message naming the first violation."""
    if len(w) == 0:
        return "empty word"
    if w.stamps[0] != 0:
        return "first stamp nonzero"
    for i, (ev, t) in enumerate(zip(w.events, w.stamps), start=1):
        if t < 0:
            return f"negative stamp at {i}"
        if not ev:
            return f"empty event set at {i}"
        if i > 1:
            prev = w.stamps[i - 2]
            if t < prev:
                return f"non-monotone at {i}"
            if strict and t == prev:
                return f"repeated stamp at {i}"
    return None


def check_word(w: TimedWord, strict: bool = False) -> TimedWord:
    problem = validate_word(w, strict)
    if problem:
        raise WordError(problem)
    return w


_LINE = re.compile(r"^\s*t\s*=\s*([0-9./+-]+)\s*\{([^}]*)\}\s*$")


def parse_word(text: str, strict: bool = False) -> TimedWord:
    events, stamps = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        m = _LINE.match(line)
        if not m:
            raise WordError(f"line {lineno}: expected 't=<rational> {{p,...}}'")
        stamps.append(to_rational(m.group(1)))
        names = [p.strip() for p in m.group(2).split(",") if p.strip()]
        events.append(frozenset(names))
    return check_word(TimedWord(tuple(events), tuple(stamps)), strict)


def format_word(w: TimedWord) -> str:
    lines = []
    for ev, t in zip(w.events, w.stamps):
        lines.append(f"t={format_rational(t)} {{{','.join(sorted(ev))}}}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True, order=True)
class Interval:
    lo: int
    hi: Optional[int]
    lo_closed: bool = True
    hi_closed: bool = False

    def __post_init__(self):
        if self.lo < 0:
            raise ValueError("negative lower bound")
        if self.hi is None:
            if self.hi_closed:
                raise ValueError("infinite bound must be open")
            return
        if self.hi < self.lo:
            raise ValueError(f"empty interval {self.lo},{self.hi}")
        if self.hi == self.lo and not (self.lo_closed and self.hi_closed):
            raise ValueError("degenerate interval must be closed on both sides")

    @classmethod
    def closed(cls, lo: int, hi: Optional[int]) -> "Interval":
        return cls(lo, hi, True, hi is not None)

    @classmethod
    def open(cls, lo: int, hi: Optional[int]) -> "Interval":
        return cls(lo, hi, False, False)

    @classmethod
    def point(cls, c: int) -> "Interval":
        return cls(c, c, True, True)

    @property
    def bounded(self) -> bool:
        return self.hi is not None

    @property
    def punctual(self) -> bool:
        return self.hi == self.lo

    def contains(self, d) -> bool:
        if d < self.lo or (d == self.lo and not self.lo_closed):
            return False
        if self.hi is None:
            return True
        return d < self.hi or (d == self.hi and self.hi_closed)

    def constants(self) -> Tuple[int, ...]:
        return (self.lo,) if self.hi is None else (self.lo, self.hi)

    def __str__(self) -> str:
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        hi = "inf" if self.hi is None else str(self.hi)
        return f"{left}{self.lo},{hi}{right}"


ALWAYS = Interval(0, None, True, False)
FUTURE = Interval(0, None, False, False)


def in_interval(t, base, interval: Interval) -> bool:
    """``t - base`` lies in the interval; negative differences never do."""
    d = to_rational(t) - to_rational(base)
    return d >= 0 and interval.contains(d)


_INTERVAL = re.compile(r"^\s*([\[(])\s*(\d+)\s*,\s*(\d+|inf)\s*([\])])\s*$")


def parse_interval(text: str) -> Interval:
    m = _INTERVAL.match(text)
    if not m:
        raise ValueError(f"bad interval {text!r}")
    hi = None if m.group(3) == "inf" else int(m.group(3))
    return Interval(int(m.group(2)), hi, m.group(1) == "[", m.group(4) == "]")


@dataclass(frozen=True, order=True)
class Region:
    """Index 2i is [i,i], 2i+1 is (i,i+1), and 2K+1 is the unbounded (K,inf)."""

    index: int
    K: int

    @property
    def unbounded(self) -> bool:
        return self.index == 2 * self.K + 1

    @property
    def interval(self) -> Interval:
        i, odd = divmod(self.index, 2)
        if self.unbounded:
            return Interval(self.K, None, False, False)
        if odd:
            return Interval(i, i + 1, False, False)
        return Interval.point(i)

    def contains(self, d) -> bool:
        return self.interval.contains(d)

    def __str__(self) -> str:
        if self.unbounded:
            return f"R+{self.K}"
        return f"R{self.index}"


def regions(K: int) -> Tuple[Region, ...]:
    return tuple(Region(i, K) for i in range(2 * K + 2))


def region_of(t, K: int) -> Region:
    t = to_rational(t)
    if t < 0:
        raise ValueError("negative clock value")
    if t > K:
        return Region(2 * K + 1, K)
    whole = t.numerator // t.denominator
    return Region(2 * whole if t == whole else 2 * whole + 1, K)


@dataclass(frozen=True)
class Extension:
    """A word together with the points and symbols added to it.

    ``new_positions`` are 1-based positions of ``extended``.
    """

    base: TimedWord
    extended: TimedWord
    new_symbols: frozenset = frozenset()
    new_positions: frozenset = field(default_factory=frozenset)

    @property
    def simple(self) -> bool:
        return not self.new_positions


def erase(e: Extension) -> TimedWord:
    events, stamps = [], []
    for i in e.extended.positions():
        ev = e.extended.event(i)
        if i in e.new_positions:
            if ev - e.new_symbols:
                raise WordError(f"new position {i} carries old symbols {sorted(ev - e.new_symbols)}")
            continue
        events.append(ev - e.new_symbols)
        stamps.append(e.extended.stamp(i))
    out = TimedWord(tuple(events), tuple(stamps))
    if out != e.base:
        raise WordError("erasure does not reproduce the base word")
    return out


def erase_symbols(w: TimedWord, new_symbols: Iterable[str], keep) -> TimedWord:
    """Project an arbitrary word: drop positions failing ``keep(event)`` and the new symbols.

    Used on models found by search, which carry no recorded base.
    """
    drop = frozenset(new_symbols)
    events, stamps = [], []
    for ev, t in zip(w.events, w.stamps):
        if keep(ev):
            events.append(ev - drop)
            stamps.append(t)
    return TimedWord(tuple(events), tuple(stamps))
