"""Capacity-bounded integer vectors under the product order.

States are plain tuples of ints; intervals are ``Interval(lo, hi)`` pairs.
"""

from __future__ import annotations

from itertools import product
from typing import Iterator, NamedTuple, Sequence

from .errors import ConfigError

MAX_ITEMS = 63

State = tuple[int, ...]


class Interval(NamedTuple):
    lo: State
    hi: State

    def __str__(self) -> str:
        return f"[{format_state(self.lo)},{format_state(self.hi)}]"


def check_caps(caps: Sequence[int]) -> tuple[int, ...]:
    caps = tuple(int(c) for c in caps)
    if not 1 <= len(caps) <= MAX_ITEMS:
        raise ConfigError(f"number of items must be in 1..{MAX_ITEMS}, got {len(caps)}")
    if any(c < 1 for c in caps):
        raise ConfigError(f"capacities must be >= 1, got {caps}")
    return caps


def check_state(x: Sequence[int], caps: Sequence[int]) -> State:
    x = tuple(int(v) for v in x)
    if len(x) != len(caps):
        raise ValueError(f"state {x} has dimension {len(x)}, expected {len(caps)}")
    if any(v < 0 or v > c for v, c in zip(x, caps)):
        raise ValueError(f"state {x} outside capacities {tuple(caps)}")
    return x


def leq(x: Sequence[int], y: Sequence[int]) -> bool:
    if len(x) != len(y):
        raise ValueError("dimension mismatch")
    return all(a <= b for a, b in zip(x, y))


def bottom(caps: Sequence[int]) -> State:
    return (0,) * len(caps)


def top(caps: Sequence[int]) -> State:
    return tuple(caps)


def meet(x: Sequence[int], y: Sequence[int]) -> State:
    return tuple(min(a, b) for a, b in zip(x, y))


def join(x: Sequence[int], y: Sequence[int]) -> State:
    return tuple(max(a, b) for a, b in zip(x, y))


def is_singleton(iv: Interval) -> bool:
    return tuple(iv.lo) == tuple(iv.hi)


def contains(iv: Interval, x: Sequence[int]) -> bool:
    return leq(iv.lo, x) and leq(x, iv.hi)


def interval_states(iv: Interval) -> Iterator[State]:
    """All states of ``[lo, hi]`` in lexicographic order."""
    return product(*(range(a, b + 1) for a, b in zip(iv.lo, iv.hi)))


def all_states(caps: Sequence[int]) -> Iterator[State]:
    return interval_states(Interval(bottom(caps), top(caps)))


def all_intervals(caps: Sequence[int]) -> Iterator[Interval]:
    states = list(all_states(caps))
    for lo in states:
        for hi in states:
            if leq(lo, hi):
                yield Interval(lo, hi)


def hull(states) -> Interval:
    """Smallest interval containing a non-empty collection of states."""
    it = iter(states)
    first = tuple(next(it))
    lo, hi = first, first
    for x in it:
        lo, hi = meet(lo, x), join(hi, x)
    return Interval(lo, hi)


def format_state(x: Sequence[int]) -> str:
    return "(" + ",".join(str(int(v)) for v in x) + ")"


def parse_state(text: str) -> State:
    body = text.strip().strip("()")
    return tuple(int(v) for v in body.split(",")) if body else ()
