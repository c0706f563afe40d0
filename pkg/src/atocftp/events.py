"""Event alphabets, alias sampling and replayable backward event streams.

A uniformized chain is described by a finite list of labelled events with a
probability distribution.  Coupling from the past needs to re-read the same
events ``a_0, a_{-1}, ...`` every time the horizon is doubled, so the stream is
counter based: the event at backward index ``t`` is a pure function of
``(seed, t)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

PROB_TOL = 1e-12


class EventKind(enum.IntEnum):
    DEMAND = 0
    SERVICE = 1  # individual replenishment s_i^(j)
    RETURN = 2  # joint return r^i_j


@dataclass(frozen=True)
class EventLabel:
    """One event of the alphabet.

    Items are 0-based.  ``subset`` is a bitmask (demands only); ``level`` is
    the 1-based index ``j`` of service and return events.
    """

    kind: EventKind
    subset: int = 0
    item: int = -1
    level: int = 0

    @classmethod
    def demand(cls, subset: int) -> "EventLabel":
        if subset <= 0:
            raise ValueError("demand subset must be non-empty")
        return cls(EventKind.DEMAND, subset=subset)

    @classmethod
    def service(cls, item: int, level: int) -> "EventLabel":
        return cls(EventKind.SERVICE, item=item, level=level)

    @classmethod
    def ret(cls, item: int, level: int) -> "EventLabel":
        return cls(EventKind.RETURN, item=item, level=level)

    def __str__(self) -> str:
        if self.kind is EventKind.DEMAND:
            return f"d{format_subset(self.subset)}"
        tag = "s" if self.kind is EventKind.SERVICE else "r"
        return f"{tag}[{self.item + 1}]^{self.level}"


def format_subset(mask: int) -> str:
    """Render a bitmask as a 1-based item list, e.g. ``0b101 -> "[1,3]"``."""
    return "[" + ",".join(str(i + 1) for i in subset_items(mask)) + "]"


def subset_items(mask: int) -> list[int]:
    items = []
    i = 0
    while mask:
        if mask & 1:
            items.append(i)
        mask >>= 1
        i += 1
    return items


def subset_mask(items: Sequence[int]) -> int:
    mask = 0
    for i in items:
        mask |= 1 << i
    return mask


@dataclass(frozen=True)
class EventAlphabet:
    """Events with their probabilities and the uniformization rate."""

    events: tuple[EventLabel, ...]
    probs: np.ndarray = field(repr=False)
    rate: float = 1.0

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if len(self.events) == 0:
            raise ConfigError("event alphabet is empty")
        if len(self.events) != len(probs):
            raise ConfigError("events and probabilities differ in length")
        if np.any(probs <= 0):
            raise ConfigError("event probabilities must be positive")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise ConfigError(f"event probabilities sum to {probs.sum()!r}, not 1")
        probs.setflags(write=False)

    @classmethod
    def from_rates(cls, events: Sequence[EventLabel], rates: Sequence[float],
                   total_rate: float | None = None) -> "EventAlphabet":
        """Normalize event rates by ``total_rate``, dropping zero-rate events."""
        rates = np.asarray(rates, dtype=float)
        if np.any(rates < 0):
            raise ConfigError("event rates must be non-negative")
        if total_rate is None:
            total_rate = float(rates.sum())
        if total_rate <= 0:
            raise ConfigError("all event rates are zero")
        keep = rates > 0
        kept = tuple(e for e, k in zip(events, keep) if k)
        return cls(kept, rates[keep] / total_rate, float(total_rate))

    def __len__(self) -> int:
        return len(self.events)

    def index(self, event: EventLabel) -> int:
        return self.events.index(event)


class AliasSampler:
    """Walker/Vose alias table: O(1) draws from a finite distribution.

    A single uniform ``u`` in [0, 1) selects column ``floor(u * n)`` and the
    fractional remainder decides between the column and its alias.
    """

    def __init__(self, probs: Sequence[float]):
        p = np.asarray(probs, dtype=float)
        n = len(p)
        if n == 0:
            raise ConfigError("cannot build an alias table for an empty alphabet")
        scaled = p * n / p.sum()
        threshold = np.ones(n)
        alias = np.arange(n, dtype=np.int64)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            g = large.pop()
            threshold[s] = scaled[s]
            alias[s] = g
            scaled[g] = (scaled[g] + scaled[s]) - 1.0
            (small if scaled[g] < 1.0 else large).append(g)
        # leftovers are 1 up to rounding
        for i in small + large:
            threshold[i] = 1.0
            alias[i] = i
        self.threshold = threshold
        self.alias = alias

    def __len__(self) -> int:
        return len(self.threshold)

    def draw(self, u: float) -> int:
        n = len(self.threshold)
        v = u * n
        col = min(int(v), n - 1)
        return col if v - col < self.threshold[col] else int(self.alias[col])

    def draw_many(self, u: np.ndarray) -> np.ndarray:
        n = len(self.threshold)
        v = np.asarray(u) * n
        col = np.minimum(v.astype(np.int64), n - 1)
        frac = v - col
        return np.where(frac < self.threshold[col], col, self.alias[col])

    def cell_masses(self) -> np.ndarray:
        """Measure of the uniform-variate space mapped to each outcome."""
        n = len(self.threshold)
        mass = np.zeros(n)
        for col in range(n):
            mass[col] += self.threshold[col] / n
            mass[self.alias[col]] += (1.0 - self.threshold[col]) / n
        return mass


def build_alias_sampler(alphabet: EventAlphabet) -> AliasSampler:
    return AliasSampler(alphabet.probs)


def splitmix64(z: int) -> int:
    z = (z + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int) -> int:
    return splitmix64(seed & MASK64)


def uniform_at(seed: int, t: int) -> float:
    """Uniform variate for backward index ``t``: SplitMix64 output ``t`` keyed on ``seed``."""
    h = splitmix64((stream_key(seed) + t * GOLDEN) & MASK64)
    return (h >> 11) * 2.0 ** -53


def uniforms(seed: int, start: int, stop: int) -> np.ndarray:
    """Vectorized :func:`uniform_at` for ``t in range(start, stop)``."""
    key = np.uint64(stream_key(seed))
    t = np.arange(start, stop, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = key + t * np.uint64(GOLDEN) + np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def mix_seed(base_seed: int, index: int) -> int:
    """Derive a replication seed from a base seed and an index."""
    return splitmix64((splitmix64(base_seed & MASK64) ^ (index & MASK64)) & MASK64)


class EventStream:
    """Replayable i.i.d. event sequence; ``event_at(t)`` is event ``a_{-t}``."""

    def __init__(self, seed: int, alphabet: EventAlphabet):
        self.seed = int(seed) & MASK64
        self.alphabet = alphabet
        self.sampler = build_alias_sampler(alphabet)

    def index_at(self, t: int) -> int:
        if t < 0:
            raise ValueError("backward index must be non-negative")
        return self.sampler.draw(uniform_at(self.seed, t))

    def event_at(self, t: int) -> EventLabel:
        return self.alphabet.events[self.index_at(t)]

    def indices(self, start: int, stop: int) -> np.ndarray:
        """Event indices for backward indices ``start <= t < stop``."""
        return self.sampler.draw_many(uniforms(self.seed, start, stop))

    def window(self, horizon: int) -> list[EventLabel]:
        """Events in forward order ``a_{-horizon+1}, ..., a_0``."""
        idx = self.indices(0, horizon)[::-1]
        ev = self.alphabet.events
        return [ev[i] for i in idx]


def event_at(stream: EventStream, t: int) -> EventLabel:
    return stream.event_at(t)
