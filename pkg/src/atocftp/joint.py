"""ATO-POS with joint returns (the service tools model).

The exact state counts ``n_A``, the number of item sets ``A`` currently at
customers; all items of a set come back together.  The chain is simulated on
the projection ``x_i = sum_{A containing i} n_A`` through the supremum and
infimum chains, whose one-step images are the componentwise extrema of the
projected images over all states with the same projection.

Return events ``r^i_j`` act on the sets whose smallest item is ``i``, scanned
in the fixed order given by :func:`subset_ordering`; ``r^i_j`` returns the set
holding the ``j``-th unit in that scan, so each set ``A`` returns at rate
``mu * n_A``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, SizeError
from .events import EventAlphabet, EventKind, EventLabel, format_subset, subset_items
from .individual import Bound, item_arrival_rates, normalize_demands
from .lattice import Interval, State, check_caps


def lowest_item(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


@dataclass(frozen=True)
class StateN:
    """Sparse counts of outstanding item sets, keyed by subset bitmask."""

    counts: tuple[tuple[int, int], ...] = ()

    @classmethod
    def of(cls, counts: Mapping | Iterable = ()) -> "StateN":
        items = counts.items() if isinstance(counts, Mapping) else counts
        merged: dict[int, int] = {}
        for key, c in items:
            mask = key if isinstance(key, int) else sum(1 << i for i in key)
            if mask <= 0:
                raise ValueError("subset keys must be non-empty")
            if c < 0:
                raise ValueError("counts must be non-negative")
            merged[mask] = merged.get(mask, 0) + int(c)
        return cls(tuple(sorted((m, c) for m, c in merged.items() if c > 0)))

    def get(self, mask: int) -> int:
        for m, c in self.counts:
            if m == mask:
                return c
        return 0

    def as_dict(self) -> dict[int, int]:
        return dict(self.counts)

    def __bool__(self) -> bool:
        return bool(self.counts)

    def __str__(self) -> str:
        return "{" + ",".join(f"{format_subset(m)}:{c}" for m, c in self.counts) + "}"


EMPTY = StateN()


def project(n: StateN, n_items: int) -> State:
    x = [0] * n_items
    for mask, c in n.counts:
        for i in subset_items(mask):
            x[i] += c
    return tuple(x)


def check_state_n(n: StateN, caps: Sequence[int]) -> StateN:
    x = project(n, len(caps))
    if any(v > c for v, c in zip(x, caps)):
        raise ValueError(f"state {n} exceeds capacities {tuple(caps)}")
    if any(m >> len(caps) for m, _ in n.counts):
        raise ValueError(f"state {n} uses items beyond {len(caps)}")
    return n


def subset_ordering(i: int, k: int, n_items: int) -> int:
    """Bitmask of ``A^i_k``: ``i`` plus each later item ``s`` whose bit
    ``(n_items - 1 - s)`` of ``k`` is 0."""
    width = n_items - 1 - i
    if not 0 <= i < n_items:
        raise ValueError(f"item {i} out of range")
    if not 0 <= k < 1 << width:
        raise ValueError(f"index {k} out of range for item {i}")
    mask = 1 << i
    for s in range(i + 1, n_items):
        if not k >> (n_items - 1 - s) & 1:
            mask |= 1 << s
    return mask


def subset_rank(mask: int, n_items: int) -> tuple[int, int]:
    """Inverse of :func:`subset_ordering`: the pair ``(i, k)`` of ``mask``."""
    i = lowest_item(mask)
    k = 0
    for s in range(i + 1, n_items):
        if not mask >> s & 1:
            k |= 1 << (n_items - 1 - s)
    return i, k


@dataclass(frozen=True)
class JointModel:
    caps: tuple[int, ...]
    demands: dict[int, float]
    mu: float
    alphabet: EventAlphabet = field(repr=False)

    @property
    def n_items(self) -> int:
        return len(self.caps)

    @property
    def rate(self) -> float:
        return self.alphabet.rate

    @property
    def demand_rate(self) -> float:
        return sum(self.demands.values())

    @property
    def arrival_rates(self) -> tuple[float, ...]:
        return item_arrival_rates(self.demands, self.n_items)

    def permuted(self, order: Sequence[int]) -> "JointModel":
        """Renumber items so that new item ``p`` is old item ``order[p]``."""
        if sorted(order) != list(range(self.n_items)):
            raise ValueError(f"{order!r} is not a permutation of the items")
        new_pos = {old: new for new, old in enumerate(order)}
        demands = {}
        for a, r in self.demands.items():
            demands[sum(1 << new_pos[i] for i in subset_items(a))] = r
        return build_joint_model([self.caps[o] for o in order], demands, self.mu)

    def with_rates(self, demand_scale: float = 1.0, mu: float | None = None) -> "JointModel":
        return build_joint_model(
            self.caps, {a: r * demand_scale for a, r in self.demands.items()},
            self.mu if mu is None else mu)


def build_joint_model(caps: Sequence[int], demands: Mapping, mu: float) -> JointModel:
    caps = check_caps(caps)
    mu = float(mu)
    if mu <= 0:
        raise ConfigError("the return rate mu must be positive")
    dem = normalize_demands(demands, len(caps))
    events = [EventLabel.demand(a) for a in dem]
    rates = list(dem.values())
    for i, c in enumerate(caps):
        for j in range(1, c + 1):
            events.append(EventLabel.ret(i, j))
            rates.append(mu)
    total = sum(dem.values()) + mu * sum(caps)
    return JointModel(caps, dem, mu, EventAlphabet.from_rates(events, rates, total))


def _pos_arrival(caps, x: State, subset: int) -> State:
    return tuple(v + 1 if (subset >> k & 1 and v < caps[k]) else v for k, v in enumerate(x))


def step_n(model: JointModel, n: StateN, e: EventLabel) -> StateN:
    counts = n.as_dict()
    if e.kind is EventKind.DEMAND:
        x = project(n, model.n_items)
        avail = 0
        for k in subset_items(e.subset):
            if x[k] < model.caps[k]:
                avail |= 1 << k
        if not avail:
            return n
        counts[avail] = counts.get(avail, 0) + 1
        return StateN.of(counts)
    i, j = e.item, e.level
    ranked = sorted(
        (subset_rank(m, model.n_items)[1], m, c) for m, c in n.counts if lowest_item(m) == i)
    cum = 0
    for _, mask, c in ranked:
        cum += c
        if cum >= j:
            counts[mask] -= 1
            return StateN.of(counts)
    return n


def sup_step(model: JointModel, x: State, e: EventLabel) -> State:
    if e.kind is EventKind.DEMAND:
        return _pos_arrival(model.caps, x, e.subset)
    i = e.item
    x_hat = max(x[i] - sum(x[:i]), 0)
    if e.level <= x_hat:
        return x[:i] + (x[i] - 1,) + x[i + 1:]
    return x


def inf_step(model: JointModel, x: State, e: EventLabel) -> State:
    if e.kind is EventKind.DEMAND:
        return _pos_arrival(model.caps, x, e.subset)
    i, j = e.item, e.level
    out = list(x)
    if j <= x[i]:
        out[i] -= 1
    run = 0
    for p in range(i + 1, len(x)):
        run += x[p]
        if x[p] > 0 and j <= min(run, x[i]):
            out[p] -= 1
    return tuple(out)


def agg_envelope(model: JointModel, iv: Interval, e: EventLabel) -> Interval:
    """Aggregated envelope: lower end bounds the infimum chain over ``[lo, hi]``,
    upper end is the (monotone) supremum chain at ``hi``."""
    m, M = tuple(iv.lo), tuple(iv.hi)
    if e.kind is EventKind.DEMAND:
        return Interval(_pos_arrival(model.caps, m, e.subset), _pos_arrival(model.caps, M, e.subset))
    i, j = e.item, e.level
    lo = list(m)
    if j <= m[i]:
        lo[i] -= 1
    run = 0  # sum of hi over items strictly between i and p
    for p in range(i + 1, len(m)):
        if m[p] > 0 and j <= min(run + m[p], M[i]):
            lo[p] -= 1
        run += M[p]
    return Interval(tuple(lo), sup_step(model, M, e))


def preimage(x: Sequence[int], n_items: int | None = None, limit: int = 10**6) -> list[StateN]:
    """All states ``n`` over every non-empty subset with ``project(n) == x``."""
    x = tuple(x)
    n_items = len(x) if n_items is None else n_items
    masks = list(range(1, 1 << n_items))
    # last index of a subset containing each item, for pruning
    last = [max(idx for idx, m in enumerate(masks) if m >> i & 1) for i in range(n_items)]
    out: list[StateN] = []
    counts: list[tuple[int, int]] = []

    def rec(idx: int, rem: list[int]):
        if any(rem[i] > 0 and last[i] < idx for i in range(n_items)):
            return
        if idx == len(masks):
            out.append(StateN(tuple(counts)))
            if len(out) > limit:
                raise SizeError(f"preimage of {x} exceeds {limit} states")
            return
        mask = masks[idx]
        members = subset_items(mask)
        top = min(rem[i] for i in members)
        for c in range(top + 1):
            if c:
                counts.append((mask, c))
                for i in members:
                    rem[i] -= c
            rec(idx + 1, rem)
            if c:
                counts.pop()
                for i in members:
                    rem[i] += c

    rec(0, list(x))
    return [StateN.of(dict(s.counts)) for s in out]


def bound_hsr(model: JointModel) -> Bound:
    """Mean coupling time bound for the exact joint sampler when ``mu > sum_i lambda_i``."""
    slack = model.mu - sum(model.arrival_rates)
    if slack <= 0:
        return Bound(None, f"mu - sum(lambda_i) = {slack:g} is not positive")
    return Bound(model.rate * sum(model.caps) / slack)


def bound_algo4(model: JointModel, partition: tuple[Iterable[int], Iterable[int]]) -> Bound:
    """Bound on the mean stopping time of the componentwise stopping rule.

    ``partition = (low, high)`` splits the items into those whose upper
    envelope is driven to 0 and those whose lower envelope is driven to
    capacity.  Items are renumbered with ``low`` first; the bound refers to
    the renumbered model, reported in ``Bound.order``.
    """
    low, high = sorted(set(partition[0])), sorted(set(partition[1]))
    if set(low) & set(high) or set(low) | set(high) != set(range(model.n_items)):
        raise ValueError("partition must split the items into two disjoint sets")
    order = tuple(low + high)
    lam = model.arrival_rates
    caps = model.caps
    mu = model.mu
    slack = mu - sum(lam[i] for i in low)
    if low and slack <= 0:
        return Bound(None, f"mu does not exceed the arrival rate of the low items ({slack:g})", order)
    total = model.rate / slack * sum(caps[i] for i in low) if low else 0.0
    prefix = sum(caps[i] for i in low)
    for p in high:
        prefix += caps[p]
        delta = lam[p] - mu * (prefix - 1)
        if delta <= 0:
            return Bound(None, f"item {p + 1}: delta_p = {delta:g} is not positive", order)
        total += model.rate * caps[p] / delta
    return Bound(total, "", order)


def best_algo4_bound(model: JointModel, max_items: int = 16,
                     keep_order: bool = False) -> Bound:
    """Smallest applicable :func:`bound_algo4` over all two-set partitions.

    The bound holds for the sampler run on the renumbered model
    (``model.permuted(bound.order)``).  With ``keep_order`` only partitions
    whose low set is a prefix of the items are tried, so the bound applies to
    ``model`` as numbered.
    """
    n = model.n_items
    if n > max_items and not keep_order:
        raise SizeError(f"partition search limited to {max_items} items")
    best = Bound(None, "no partition satisfies the conditions")
    items = range(n)
    for size in range(n + 1):
        lows = [tuple(range(size))] if keep_order else combinations(items, size)
        for low in lows:
            high = [i for i in items if i not in low]
            b = bound_algo4(model, (low, high))
            if b.applicable and (not best.applicable or b.value < best.value):
                best = b
    return best
