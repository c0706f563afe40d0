"""ATO systems with individual, state-dependent replenishments.

Queue ``i`` holds the ``x_i`` items of type ``i`` currently in replenishment.
A demand for subset ``A`` adds one item to each queue of ``A`` (partial order
service, POS) or to all of them only if none is full (total order service,
TOS).  Services are split into events ``s_i^(j)``: queue values are sorted by
increasing service rate and event ``j`` serves every state whose rate is at
least the ``j``-th smallest one, so each state is served at exactly its rate.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError
from .events import EventAlphabet, EventKind, EventLabel, subset_mask
from .lattice import Interval, State, check_caps


class Bound(NamedTuple):
    """An analytic bound on an expected coupling or stopping time (in steps).

    ``value`` is ``None`` when the conditions of the bound do not hold.
    """

    value: float | None
    reason: str = ""
    order: tuple[int, ...] | None = None

    @property
    def applicable(self) -> bool:
        return self.value is not None


def single_server(rate: float, cap: int) -> tuple[float, ...]:
    return (0.0,) + (float(rate),) * cap


def infinite_server(rate: float, cap: int) -> tuple[float, ...]:
    return tuple(float(rate) * x for x in range(cap + 1))


_SPEC_RE = re.compile(r"^\s*(single|infinite)-server\s*\(\s*([^)]+)\)\s*$")


def service_table(spec, cap: int) -> tuple[float, ...]:
    """Expand a service specification into the table ``mu(0..cap)``.

    Accepts an explicit table, ``"single-server(mu)"`` or
    ``"infinite-server(mu)"``.
    """
    if isinstance(spec, str):
        m = _SPEC_RE.match(spec)
        if not m:
            raise ConfigError(f"unrecognized service specification {spec!r}")
        rate = float(m.group(2))
        if rate < 0:
            raise ConfigError("service rates must be non-negative")
        return single_server(rate, cap) if m.group(1) == "single" else infinite_server(rate, cap)
    table = tuple(float(v) for v in spec)
    if len(table) != cap + 1:
        raise ConfigError(f"service table needs {cap + 1} entries, got {len(table)}")
    return table


def normalize_demands(demands: Mapping, n_items: int) -> dict[int, float]:
    """Map subsets (bitmask or iterable of 0-based items) to positive rates."""
    out: dict[int, float] = {}
    for subset, rate in demands.items():
        mask = subset if isinstance(subset, (int, np.integer)) else subset_mask(subset)
        mask = int(mask)
        if mask <= 0 or mask >> n_items:
            raise ConfigError(f"demand subset {subset!r} is empty or outside the {n_items} items")
        rate = float(rate)
        if rate < 0:
            raise ConfigError(f"negative demand rate for subset {subset!r}")
        if rate > 0:
            out[mask] = out.get(mask, 0.0) + rate
    return out


def item_arrival_rates(demands: Mapping[int, float], n_items: int) -> tuple[float, ...]:
    """Total demand rate hitting each item, ``lambda_i = sum_{A containing i} lambda_A``."""
    return tuple(sum(r for a, r in demands.items() if a >> i & 1) for i in range(n_items))


@dataclass(frozen=True)
class IndividualModel:
    caps: tuple[int, ...]
    demands: dict[int, float]
    mu: tuple[tuple[float, ...], ...]
    alphabet: EventAlphabet = field(repr=False)
    order: tuple[tuple[int, ...], ...] = field(repr=False)
    thresholds: dict[tuple[int, int], float] = field(repr=False)

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
    def beta(self) -> tuple[float, ...]:
        return tuple(max(t[1:]) for t in self.mu)

    @property
    def arrival_rates(self) -> tuple[float, ...]:
        return item_arrival_rates(self.demands, self.n_items)

    @property
    def alpha(self) -> tuple[float, ...]:
        return tuple(min(t[1:]) for t in self.mu)

    @property
    def eta(self) -> tuple[float, ...]:
        # C_i = 1 leaves the max over {1..C_i-1} empty; taken as 0
        return tuple(max(t[1:-1]) if len(t) > 2 else 0.0 for t in self.mu)

    def with_rates(self, demand_scale: float = 1.0, service_scale: float = 1.0) -> "IndividualModel":
        return build_model(
            self.caps,
            {a: r * demand_scale for a, r in self.demands.items()},
            [tuple(v * service_scale for v in t) for t in self.mu],
        )


def build_model(caps: Sequence[int], demands: Mapping, service) -> IndividualModel:
    """Build the uniformized event representation of an individual-returns model.

    ``service`` is one specification for all items or a sequence with one
    specification per item (see :func:`service_table`).
    """
    caps = check_caps(caps)
    n = len(caps)
    if isinstance(service, str) or not _is_per_item(service, n):
        service = [service] * n
    mu = tuple(service_table(s, c) for s, c in zip(service, caps))
    for i, table in enumerate(mu):
        if table[0] != 0.0:
            raise ConfigError(f"service rate of item {i + 1} in state 0 must be 0")
        if any(v < 0 for v in table):
            raise ConfigError(f"negative service rate for item {i + 1}")
    dem = normalize_demands(demands, n)
    if not dem:
        raise ConfigError("at least one demand rate must be positive")

    events: list[EventLabel] = [EventLabel.demand(a) for a in dem]
    rates: list[float] = list(dem.values())
    orders = []
    thresholds = {}
    for i, table in enumerate(mu):
        order = tuple(sorted(range(caps[i] + 1), key=lambda v: table[v]))  # stable
        orders.append(order)
        for j in range(1, caps[i] + 1):
            inc = table[order[j]] - table[order[j - 1]]
            thresholds[(i, j)] = table[order[j]]
            events.append(EventLabel.service(i, j))
            rates.append(inc)
    total = sum(dem.values()) + sum(max(t[1:]) for t in mu)
    alphabet = EventAlphabet.from_rates(events, rates, total)
    return IndividualModel(caps, dem, mu, alphabet, tuple(orders), thresholds)


def _is_per_item(service, n: int) -> bool:
    try:
        items = list(service)
    except TypeError:
        return False
    if len(items) != n:
        return False
    return all(isinstance(s, str) or hasattr(s, "__len__") for s in items)


def _serve(model: IndividualModel, x: State, e: EventLabel) -> State:
    i = e.item
    if model.mu[i][x[i]] >= model.thresholds[(i, e.level)]:
        return x[:i] + (x[i] - 1,) + x[i + 1:]
    return x


def step_pos(model: IndividualModel, x: State, e: EventLabel) -> State:
    if e.kind is EventKind.DEMAND:
        caps = model.caps
        return tuple(v + 1 if (e.subset >> k & 1 and v < caps[k]) else v for k, v in enumerate(x))
    return _serve(model, x, e)


def step_tos(model: IndividualModel, x: State, e: EventLabel) -> State:
    if e.kind is EventKind.DEMAND:
        caps = model.caps
        a = e.subset
        if all(v < caps[k] for k, v in enumerate(x) if a >> k & 1):
            return tuple(v + (a >> k & 1) for k, v in enumerate(x))
        return x
    return _serve(model, x, e)


def envelope_tos(model: IndividualModel, iv: Interval, e: EventLabel) -> Interval:
    """Exact interval hull of the TOS image of ``[lo, hi]`` in O(I)."""
    m, M = tuple(iv.lo), tuple(iv.hi)
    if e.kind is not EventKind.DEMAND or e.subset & (e.subset - 1) == 0:
        return Interval(step_tos(model, m, e), step_tos(model, M, e))
    caps = model.caps
    members = [k for k in range(len(caps)) if e.subset >> k & 1]
    if any(m[k] == caps[k] for k in members):
        return Interval(m, M)
    full = [k for k in members if M[k] == caps[k]]
    if not full:
        return Interval(step_tos(model, m, e), step_tos(model, M, e))
    new_hi = step_pos(model, M, e)
    if len(full) == 1:
        k = full[0]
        m = m[:k] + (m[k] + 1,) + m[k + 1:]
    return Interval(m, new_hi)


def bound_pos_coupling(model: IndividualModel) -> Bound:
    """Upper bound on the mean POS coupling time from per-queue drift arguments."""
    lam = model.arrival_rates
    total = 0.0
    for i, c in enumerate(model.caps):
        a, h = model.alpha[i], model.eta[i]
        # for C_i >= 2, alpha <= eta so at most one case holds; for C_i = 1
        # (eta = 0) the high-arrival case takes precedence
        if lam[i] > h:
            total += c / (lam[i] - h)
        elif lam[i] < a:
            total += c / (a - lam[i])
        else:
            return Bound(None, f"item {i + 1}: alpha <= lambda <= eta "
                               f"({a:g} <= {lam[i]:g} <= {h:g})")
    return Bound(model.rate * total)


def tos_drift(model: IndividualModel, exhaustive_limit: int = 10**6) -> float:
    """``min_{x != 0} sum_i mu_i(x_i) - sum_i lambda_i``."""
    size = int(np.prod([c + 1 for c in model.caps], dtype=float))
    if size <= exhaustive_limit:
        best = min(
            sum(t[v] for t, v in zip(model.mu, x))
            for x in product(*(range(c + 1) for c in model.caps))
            if any(x)
        )
    else:
        # rates are non-negative and vanish at 0: one busy queue is optimal
        best = min(model.alpha)
    return best - sum(model.arrival_rates)


def bound_tos_coupling(model: IndividualModel) -> Bound:
    """Upper bound on the mean TOS coupling time via the POS time to empty."""
    delta = tos_drift(model)
    if delta <= 0:
        return Bound(None, f"drift {delta:g} is not positive")
    return Bound(model.rate * sum(model.caps) / delta)
