"""Coupling-from-the-past samplers.

Every sampler starts with horizon 1 and doubles it until its stopping rule
holds for the window ``a_{-T+1}, ..., a_0``.  Each stopping rule is monotone in
the horizon (a longer window only shrinks the bounding set at every later
time), so with ``exact_stop`` the exact backward stopping time is located by
bisection inside the last doubling step.  ``event_draws`` counts events read
during doubling only.

Two implementations are provided: generic reference drivers taking Python
transition callables (``psa_monotone``, ``epsa``, ...) and compiled batch
drivers for the built-in models (:func:`sample_batch`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from . import _kernels as K
from .errors import ModelError, SizeError
from .events import EventKind, EventLabel, EventStream, stream_key
from .individual import IndividualModel, step_pos, step_tos, envelope_tos
from .joint import (
    EMPTY, JointModel, StateN, agg_envelope, preimage, project, step_n, sup_step,
)
from .lattice import Interval, State, all_states, bottom, is_singleton, leq, top

DEFAULT_MAX_HORIZON = 2**24


class Outcome(enum.Enum):
    EXACT_STATE = "exact-state"
    EXACT_STATE_N = "exact-state-n"
    INTERVAL = "interval"
    SUBSET_SIZE = "subset-size"


@dataclass(frozen=True)
class SamplerReport:
    kind: Outcome
    value: object
    horizon: int
    stop_time: int
    event_draws: int
    seed: int
    coalesced: bool = True
    subset: frozenset | None = None

    @property
    def interval(self) -> Interval:
        """Bounding interval of the outcome (degenerate for exact states)."""
        if self.kind is Outcome.INTERVAL:
            return self.value
        if self.kind is Outcome.EXACT_STATE:
            return Interval(self.value, self.value)
        raise TypeError(f"{self.kind.value} outcome has no interval")


class _Result(NamedTuple):
    payload: object
    horizon: int
    stop_time: int
    draws: int
    coalesced: bool


def _doubling(run: Callable[[int], tuple[bool, object]], max_horizon: int,
              exact_stop: bool) -> _Result:
    T, draws = 1, 0
    while True:
        ok, payload = run(T)
        draws += T
        if ok:
            break
        if 2 * T > max_horizon:
            return _Result(payload, T, T, draws, False)
        T *= 2
    stop = T
    if exact_stop and T > 1:
        a, b = T // 2, T
        while b - a > 1:
            mid = (a + b) // 2
            if run(mid)[0]:
                b = mid
            else:
                a = mid
        stop = b
    return _Result(payload, T, stop, draws, True)


def _report(res: _Result, seed: int, exact_kind: Outcome | None) -> SamplerReport:
    iv = res.payload
    if res.coalesced and exact_kind is Outcome.EXACT_STATE:
        return SamplerReport(Outcome.EXACT_STATE, iv.lo, res.horizon, res.stop_time, res.draws, seed)
    return SamplerReport(Outcome.INTERVAL, iv, res.horizon, res.stop_time, res.draws, seed,
                         coalesced=res.coalesced)


def psa_monotone(step: Callable[[State, EventLabel], State], caps: Sequence[int],
                 stream: EventStream, max_horizon: int = DEFAULT_MAX_HORIZON,
                 check_order: bool = False, exact_stop: bool = True) -> SamplerReport:
    """Monotone CFTP: bottom and top trajectories until they meet at time 0."""
    lo0, hi0 = bottom(caps), top(caps)

    def run(T):
        lo, hi = lo0, hi0
        for e in stream.window(T):
            lo, hi = step(lo, e), step(hi, e)
            if check_order and not leq(lo, hi):
                raise ModelError(f"monotonicity violated at event {e}: {lo} > {hi}")
        return lo == hi, Interval(lo, hi)

    return _report(_doubling(run, max_horizon, exact_stop), stream.seed, Outcome.EXACT_STATE)


def epsa(envelope: Callable[[Interval, EventLabel], Interval], caps: Sequence[int],
         stream: EventStream, max_horizon: int = DEFAULT_MAX_HORIZON,
         exact_stop: bool = True) -> SamplerReport:
    """Envelope CFTP: iterate the envelope from ``[bottom, top]`` until it is a singleton."""
    start = Interval(bottom(caps), top(caps))

    def run(T):
        iv = start
        for e in stream.window(T):
            iv = envelope(iv, e)
        return is_singleton(iv), iv

    return _report(_doubling(run, max_horizon, exact_stop), stream.seed, Outcome.EXACT_STATE)


def aepsa(model: JointModel, stream: EventStream, max_horizon: int = DEFAULT_MAX_HORIZON,
          exact_stop: bool = True) -> SamplerReport:
    """Aggregated envelope CFTP; stops once the envelope was a singleton at some step.

    The returned interval at time 0 contains the projection of a stationary
    state but is not itself an exact sample.
    """
    start = Interval(bottom(model.caps), top(model.caps))

    def run(T):
        iv, hit = start, False
        for e in stream.window(T):
            iv = agg_envelope(model, iv, e)
            hit = hit or is_singleton(iv)
        return hit, iv

    res = _doubling(run, max_horizon, exact_stop)
    return _report(res, stream.seed, None)


def aepsa_componentwise(model: JointModel, stream: EventStream,
                        max_horizon: int = DEFAULT_MAX_HORIZON,
                        exact_stop: bool = True) -> SamplerReport:
    """Aggregated envelope with the relaxed rule: every component met at least once.

    Flags persist across doublings; since a longer window gives a nested
    envelope at every common time, this coincides with recomputing them.
    """
    start = Interval(bottom(model.caps), top(model.caps))
    flags = [False] * model.n_items

    def window(T, met):
        iv = start
        for e in stream.window(T):
            iv = agg_envelope(model, iv, e)
            for k in range(model.n_items):
                if iv.lo[k] == iv.hi[k]:
                    met[k] = True
        return all(met), iv

    state = {"doubling": True}

    def run(T):
        if state["doubling"]:
            ok, iv = window(T, flags)
            if ok:
                state["doubling"] = False
            return ok, iv
        return window(T, [False] * model.n_items)

    return _report(_doubling(run, max_horizon, exact_stop), stream.seed, None)


def exact_joint_sample(model: JointModel, stream: EventStream,
                       max_horizon: int = DEFAULT_MAX_HORIZON,
                       exact_stop: bool = True) -> SamplerReport:
    """Exact stationary sample on the joint-returns state space.

    The supremum chain from the top bounds the projection of every trajectory;
    once it is zero, the only possible state is the empty one, from which the
    single remaining trajectory is simulated up to time 0.
    """
    caps = model.caps

    def run(T):
        x = top(caps)
        t_hit = -1
        for t, e in zip(range(T - 1, -1, -1), stream.window(T)):
            x = sup_step(model, x, e)
            if not any(x):
                t_hit = t
        return t_hit >= 0, (x, t_hit)

    res = _doubling(run, max_horizon, exact_stop)
    x, t_hit = res.payload
    if not res.coalesced:
        return SamplerReport(Outcome.INTERVAL, Interval(bottom(caps), x), res.horizon,
                             res.stop_time, res.draws, stream.seed, coalesced=False)
    n = forward_from_empty(model, stream, t_hit)
    return SamplerReport(Outcome.EXACT_STATE_N, n, res.horizon, res.stop_time, res.draws,
                         stream.seed)


def forward_from_empty(model: JointModel, stream: EventStream, t_hit: int) -> StateN:
    """Run the exact chain from the empty state through events ``t_hit-1 .. 0``."""
    n = EMPTY
    if t_hit > 0:
        ev = stream.alphabet.events
        for idx in stream.indices(0, t_hit)[::-1]:
            n = step_n(model, n, ev[idx])
    return n


def aggregated_image(model: JointModel, x: State, e: EventLabel,
                     cache: dict | None = None) -> frozenset:
    """Projected images of every state with projection ``x``."""
    key = (x, e)
    if cache is not None and key in cache:
        return cache[key]
    if cache is not None and ("pre", x) in cache:
        pre = cache[("pre", x)]
    else:
        pre = preimage(x)
        if cache is not None:
            cache[("pre", x)] = pre
    img = frozenset(project(step_n(model, n, e), model.n_items) for n in pre)
    if cache is not None:
        cache[key] = img
    return img


def aggregate_subset_cftp(model: JointModel, stream: EventStream,
                          max_horizon: int = DEFAULT_MAX_HORIZON, size_limit: int = 10**5,
                          cache: dict | None = None) -> SamplerReport:
    """Reference bounding chain on explicit subsets of the projected space."""
    states = frozenset(all_states(model.caps))
    if len(states) > size_limit:
        raise SizeError(f"{len(states)} projected states exceed the limit {size_limit}")
    cache = {} if cache is None else cache

    def run(T):
        U, hit = states, False
        for e in stream.window(T):
            U = frozenset().union(*(aggregated_image(model, x, e, cache) for x in U))
            hit = hit or len(U) == 1
        return hit, U

    res = _doubling(run, max_horizon, exact_stop=False)
    return SamplerReport(Outcome.SUBSET_SIZE, len(res.payload), res.horizon, res.stop_time,
                         res.draws, stream.seed, coalesced=res.coalesced, subset=res.payload)


def subset_path(model: JointModel, stream: EventStream, horizon: int,
                cache: dict | None = None) -> list[frozenset]:
    """Subsets ``U`` after each event of the window (index 0 is the start)."""
    cache = {} if cache is None else cache
    U = frozenset(all_states(model.caps))
    path = [U]
    for e in stream.window(horizon):
        U = frozenset().union(*(aggregated_image(model, x, e, cache) for x in U))
        path.append(U)
    return path


def envelope_path(envelope: Callable[[Interval, EventLabel], Interval], caps: Sequence[int],
                  events: Iterable[EventLabel], start: Interval | None = None) -> list[Interval]:
    """Intervals after each event (index 0 is the start, ``[bottom, top]`` by default)."""
    iv = Interval(bottom(caps), top(caps)) if start is None else start
    path = [iv]
    for e in events:
        iv = envelope(iv, e)
        path.append(iv)
    return path


class IntervalEstimate(NamedTuple):
    lower_mean: float
    upper_mean: float
    lower_se: float
    upper_se: float
    lower_half_width: float
    upper_half_width: float
    n: int


def _estimate(lo_costs: np.ndarray, hi_costs: np.ndarray, z: float) -> IntervalEstimate:
    n = len(lo_costs)
    lse = float(np.std(lo_costs, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    hse = float(np.std(hi_costs, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return IntervalEstimate(float(np.mean(lo_costs)), float(np.mean(hi_costs)), lse, hse,
                            z * lse, z * hse, n)


def truncated_interval_estimate(envelope: Callable[[Interval, EventLabel], Interval],
                                caps: Sequence[int], streams: Iterable[EventStream],
                                horizon: int, cost: Callable[[State], float] = sum,
                                z: float = 1.96) -> IntervalEstimate:
    """Bounds on a stationary mean cost from envelopes stopped at a fixed horizon.

    ``cost`` must be non-decreasing for the product order.
    """
    lo_c, hi_c = [], []
    for stream in streams:
        iv = envelope_path(envelope, caps, stream.window(horizon))[-1]
        lo_c.append(cost(iv.lo))
        hi_c.append(cost(iv.hi))
    return _estimate(np.asarray(lo_c, float), np.asarray(hi_c, float), z)


# -- compiled batch path ----------------------------------------------------

METHODS = {
    "psa": K.PSA,
    "epsa": K.EPSA,
    "aepsa": K.AEPSA,
    "alg4": K.ALG4,
    "exact": K.SUP,
}


@dataclass(frozen=True)
class Encoded:
    caps: np.ndarray
    mu: np.ndarray
    kind: np.ndarray
    arg: np.ndarray
    level: np.ndarray
    thr: np.ndarray
    alias_thr: np.ndarray
    alias_idx: np.ndarray

    def arrays(self):
        return (self.caps, self.mu, self.kind, self.arg, self.level, self.thr,
                self.alias_thr, self.alias_idx)


def encode(model: IndividualModel | JointModel) -> Encoded:
    from .events import build_alias_sampler

    events = model.alphabet.events
    caps = np.asarray(model.caps, dtype=np.int64)
    width = int(caps.max()) + 1
    mu = np.zeros((len(caps), width))
    if isinstance(model, IndividualModel):
        for i, t in enumerate(model.mu):
            mu[i, :len(t)] = t
    kind = np.array([int(e.kind) for e in events], dtype=np.int64)
    arg = np.array([e.subset if e.kind is EventKind.DEMAND else e.item for e in events],
                   dtype=np.int64)
    level = np.array([e.level for e in events], dtype=np.int64)
    thr = np.array([model.thresholds[(e.item, e.level)] if e.kind is EventKind.SERVICE else 0.0
                    for e in events])
    alias = build_alias_sampler(model.alphabet)
    return Encoded(caps, mu, kind, arg, level, thr, alias.threshold.astype(np.float64),
                   alias.alias.astype(np.int64))


def _check_method(model, method: str) -> int:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {sorted(METHODS)}")
    joint = isinstance(model, JointModel)
    if joint != (method in ("aepsa", "alg4", "exact")):
        raise ModelError(f"method {method!r} does not apply to {type(model).__name__}")
    return METHODS[method]


class BatchResult(NamedTuple):
    seeds: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    coalesced: np.ndarray
    horizon: np.ndarray
    stop_time: np.ndarray
    event_draws: np.ndarray
    t_hit: np.ndarray


def sample_batch(model: IndividualModel | JointModel, method: str, seeds: Sequence[int],
                 max_horizon: int = DEFAULT_MAX_HORIZON, exact_stop: bool = True) -> BatchResult:
    """Run one compiled sampler per seed.

    ``method`` is ``psa`` (POS individual), ``epsa`` (TOS individual),
    ``aepsa``, ``alg4`` or ``exact`` (joint returns).  For ``exact`` the
    joint state itself comes from :func:`batch_reports`.
    """
    mode = _check_method(model, method)
    enc = encode(model)
    seeds = np.asarray([int(s) & ((1 << 64) - 1) for s in seeds], dtype=np.uint64)
    keys = np.asarray([stream_key(int(s)) for s in seeds], dtype=np.uint64)
    out = K.cftp_batch(mode, keys, int(max_horizon), bool(exact_stop), *enc.arrays())
    return BatchResult(seeds, *out)


def batch_reports(model: IndividualModel | JointModel, method: str, seeds: Sequence[int],
                  max_horizon: int = DEFAULT_MAX_HORIZON,
                  exact_stop: bool = True) -> list[SamplerReport]:
    """:func:`sample_batch` wrapped into one :class:`SamplerReport` per seed."""
    res = sample_batch(model, method, seeds, max_horizon, exact_stop)
    reports = []
    for r in range(len(res.seeds)):
        seed = int(res.seeds[r])
        lo, hi = tuple(int(v) for v in res.lo[r]), tuple(int(v) for v in res.hi[r])
        common = dict(horizon=int(res.horizon[r]), stop_time=int(res.stop_time[r]),
                      event_draws=int(res.event_draws[r]), seed=seed)
        ok = bool(res.coalesced[r])
        if method == "exact" and ok:
            stream = EventStream(seed, model.alphabet)
            n = forward_from_empty(model, stream, int(res.t_hit[r]))
            reports.append(SamplerReport(Outcome.EXACT_STATE_N, n, **common))
        elif method in ("psa", "epsa") and ok:
            reports.append(SamplerReport(Outcome.EXACT_STATE, lo, **common))
        else:
            reports.append(SamplerReport(Outcome.INTERVAL, Interval(lo, hi), coalesced=ok, **common))
    return reports


def window_intervals(model: IndividualModel | JointModel, method: str, seeds: Sequence[int],
                     horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Envelope at time 0 after a fixed window of ``horizon`` events, per seed."""
    mode = _check_method(model, method)
    if mode == K.SUP:
        raise ValueError("fixed windows are defined for envelope methods only")
    enc = encode(model)
    keys = np.asarray([stream_key(int(s)) for s in seeds], dtype=np.uint64)
    return K.window_batch(mode, keys, int(horizon), *enc.arrays())


def truncated_interval_batch(model: IndividualModel | JointModel, method: str,
                             seeds: Sequence[int], horizon: int,
                             cost: Callable[[np.ndarray], np.ndarray] | None = None,
                             z: float = 1.96) -> IntervalEstimate:
    """Compiled :func:`truncated_interval_estimate`; ``cost`` acts on rows (default: row sum)."""
    lo, hi = window_intervals(model, method, seeds, horizon)
    if cost is None:
        lo_c, hi_c = lo.sum(axis=1), hi.sum(axis=1)
    else:
        lo_c, hi_c = np.asarray(cost(lo), float), np.asarray(cost(hi), float)
    return _estimate(lo_c.astype(float), hi_c.astype(float), z)


def model_step(model: IndividualModel | JointModel, method: str):
    """Reference transition (point or interval) matching a compiled ``method``."""
    if method == "psa":
        return lambda x, e: step_pos(model, x, e)
    if method == "epsa":
        return lambda iv, e: envelope_tos(model, iv, e)
    if method in ("aepsa", "alg4"):
        return lambda iv, e: agg_envelope(model, iv, e)
    if method == "exact":
        return lambda x, e: sup_step(model, x, e)
    raise ValueError(method)


def tos_grand_coupling(model: IndividualModel, stream: EventStream, horizon: int) -> set[State]:
    """Final states of the TOS chain started from every state ``horizon`` steps back."""
    events = stream.window(horizon)
    finals = set()
    for x in all_states(model.caps):
        for e in events:
            x = step_tos(model, x, e)
        finals.add(x)
    return finals
