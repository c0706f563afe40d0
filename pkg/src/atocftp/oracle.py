"""Brute-force ground truth for small instances.

Transition matrices are built two independent ways: by pushing every state
through every event of the alphabet, and from the continuous-time rates via
``P = I + Q / Lambda``.  Stationary distributions are solved by power
iteration with a direct-solve fallback.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve
from scipy.stats import chisquare

from .errors import ModelError, SizeError
from .events import subset_items
from .individual import IndividualModel, step_pos, step_tos
from .joint import EMPTY, JointModel, StateN, project, step_n
from .lattice import all_states, format_state

STATE_LIMIT = 10**6


@dataclass(frozen=True)
class DenseChain:
    """Enumerated states and a row-stochastic transition matrix (stored sparse)."""

    states: list
    P: sp.csr_matrix

    def __post_init__(self):
        object.__setattr__(self, "_index", {s: k for k, s in enumerate(self.states)})

    def index(self, state) -> int:
        return self._index[state]

    def __len__(self) -> int:
        return len(self.states)

    def dense(self) -> np.ndarray:
        return self.P.toarray()


def enumerate_x(caps: Sequence[int], limit: int = STATE_LIMIT) -> list[tuple[int, ...]]:
    size = int(np.prod([c + 1 for c in caps], dtype=float))
    if size > limit:
        raise SizeError(f"{size} states exceed the enumeration limit {limit}")
    return list(all_states(caps))


def _demand_target(caps, n: StateN, subset: int) -> StateN:
    x = project(n, len(caps))
    avail = sum(1 << k for k in subset_items(subset) if x[k] < caps[k])
    if not avail:
        return n
    counts = n.as_dict()
    counts[avail] = counts.get(avail, 0) + 1
    return StateN.of(counts)


def _return_target(n: StateN, mask: int) -> StateN:
    counts = n.as_dict()
    counts[mask] -= 1
    return StateN.of(counts)


def enumerate_n(model: JointModel, limit: int = STATE_LIMIT) -> list[StateN]:
    """States of the joint model reachable from the empty state.

    This is the closed communicating class containing the empty state, which
    carries all the stationary mass.
    """
    seen = {EMPTY}
    order = [EMPTY]
    queue = deque(order)
    while queue:
        n = queue.popleft()
        succ = [_demand_target(model.caps, n, a) for a in model.demands]
        succ += [_return_target(n, m) for m, _ in n.counts]
        for s in succ:
            if s not in seen:
                seen.add(s)
                order.append(s)
                queue.append(s)
                if len(order) > limit:
                    raise SizeError(f"more than {limit} joint states")
    return sorted(order, key=lambda s: (sum(c for _, c in s.counts), s.counts))


def chain_from_events(states: list, alphabet, step: Callable) -> DenseChain:
    """``P(x, y) = sum of nu(a) over events a with step(x, a) = y``."""
    index = {s: k for k, s in enumerate(states)}
    rows, cols, vals = [], [], []
    for k, x in enumerate(states):
        for e, p in zip(alphabet.events, alphabet.probs):
            y = step(x, e)
            if y not in index:
                raise ModelError(f"event {e} leads from {x} outside the enumerated states")
            rows.append(k)
            cols.append(index[y])
            vals.append(p)
    n = len(states)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    P.sum_duplicates()
    return DenseChain(states, P)


def _from_generator(states, rates_out: Callable, total_rate: float) -> DenseChain:
    index = {s: k for k, s in enumerate(states)}
    rows, cols, vals = [], [], []
    for k, x in enumerate(states):
        out = 0.0
        for y, r in rates_out(x):
            if r <= 0 or y == x:
                continue
            rows.append(k)
            cols.append(index[y])
            vals.append(r / total_rate)
            out += r
        rows.append(k)
        cols.append(k)
        vals.append(1.0 - out / total_rate)
    n = len(states)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    P.sum_duplicates()
    return DenseChain(states, P)


def individual_chain(model: IndividualModel, policy: str = "pos",
                     from_rates: bool = False) -> DenseChain:
    """Chain of an individual-returns model under ``pos`` or ``tos``."""
    if policy not in ("pos", "tos"):
        raise ValueError("policy must be 'pos' or 'tos'")
    states = enumerate_x(model.caps)
    if not from_rates:
        step = step_pos if policy == "pos" else step_tos
        return chain_from_events(states, model.alphabet, lambda x, e: step(model, x, e))
    caps = model.caps

    def rates_out(x):
        for a, lam in model.demands.items():
            members = subset_items(a)
            if policy == "tos" and any(x[k] >= caps[k] for k in members):
                continue
            y = list(x)
            for k in members:
                y[k] = min(y[k] + 1, caps[k])
            yield tuple(y), lam
        for i, v in enumerate(x):
            if v > 0:
                yield x[:i] + (v - 1,) + x[i + 1:], model.mu[i][v]

    return _from_generator(states, rates_out, model.rate)


def joint_chain(model: JointModel, from_rates: bool = False) -> DenseChain:
    states = enumerate_n(model)
    if not from_rates:
        return chain_from_events(states, model.alphabet, lambda n, e: step_n(model, n, e))

    def rates_out(n):
        for a, lam in model.demands.items():
            yield _demand_target(model.caps, n, a), lam
        for mask, c in n.counts:
            yield _return_target(n, mask), model.mu * c

    return _from_generator(states, rates_out, model.rate)


def stationary(chain: DenseChain, tol: float = 1e-12, max_iter: int = 10**6) -> np.ndarray:
    """Stationary distribution of an irreducible chain."""
    n = len(chain)
    ncomp, labels = connected_components(chain.P, directed=True, connection="strong")
    if ncomp > 1:
        cut = [chain.states[k] for k in np.flatnonzero(labels != labels[0])[:5]]
        raise ModelError(f"chain is reducible ({ncomp} classes); e.g. states {cut} "
                         f"are not mutually reachable with {chain.states[0]}")
    PT = chain.P.T.tocsr()
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = PT @ pi
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) <= tol:
            return nxt
        pi = nxt
    return _direct_solve(chain)


def _direct_solve(chain: DenseChain) -> np.ndarray:
    n = len(chain)
    A = (chain.P.T - sp.identity(n)).tolil()
    A[0, :] = np.ones(n)
    b = np.zeros(n)
    b[0] = 1.0
    pi = spsolve(A.tocsr(), b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def residual(chain: DenseChain, pi: np.ndarray) -> float:
    """``max |pi P - pi|``."""
    return float(np.max(np.abs(chain.P.T @ pi - pi)))


def empirical(samples, chain: DenseChain) -> np.ndarray:
    """Histogram of ``samples`` over the chain's states."""
    counts = np.zeros(len(chain))
    for s in samples:
        counts[chain.index(s)] += 1
    return counts


def tv_distance(counts, pi) -> float:
    counts = np.asarray(counts, float)
    pi = np.asarray(pi, float)
    if counts.shape != pi.shape:
        raise ValueError("histogram and distribution have different supports")
    return 0.5 * float(np.abs(counts / counts.sum() - pi).sum())


def chi_square(counts, pi, min_expected: float = 5.0) -> float:
    """Goodness-of-fit p-value; cells with small expected counts are pooled."""
    counts = np.asarray(counts, float)
    pi = np.asarray(pi, float)
    expected = counts.sum() * pi
    if counts[expected == 0].sum() > 0:
        return 0.0
    small = expected < min_expected
    obs = list(counts[~small])
    exp = list(expected[~small])
    pool_obs, pool_exp = counts[small].sum(), expected[small].sum()
    if pool_exp >= min_expected or (pool_exp > 0 and not exp):
        obs.append(pool_obs)
        exp.append(pool_exp)
    elif pool_exp > 0:
        # still too small on its own: merge into the smallest regular cell
        k = int(np.argmin(exp))
        obs[k] += pool_obs
        exp[k] += pool_exp
    if len(obs) < 2:
        return 1.0
    return float(chisquare(obs, exp).pvalue)


class CostVerdict(NamedTuple):
    passed: bool
    oracle_mean: float
    lower: float
    upper: float


def check_cost_bounds(estimate, pi, states, cost: Callable = sum,
                      width: float = 3.0) -> CostVerdict:
    """Check ``E_pi[c]`` against ``[lower - 3 SE, upper + 3 SE]`` of a truncated estimate."""
    target = float(sum(p * cost(s) for p, s in zip(pi, states)))
    lo = estimate.lower_mean - width * estimate.lower_se
    hi = estimate.upper_mean + width * estimate.upper_se
    tol = 1e-9 * max(1.0, abs(target))
    return CostVerdict(lo - tol <= target <= hi + tol, target, lo, hi)


def _format(state) -> str:
    return str(state) if isinstance(state, StateN) else format_state(state)


def write_pi_csv(states, pi, fh: io.TextIOBase | None = None) -> str:
    """Write ``state,probability`` rows; returns the text when ``fh`` is None."""
    out = io.StringIO() if fh is None else fh
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["state", "probability"])
    for s, p in zip(states, pi):
        w.writerow([_format(s), repr(float(p))])
    return out.getvalue() if fh is None else ""


def oracle_for(model, policy: str = "pos") -> tuple[DenseChain, np.ndarray]:
    """Event-built chain and its stationary distribution."""
    chain = joint_chain(model) if isinstance(model, JointModel) else individual_chain(model, policy)
    return chain, stationary(chain)
