import itertools

import numpy as np
import pytest

from atocftp.errors import ConfigError
from atocftp.events import EventKind, EventLabel
from atocftp.individual import (
    bound_pos_coupling, bound_tos_coupling, build_model, envelope_tos, service_table, step_pos,
    step_tos, tos_drift,
)
from atocftp.lattice import Interval, all_intervals, all_states, hull, interval_states, leq

from conftest import pos_instance

D12 = EventLabel.demand(0b11)


def test_infinite_server_alphabet():
    m = build_model((4,), {(0,): 1.0}, "infinite-server(2)")
    services = [e for e in m.alphabet.events if e.kind is EventKind.SERVICE]
    assert services == [EventLabel.service(0, j) for j in range(1, 5)]
    assert m.rate == 1.0 + 8.0
    for e in services:
        assert m.alphabet.probs[m.alphabet.index(e)] == pytest.approx(2 / 9)


def test_single_server_keeps_one_service_event():
    m = build_model((4,), {(0,): 1.0}, "single-server(2)")
    services = [e for e in m.alphabet.events if e.kind is EventKind.SERVICE]
    assert services == [EventLabel.service(0, 1)]
    assert m.alphabet.probs[m.alphabet.index(services[0])] == pytest.approx(2 / 3)


def test_probabilities_telescope():
    m = build_model((3, 2), {(0,): 0.4, (0, 1): 0.7}, [(0, 2, 1, 3), (0, 5, 5)])
    assert m.alphabet.probs.sum() == pytest.approx(1, abs=1e-12)
    assert m.rate == pytest.approx(1.1 + 3 + 5)


def test_invalid_service_tables():
    with pytest.raises(ConfigError):
        build_model((2,), {(0,): 1}, [(1, 1, 1)])
    with pytest.raises(ConfigError):
        build_model((2,), {(0,): 0.0}, "single-server(1)")
    with pytest.raises(ConfigError):
        service_table("erlang(3)", 2)
    with pytest.raises(ConfigError):
        service_table((0, 1), 2)


def test_worked_service_transition():
    m = build_model((4, 4), {(0, 1): 1.0}, "infinite-server(1)")
    s13 = EventLabel.service(0, 3)
    assert step_pos(m, (3, 1), s13) == (2, 1)
    assert step_pos(m, (2, 1), s13) == (2, 1)


def test_pos_and_tos_demands():
    m = build_model((2, 2), {(0, 1): 1.0}, "single-server(1)")
    assert step_pos(m, (2, 1), D12) == (2, 2)
    assert step_pos(m, (0, 0), EventLabel.service(0, 1)) == (0, 0)
    assert step_tos(m, (2, 1), D12) == (2, 1)
    assert step_tos(m, (1, 1), D12) == (2, 2)


def test_tos_non_monotone_witness():
    m = build_model((3, 3), {(0, 1): 1.0}, "single-server(1)")
    x, y = (2, 2), (2, 3)
    assert leq(x, y)
    assert step_tos(m, x, D12) == (3, 3)
    assert step_tos(m, y, D12) == (2, 3)
    assert not leq(step_tos(m, x, D12), step_tos(m, y, D12))


@pytest.mark.parametrize("lo,hi,expected", [
    ((1, 0), (2, 1), ((2, 0), (2, 2))),
    ((1, 0), (2, 2), ((1, 0), (2, 2))),
    ((2, 0), (2, 2), ((2, 0), (2, 2))),
])
def test_envelope_examples(lo, hi, expected):
    m = build_model((2, 2), {(0, 1): 1.0}, "single-server(1)")
    assert envelope_tos(m, Interval(lo, hi), D12) == Interval(*expected)


def _models(caps):
    n = len(caps)
    subsets = [s for r in range(1, n + 1) for s in itertools.combinations(range(n), r)]
    return [
        build_model(caps, {s: 0.1 * (k + 1) for k, s in enumerate(subsets)}, "single-server(1)"),
        build_model(caps, {s: 0.2 for s in subsets}, "infinite-server(0.7)"),
    ]


CAPS = [(1, 1), (2, 2), (2, 1, 2), (2, 2, 2), (3, 3)]


@pytest.mark.parametrize("caps", CAPS)
def test_pos_monotone_and_dominates_tos(caps):
    for m in _models(caps):
        states = list(all_states(caps))
        for e in m.alphabet.events:
            for x in states:
                for y in states:
                    if leq(x, y):
                        assert leq(step_pos(m, x, e), step_pos(m, y, e))
                        assert leq(step_tos(m, x, e), step_pos(m, y, e))


@pytest.mark.parametrize("caps", [(1, 1), (2, 2), (2, 2, 2), (1, 2, 2)])
def test_envelope_is_exact_hull(caps):
    for m in _models(caps):
        for e in m.alphabet.events:
            for iv in all_intervals(caps):
                brute = hull(step_tos(m, x, e) for x in interval_states(iv))
                assert envelope_tos(m, iv, e) == brute


def test_rates_realized_exactly():
    # each state leaves queue i at total probability mu_i(x_i) / Lambda
    m = build_model((4, 3), {(0,): 0.5, (0, 1): 0.25}, [(0, 3, 1, 2, 2.5), "infinite-server(1)"])
    for x in all_states(m.caps):
        for i in range(2):
            p = sum(pr for e, pr in zip(m.alphabet.events, m.alphabet.probs)
                    if e.kind is EventKind.SERVICE and e.item == i and step_pos(m, x, e) != x)
            assert p == pytest.approx(m.mu[i][x[i]] / m.rate)


def test_pos_bound_examples():
    m = build_model((3,), {(0,): 1.0}, "single-server(2)")
    assert m.rate == 3
    assert bound_pos_coupling(m).value == pytest.approx(9)
    eq = build_model((3,), {(0,): 1.0}, "single-server(1)")
    assert not bound_pos_coupling(eq).applicable
    inf = build_model((2, 2), {(0,): 1.0, (1,): 1.0}, "infinite-server(2)")
    assert inf.rate == 10
    assert bound_pos_coupling(inf).value == pytest.approx(40)


def test_pos_bound_high_arrival_case():
    m = build_model((2,), {(0,): 3.0}, "single-server(1)")
    # lambda > eta = 1: Lambda * C / (lambda - eta) = 4 * 2 / 2
    assert bound_pos_coupling(m).value == pytest.approx(4)


def test_pos_bound_unit_capacity_prefers_high_case():
    m = build_model((1,), {(0,): 0.5}, "single-server(2)")
    assert m.eta == (0.0,)
    assert bound_pos_coupling(m).value == pytest.approx(m.rate * 1 / 0.5)


def test_tos_bound_examples():
    m = build_model((3,), {(0,): 1.0}, "single-server(2)")
    assert tos_drift(m) == pytest.approx(1)
    assert bound_tos_coupling(m).value == pytest.approx(9)
    two = build_model((2, 3), {(0,): 1.0, (1,): 1.0}, "single-server(3)")
    assert two.rate == 8
    assert tos_drift(two) == pytest.approx(1)
    assert bound_tos_coupling(two).value == pytest.approx(8 * 5)
    assert not bound_tos_coupling(build_model((2,), {(0,): 2.0}, "single-server(2)")).applicable


def test_tos_drift_large_space_shortcut():
    m = build_model((3, 3), {(0,): 0.2, (1,): 0.3}, [(0, 2, 1, 4), (0, 3, 3, 3)])
    assert tos_drift(m) == pytest.approx(tos_drift(m, exhaustive_limit=0))


def test_with_rates_scales():
    m = pos_instance()
    s = m.with_rates(demand_scale=2.0, service_scale=0.5)
    assert s.demand_rate == pytest.approx(1.8)
    assert s.beta == (0.5, 0.5)
    assert np.isclose(s.alphabet.probs.sum(), 1)
