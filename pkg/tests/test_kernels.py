"""Compiled samplers against the pure-Python reference drivers."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atocftp import _kernels as K
from atocftp.cftp import (
    aepsa, aepsa_componentwise, batch_reports, encode, envelope_path, epsa, exact_joint_sample,
    model_step, psa_monotone, window_intervals,
)
from atocftp.events import EventStream, stream_key
from atocftp.individual import build_model
from atocftp.joint import build_joint_model


def subsets(n):
    return [s for r in range(1, n + 1) for s in itertools.combinations(range(n), r)]


@st.composite
def individual_models(draw):
    n = draw(st.integers(1, 3))
    caps = tuple(draw(st.integers(1, 4)) for _ in range(n))
    rates = {s: draw(st.sampled_from([0.0, 0.1, 0.5, 2.0])) for s in subsets(n)}
    if not any(rates.values()):
        rates[(0,)] = 1.0
    service = []
    for c in caps:
        table = [0.0] + [draw(st.sampled_from([0.0, 0.3, 1.0, 2.5])) for _ in range(c)]
        service.append(tuple(table))
    return build_model(caps, rates, service)


@st.composite
def joint_models(draw):
    n = draw(st.integers(1, 3))
    caps = tuple(draw(st.integers(1, 3)) for _ in range(n))
    rates = {s: draw(st.sampled_from([0.0, 0.1, 0.4])) for s in subsets(n)}
    if not any(rates.values()):
        rates[tuple(range(n))] = 0.3
    return build_joint_model(caps, rates, draw(st.sampled_from([0.5, 1.0, 2.0])))


HORIZON = 2**12


def reference(model, method, seed):
    s = EventStream(seed, model.alphabet)
    if method == "psa":
        return psa_monotone(model_step(model, "psa"), model.caps, s, HORIZON)
    if method == "epsa":
        return epsa(model_step(model, "epsa"), model.caps, s, HORIZON)
    if method == "aepsa":
        return aepsa(model, s, HORIZON)
    if method == "alg4":
        return aepsa_componentwise(model, s, HORIZON)
    return exact_joint_sample(model, s, HORIZON)


@settings(max_examples=25)
@given(individual_models(), st.sampled_from(["psa", "epsa"]))
def test_individual_kernels_match_reference(model, method):
    seeds = list(range(20))
    for seed, fast in zip(seeds, batch_reports(model, method, seeds, HORIZON)):
        assert fast == reference(model, method, seed)


@settings(max_examples=25)
@given(joint_models(), st.sampled_from(["aepsa", "alg4", "exact"]))
def test_joint_kernels_match_reference(model, method):
    seeds = list(range(20))
    for seed, fast in zip(seeds, batch_reports(model, method, seeds, HORIZON)):
        assert fast == reference(model, method, seed)


@given(individual_models(), st.integers(0, 2**64 - 1))
def test_compiled_draws_match_stream(model, seed):
    enc = encode(model)
    got = K.draw_batch(np.uint64(stream_key(seed)), 0, 500, enc.alias_thr, enc.alias_idx)
    assert list(got) == list(EventStream(seed, model.alphabet).indices(0, 500))


@pytest.mark.parametrize("method", ["epsa", "aepsa"])
def test_fixed_windows_match_envelope_path(method):
    if method == "epsa":
        model = build_model((3, 2), {(0, 1): 0.5, (0,): 0.2}, "infinite-server(0.4)")
    else:
        model = build_joint_model((2, 3), {(0, 1): 0.5, (1,): 0.2}, 0.6)
    step = model_step(model, method)
    for horizon in (0, 1, 7, 50):
        lo, hi = window_intervals(model, method, range(30), horizon)
        for seed in range(30):
            iv = envelope_path(step, model.caps, EventStream(seed, model.alphabet).window(horizon))[-1]
            assert (tuple(lo[seed]), tuple(hi[seed])) == iv


def test_uniform_kernel_matches_python():
    from atocftp.events import uniform_at
    for seed in (0, 1, 2**63 + 5):
        key = np.uint64(stream_key(seed))
        assert [K.uniform(key, t) for t in range(100)] == [uniform_at(seed, t) for t in range(100)]
