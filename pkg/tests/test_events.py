import numpy as np
import pytest
from scipy.stats import chisquare

from atocftp.errors import ConfigError
from atocftp.events import (
    AliasSampler, EventAlphabet, EventKind, EventLabel, EventStream, build_alias_sampler,
    event_at, mix_seed, splitmix64, uniform_at, uniforms,
)


def alphabet(probs):
    events = [EventLabel.demand(1 << k) for k in range(len(probs))]
    return EventAlphabet(tuple(events), probs)


def test_labels_render_one_based():
    assert str(EventLabel.demand(0b11)) == "d[1,2]"
    assert str(EventLabel.service(0, 3)) == "s[1]^3"
    assert str(EventLabel.ret(1, 2)) == "r[2]^2"
    with pytest.raises(ValueError):
        EventLabel.demand(0)


def test_alphabet_validation():
    with pytest.raises(ConfigError):
        EventAlphabet((), [])
    with pytest.raises(ConfigError):
        alphabet([0.5, 0.6])
    with pytest.raises(ConfigError):
        alphabet([1.0, 0.0])


def test_from_rates_drops_zero_events():
    ev = [EventLabel.demand(1), EventLabel.demand(2), EventLabel.demand(3)]
    a = EventAlphabet.from_rates(ev, [1.0, 0.0, 3.0], 4.0)
    assert a.events == (ev[0], ev[2])
    np.testing.assert_allclose(a.probs, [0.25, 0.75])
    assert a.rate == 4.0


def test_empty_alias_table_is_config_error():
    with pytest.raises(ConfigError):
        AliasSampler([])


@pytest.mark.parametrize("probs", [[1.0], [0.5, 0.5], [0.2, 0.3, 0.5], [0.01, 0.09, 0.4, 0.25, 0.25]])
def test_alias_cells_carry_exact_mass(probs):
    s = build_alias_sampler(alphabet(probs))
    np.testing.assert_allclose(s.cell_masses(), probs, atol=1e-15)


def test_degenerate_alias_always_returns_the_event():
    s = AliasSampler([1.0])
    assert {s.draw(u) for u in np.linspace(0, 1, 101, endpoint=False)} == {0}


def test_symmetric_pair_frequency():
    s = AliasSampler([0.5, 0.5])
    draws = s.draw_many(uniforms(3, 0, 10**6))
    f = draws.mean()
    assert abs(f - 0.5) <= 3 * np.sqrt(0.25 / 10**6)


def test_three_event_goodness_of_fit():
    s = AliasSampler([0.2, 0.3, 0.5])
    counts = np.bincount(s.draw_many(uniforms(11, 0, 10**6)), minlength=3)
    assert chisquare(counts, np.array([0.2, 0.3, 0.5]) * 10**6).pvalue > 0.01


def test_scalar_and_vector_draws_agree():
    s = AliasSampler([0.1, 0.2, 0.3, 0.4])
    u = uniforms(5, 0, 2000)
    assert [s.draw(x) for x in u] == list(s.draw_many(u))


def test_uniforms_match_scalar_generator():
    assert list(uniforms(42, 10, 20)) == [uniform_at(42, t) for t in range(10, 20)]
    u = uniforms(42, 0, 10**5)
    assert u.min() >= 0.0 and u.max() < 1.0


def test_splitmix_reference_values():
    # first outputs of SplitMix64 seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


def test_stream_is_deterministic_and_order_free():
    a = alphabet([0.2, 0.3, 0.5])
    s1, s2 = EventStream(42, a), EventStream(42, a)
    assert s1.event_at(7) == s1.event_at(7)
    forward = [s1.event_at(t) for t in range(50)]
    backward = [s2.event_at(t) for t in reversed(range(50))][::-1]
    assert forward == backward
    assert event_at(s1, 7) == s2.event_at(7)
    with pytest.raises(ValueError):
        s1.event_at(-1)


def test_window_suffix_replay():
    a = alphabet([0.2, 0.3, 0.5])
    s = EventStream(9, a)
    for T in (1, 2, 8, 64):
        assert s.window(2 * T)[-T:] == s.window(T)


def test_stream_matches_nu_across_seeds():
    probs = [0.2, 0.3, 0.5]
    a = alphabet(probs)
    counts = np.zeros(3)
    for seed in range(10**5):
        counts[EventStream(seed, a).index_at(0)] += 1
    assert chisquare(counts, np.array(probs) * 10**5).pvalue > 0.01


def test_stream_matches_nu_along_time():
    probs = [0.2, 0.3, 0.5]
    idx = EventStream(42, alphabet(probs)).indices(0, 10**6)
    counts = np.bincount(idx, minlength=3)
    assert chisquare(counts, np.array(probs) * 10**6).pvalue > 0.01


def test_mix_seed_spreads_indices():
    seeds = {mix_seed(1, r) for r in range(1000)}
    assert len(seeds) == 1000
    assert mix_seed(1, 0) != mix_seed(2, 0)


def test_event_kinds_are_distinct():
    assert len({EventKind.DEMAND, EventKind.SERVICE, EventKind.RETURN}) == 3
