import pytest
from hypothesis import given, strategies as st

from atocftp.errors import ConfigError
from atocftp.lattice import (
    Interval, all_intervals, all_states, bottom, check_caps, check_state, contains, format_state,
    hull, interval_states, is_singleton, join, leq, meet, parse_state, top,
)


def test_leq_examples():
    assert leq((0, 0), (1, 2))
    assert not leq((1, 2), (2, 1))
    assert leq((1, 2), (1, 2))
    with pytest.raises(ValueError):
        leq((1,), (1, 2))


def test_bottom_top():
    assert bottom((3, 4)) == (0, 0)
    assert top((3, 4)) == (3, 4)
    assert leq(bottom((3, 4)), top((3, 4)))


def test_singleton():
    assert is_singleton(Interval((1, 1), (1, 1)))
    assert not is_singleton(Interval((0, 0), (0, 1)))
    assert not is_singleton(Interval(bottom((1, 1)), top((1, 1))))


def test_caps_and_state_checks():
    with pytest.raises(ConfigError):
        check_caps(())
    with pytest.raises(ConfigError):
        check_caps((2, 0))
    with pytest.raises(ConfigError):
        check_caps((1,) * 64)
    assert check_state([1, 2], (2, 2)) == (1, 2)
    with pytest.raises(ValueError):
        check_state((3, 0), (2, 2))


def test_state_text_round_trip():
    assert format_state((1, 0, 3)) == "(1,0,3)"
    assert parse_state("(1,0,3)") == (1, 0, 3)


def test_enumeration_sizes():
    assert len(list(all_states((2, 2)))) == 9
    assert len(list(all_states((4,)))) == 5
    # intervals of a chain of length 3 in each coordinate: 6 * 6
    assert len(list(all_intervals((2, 2)))) == 36


caps_st = st.lists(st.integers(1, 3), min_size=1, max_size=3)


@given(caps_st, st.data())
def test_meet_join_stay_in_space(caps, data):
    x = tuple(data.draw(st.integers(0, c)) for c in caps)
    y = tuple(data.draw(st.integers(0, c)) for c in caps)
    for z in (meet(x, y), join(x, y)):
        check_state(z, caps)
    assert leq(meet(x, y), x) and leq(x, join(x, y))


@given(caps_st, st.data())
def test_membership_matches_enumeration(caps, data):
    a = tuple(data.draw(st.integers(0, c)) for c in caps)
    b = tuple(data.draw(st.integers(0, c)) for c in caps)
    iv = Interval(meet(a, b), join(a, b))
    inside = set(interval_states(iv))
    assert all(contains(iv, x) == (x in inside) for x in all_states(caps))
    assert hull(inside) == iv
