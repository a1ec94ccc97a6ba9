import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svarmsh.restrictions import (
    PRESET_NAMES,
    RestrictionScheme,
    describe,
    preset,
    scheme_from_pattern,
)


def test_unrestricted_alpha_zero_is_identity():
    s = preset("unrestricted", 3)
    assert s.r == 6
    assert np.array_equal(s.reconstruct_A0(np.zeros(6)), np.eye(3))


def test_recursive_upper_triangle_zero():
    s = preset("recursive", 4)
    A0 = s.reconstruct_A0(np.random.default_rng(0).normal(size=s.r))
    assert np.all(A0[np.triu_indices(4, 1)] == 0)
    assert np.all(np.diag(A0) == 1)


def test_taylor_with_money_tied_entries():
    s = preset("taylor_with_money", 6)
    rng = np.random.default_rng(1)
    for _ in range(5):
        alpha = rng.normal(size=s.r)
        A0 = s.reconstruct_A0(alpha)
        assert A0[4, 0] == -1.0
        assert A0[5, 0] == -A0[5, 4]


def test_taylor_with_money_zero_pattern():
    expected_zero = np.array(
        [
            [0, 1, 1, 1, 1, 1],
            [0, 0, 1, 1, 1, 1],
            [0, 0, 0, 0, 0, 0],
            [0, 0, 1, 0, 0, 1],
            [0, 0, 1, 1, 0, 0],
            [0, 1, 1, 0, 0, 0],
        ],
        dtype=bool,
    )
    assert np.array_equal(preset("taylor_with_money", 6).zero_mask(), expected_zero)


def test_monetary_schemes_differ_only_in_row_four():
    a = preset("taylor_with_money", 6).zero_mask()
    b = preset("taylor_without_money", 6).zero_mask()
    c = preset("money_interest_rate", 6).zero_mask()
    assert np.array_equal(np.delete(a, 3, 0), np.delete(b, 3, 0))
    assert np.array_equal(np.delete(a, 3, 0), np.delete(c, 3, 0))
    assert list(b[3]) == [False, False, True, False, True, True]
    assert list(c[3]) == [True, True, True, False, False, True]


def test_restricting_one_row_frees_the_rest():
    s = preset("money_interest_rate", 6, rows=[4])
    zero = s.zero_mask()
    assert zero[3].sum() == 4
    assert zero.sum() == 4


def test_row_selection_keeps_ties_within_the_row():
    s = preset("taylor_with_money", 6, rows=[6])
    A0 = s.reconstruct_A0(np.random.default_rng(3).normal(size=s.r))
    assert A0[5, 0] == -A0[5, 4]
    assert s.zero_mask().sum() == 2


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_round_trip_every_preset(name):
    s = preset(name, 6)
    alpha = np.random.default_rng(2).normal(size=s.r)
    assert np.allclose(s.extract_alpha(s.reconstruct_A0(alpha)), alpha, atol=1e-12)
    assert s.is_admissible(s.reconstruct_A0(alpha))


@given(st.integers(2, 5), st.integers(0, 2**31 - 1))
@settings(max_examples=40, deadline=None)
def test_round_trip_property(n, seed):
    s = preset("unrestricted" if seed % 2 else "recursive", n)
    alpha = np.random.default_rng(seed).normal(size=s.r)
    A0 = s.reconstruct_A0(alpha)
    assert np.allclose(np.diag(A0), 1.0)
    assert np.allclose(s.extract_alpha(A0), alpha, atol=1e-12)


def test_pattern_with_scaled_tie():
    s = scheme_from_pattern(["1 *", "2*a12 1"])
    A0 = s.reconstruct_A0(np.array([0.7]))
    assert np.allclose(A0, [[1, 0.7], [1.4, 1]])
    assert describe(s) == [["1", "a12"], ["2*a12", "1"]]


def test_invalid_schemes_rejected():
    with pytest.raises(ValueError):
        RestrictionScheme(np.zeros((4, 0)), np.zeros(4))  # diagonal not fixed at one
    Q = np.zeros((4, 2))
    Q[1, 0] = Q[1, 1] = 1.0
    with pytest.raises(ValueError):
        RestrictionScheme(Q, np.array([1.0, 0, 0, 1.0]))  # dependent columns
    with pytest.raises(ValueError):
        scheme_from_pattern(["1 x", "* 1"])
    with pytest.raises(ValueError):
        preset("taylor_with_money", 3)
    with pytest.raises(KeyError):
        preset("no_such_scheme", 2)


def test_dict_round_trip():
    s = preset("taylor_with_money", 6)
    t = RestrictionScheme.from_dict(s.to_dict())
    assert np.array_equal(s.Q, t.Q) and np.array_equal(s.q, t.q) and s.labels == t.labels
