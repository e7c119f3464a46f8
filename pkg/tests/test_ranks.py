import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from graphranktest.ranks import compute_normalized_ranks, has_rank_ties


def test_hand_example_with_tie():
    R = compute_normalized_ranks([0.0, 1.0, 2.0])
    assert R[0, 1] == 0 and R[0, 2] == pytest.approx(1 / 3)
    # from y=1 both others are at distance 1; smaller index wins
    assert R[1, 0] == 0 and R[1, 2] == pytest.approx(1 / 3)
    assert R[2, 1] == 0 and R[2, 0] == pytest.approx(1 / 3)
    assert np.isnan(np.diag(R)).all()
    assert has_rank_ties([0.0, 1.0, 2.0])


def test_no_ties_for_generic_data(rng):
    assert not has_rank_ties(rng.normal(size=30))


def test_matches_sort_oracle(rng):
    y = rng.normal(size=12)
    expected = np.array(oracles.rank_matrix(y.tolist()), dtype=float)
    np.testing.assert_array_equal(compute_normalized_ranks(y), expected)


def test_oracle_agrees_under_duplicates():
    y = [1.0, 1.0, 3.0, 0.0, 2.0, 1.0]
    expected = np.array(oracles.rank_matrix(y), dtype=float)
    np.testing.assert_array_equal(compute_normalized_ranks(y), expected)


def test_asymmetric():
    R = compute_normalized_ranks([0.0, 1.0, 5.0, 5.5])
    assert R[0, 2] == 0.25
    assert R[2, 0] == 0.5


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        compute_normalized_ranks([1.0])
    with pytest.raises(ValueError, match="index 1"):
        compute_normalized_ranks([1.0, np.inf, 2.0])


@settings(max_examples=50, deadline=None)
@given(
    y=st.lists(st.integers(-1000, 1000), min_size=2, max_size=15),
    a=st.sampled_from([-3.0, -0.5, 0.25, 2.0, 10.0]),
    b=st.integers(-100, 100),
)
def test_row_permutation_property_and_affine_invariance(y, a, b):
    n = len(y)
    R = compute_normalized_ranks(y)
    off = ~np.eye(n, dtype=bool)
    for i in range(n):
        row = np.sort(R[i][off[i]])
        np.testing.assert_allclose(row, np.arange(n - 1) / n)
        assert row.sum() == pytest.approx((n - 2) * (n - 1) / (2 * n))
    # integer data and dyadic-friendly a, b keep the arithmetic exact, so
    # even tied distances stay tied
    yt = a * np.asarray(y, dtype=float) + b
    np.testing.assert_array_equal(compute_normalized_ranks(yt), R)
