import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oodgauge.metrics import accuracy, auroc


def brute_auroc(a, b):
    wins = 0.0
    for x in a:
        for y in b:
            wins += 1.0 if x > y else 0.5 if x == y else 0.0
    return wins / (len(a) * len(b))


def test_examples():
    assert auroc([2, 3], [0, 1]) == 1.0
    assert auroc([1, 2, 2], [2, 1, 2]) == 0.5
    assert auroc([1, 2], [1.5]) == 0.5


def test_matches_brute_force_with_ties():
    r = np.random.default_rng(2024)
    for _ in range(200):
        n1, n2 = r.integers(1, 60, size=2)
        # coarse integer scores guarantee plenty of ties
        a = r.integers(0, 10, size=n1).astype(float)
        b = r.integers(0, 10, size=n2).astype(float) + r.integers(0, 2)
        assert abs(auroc(a, b) - brute_auroc(a, b)) < 1e-12


def test_matches_brute_force_continuous():
    r = np.random.default_rng(7)
    a, b = r.normal(size=200), r.normal(0.5, size=200)
    assert abs(auroc(a, b) - brute_auroc(a, b)) < 1e-12


@settings(max_examples=100)
@given(st.lists(st.integers(-5, 5), min_size=1, max_size=30),
       st.lists(st.integers(-5, 5), min_size=1, max_size=30))
def test_swap_complement(a, b):
    assert auroc(a, b) + auroc(b, a) == 1.0


@settings(max_examples=100)
@given(st.lists(st.integers(-300, 300), min_size=1, max_size=30),
       st.lists(st.integers(-300, 300), min_size=1, max_size=30))
def test_monotone_transform_invariance(a, b):
    # grid values keep exp strictly increasing after rounding
    a, b = np.array(a) / 100.0, np.array(b) / 100.0
    assert auroc(np.exp(a), np.exp(b)) == auroc(a, b)
    assert auroc(2 * a + 1, 2 * b + 1) == auroc(a, b)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=30))
def test_identical_multisets(a):
    assert auroc(a, list(reversed(a))) == 0.5


def test_errors():
    with pytest.raises(ValueError):
        auroc([], [1.0])
    with pytest.raises(ValueError):
        auroc([np.nan], [1.0])


def test_accuracy():
    assert accuracy([0, 1, 1], [0, 1, 1]) == 1.0
    assert accuracy([1, 0], [0, 1]) == 0.0
    assert accuracy([0, 1, 1, 0], [0, 1, 1, 1]) == 0.75
    with pytest.raises(ValueError):
        accuracy([0, 1], [0])
    with pytest.raises(ValueError):
        accuracy([], [])
