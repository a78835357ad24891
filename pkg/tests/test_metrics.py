import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nssbm.metrics import adjusted_rand_index


def test_identical():
    assert adjusted_rand_index([0, 0, 1, 2], [0, 0, 1, 2]) == 1.0


def test_relabelled():
    assert adjusted_rand_index([0, 0, 1, 2], [2, 2, 0, 1]) == 1.0


def test_crossed_halves():
    # contingency [[1,1],[1,1]]: index 0, expected 2*2/6, max 2 -> -0.5
    assert adjusted_rand_index([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(-0.5)


def test_length_mismatch():
    with pytest.raises(ValueError):
        adjusted_rand_index([0, 1], [0, 1, 1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=2, max_size=40))
def test_agrees_with_sklearn(pairs):
    sklearn_metrics = pytest.importorskip("sklearn.metrics")
    a, b = np.array(pairs).T
    assert adjusted_rand_index(a, b) == pytest.approx(sklearn_metrics.adjusted_rand_score(a, b), abs=1e-12)
