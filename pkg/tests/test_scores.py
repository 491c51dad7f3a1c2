import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from privcp.scores import abs_residual, cqr, invert, score

# quarter-unit values keep every sum and difference exact in binary floating point
finite = st.integers(-200, 200).map(lambda k: k / 4)
thresholds = st.integers(-20, 80).map(lambda k: k / 4)


def _const(v):
    return lambda X: np.full(len(X), float(v))


def _pair(lo, hi):
    return lambda X: np.tile([float(lo), float(hi)], (len(X), 1))


def test_score_examples():
    assert score(abs_residual(_const(3)), [0.0], 3.0) == 0
    assert score(cqr(_pair(1, 4)), [0.0], 2.0) == -1
    assert score(cqr(_pair(1, 4)), [0.0], 6.0) == 2


def test_invert_examples():
    assert invert(abs_residual(_const(0)), [0.0], 1.0).intervals == ((-1, 1),)
    assert invert(cqr(_pair(1, 4)), [0.0], 0.5).intervals == ((0.5, 4.5),)
    full = invert(cqr(_pair(1, 4)), [0.0], math.inf)
    assert full.intervals == ((-math.inf, math.inf),)
    assert invert(cqr(_pair(1, 4)), [0.0], -2.0).is_empty


@settings(max_examples=200, deadline=None)
@given(finite, finite, finite, thresholds, st.sampled_from(["abs", "cqr"]))
def test_round_trip(a, b, y, t, kind):
    sf = abs_residual(_const(a)) if kind == "abs" else cqr(_pair(a, b))
    assert (y in invert(sf, [0.0], t)) == (score(sf, [0.0], y) <= t)


@settings(max_examples=100, deadline=None)
@given(finite, finite, thresholds, thresholds.map(abs))
def test_monotone_in_threshold(a, b, t, dt):
    sf = cqr(_pair(a, b))
    small, big = invert(sf, [0.0], t), invert(sf, [0.0], t + dt)
    for lo, hi in small.intervals:
        assert lo in big and hi in big


def test_vectorized_bounds():
    sf = cqr(lambda X: np.column_stack([X[:, 0], X[:, 0] + 1]))
    lo, hi = sf.bounds(np.array([[0.0], [2.0]]), [0.5, math.inf])
    assert lo[0] == -0.5 and hi[0] == 1.5
    assert lo[1] == -math.inf and hi[1] == math.inf
