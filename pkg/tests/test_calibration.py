import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from privcp import calibration as cal
from privcp.data import Dataset, PredictionSet, SplitIndices
from privcp.scores import abs_residual, cqr, invert
from privcp.selftest import enumeration_threshold


def _dataset(y, m, z=None, x=None):
    y = np.asarray(y, dtype=float)
    m = np.asarray(m, dtype=bool)
    n = len(y)
    x = np.zeros((n, 1)) if x is None else np.asarray(x, dtype=float).reshape(n, -1)
    z = np.arange(n, dtype=float)[:, None] if z is None else np.asarray(z, dtype=float).reshape(n, -1)
    return Dataset(x, z, np.where(m, np.nan, y), ~m, m, y.copy())


def _splits(cal_idx, ref_idx=()):
    e = np.array([], dtype=int)
    return SplitIndices(e, e, np.asarray(cal_idx, dtype=int), e, np.asarray(ref_idx, dtype=int))


ZERO = abs_residual(lambda X: np.zeros(len(X)))


# -- thresholds -------------------------------------------------------------------

def test_cp_examples(rng):
    assert cal.cp_threshold(np.arange(1, 10), 0.5).value == 5
    assert cal.cp_threshold([1, 2, 3], 0.1).is_infinite
    s = rng.uniform(size=50)
    assert cal.cp_threshold(s, 0.1).value == np.sort(s)[45]
    assert cal.cp_threshold([], 0.1).is_infinite
    assert cal.cp_threshold([1, 1, 1, 2], 0.5).value == 1  # duplicates count separately


def test_weighted_examples():
    s = np.arange(1, 10.0)
    assert cal.weighted_threshold(cal.ScoreProfile.uniform(s), 0.5).value == 5
    prof = cal.ScoreProfile([1, 2, 3], [3, 1, 1], 1)
    assert cal.weighted_threshold(prof, 0.9).is_infinite
    assert cal.weighted_threshold(prof, 0.8).value == 3
    with pytest.raises(ValueError, match="weights must be positive"):
        cal.weighted_threshold(cal.ScoreProfile([1, 2], [1, 0], 1), 0.5)
    with pytest.raises(ValueError):
        cal.ScoreProfile([1, np.inf], [1, 1], 1)


def test_ties_are_pooled():
    # masses 1,1 on score 0 then 2 on score 1; total 5
    prof = cal.ScoreProfile([1, 0, 0], [2, 1, 1], 1)
    assert cal.weighted_threshold(prof, 0.4).value == 0
    assert cal.weighted_threshold(prof, 0.41).value == 1


profiles = st.integers(1, 12).flatmap(lambda n: st.tuples(
    st.lists(st.integers(-3, 3).map(float), min_size=n, max_size=n),
    st.lists(st.floats(0.01, 10), min_size=n, max_size=n),
    st.floats(0.01, 10),
))


@settings(max_examples=300, deadline=None)
@given(profiles, st.floats(0.01, 0.99))
def test_weighted_matches_enumeration(p, level):
    s, w, wt = p
    got = cal.weighted_threshold(cal.ScoreProfile(s, w, wt), level).value
    assert got == enumeration_threshold(s, w, wt, level)


@settings(max_examples=200, deadline=None)
@given(profiles, st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_monotone_in_level(p, l1, l2):
    prof = cal.ScoreProfile(*p)
    lo, hi = sorted((l1, l2))
    assert cal.weighted_threshold(prof, lo).value <= cal.weighted_threshold(prof, hi).value


def test_signed_walk_agrees_on_positive_weights(rng):
    for _ in range(200):
        n = int(rng.integers(1, 12))
        s, w, wt = rng.normal(size=n), rng.uniform(0.1, 2, n), float(rng.uniform(0.1, 2))
        level = float(rng.uniform(0.05, 0.95))
        assert cal.signed_weighted_threshold(s, w, wt, level) == \
            cal.weighted_threshold(cal.ScoreProfile(s, w, wt), level).value
    with pytest.raises(ZeroDivisionError):
        cal.signed_weighted_threshold([0.0], [1.0], -1.0, 0.5)


def test_scale_equivariance(rng):
    y = rng.normal(size=40)
    pred = rng.normal(size=40)
    for c in (0.5, 3.0, 8.0):
        base = cal.cp_threshold(np.abs(pred - y), 0.1).value
        scaled = cal.cp_threshold(np.abs(c * pred - c * y), 0.1).value
        assert scaled == pytest.approx(c * base, rel=1e-12)


# -- dataset-level schemes ----------------------------------------------------------------

def test_naive_cp_filters(rng):
    y = rng.normal(size=20)
    ds = _dataset(y, np.zeros(20))
    assert cal.naive_cp(ds, _splits(range(20)), ZERO, 0.1).value == cal.cp_threshold(np.abs(y), 0.1).value
    ds = _dataset(y, np.ones(20))
    assert cal.naive_cp(ds, _splits(range(20)), ZERO, 0.1).is_infinite


def test_wcp_reductions(rng):
    y = rng.normal(size=30)
    m = rng.uniform(size=30) < 0.3
    ds = _dataset(y, m)
    sp = _splits(range(30))
    base = cal.naive_cp(ds, sp, ZERO, 0.2).value
    assert cal.wcp_threshold(ds, sp, ZERO, np.full(30, 2.5), 2.5, 0.2).value == base
    w = cal.weights_from_probs(np.full(30, 0.7), 0.7)
    assert cal.wcp_threshold(ds, sp, ZERO, w, 1.0, 0.2).value == base


def test_wcp_dominant_weight():
    y = np.array([0.5, 1.0, 2.0, 3.0])
    ds = _dataset(y, np.zeros(4))
    w = np.array([1.0, 1e6, 1.0, 1.0])
    assert cal.wcp_threshold(ds, _splits(range(4)), ZERO, w, 1.0, 0.5).value == 1.0


def pcp_straight_line(scores, m, w, alpha, beta):
    """Transliteration: loop over every calibration sample, normalize, walk."""
    level = 1 - alpha + beta
    uc = [j for j in range(len(scores)) if not m[j]]
    qs = []
    for i in range(len(scores)):
        denom = sum(w[j] for j in uc) + w[i]
        pairs = sorted((scores[j], w[j] / denom) for j in uc)
        q = math.inf
        acc = 0.0
        for k, (s, p) in enumerate(pairs):
            acc += p
            if k + 1 < len(pairs) and pairs[k + 1][0] == s:
                continue
            if acc >= level * (1 - 1e-12):
                q = s
                break
        qs.append(q)
    qs.sort()
    k = math.ceil((len(qs) + 1) * (1 - beta) - 1e-9)
    return qs[k - 1] if k <= len(qs) else math.inf


def test_pcp_matches_straight_line(rng):
    hits = 0
    for trial in range(300):
        n = 12
        y = rng.normal(size=n)
        m = rng.uniform(size=n) < 0.3
        if m.all():
            continue
        w = rng.uniform(0.2, 3, n)
        alpha = float(rng.choice([0.1, 0.2, 0.3]))
        beta = float(rng.choice([0.005, 0.05, 0.09]))
        ds = _dataset(y, m, z=w)
        got = cal.pcp_calibrate(ds, _splits(range(n)), ZERO, lambda z: z[:, 0], alpha, beta).value
        want = pcp_straight_line(np.abs(y), m, w, alpha, beta)
        assert got == want
        hits += math.isfinite(got)
    assert hits > 0  # both finite and infinite outcomes exercised


def test_pcp_constant_weights(rng):
    y = rng.normal(size=400)
    ds = _dataset(y, np.zeros(400))
    got = cal.pcp_calibrate(ds, _splits(range(400)), ZERO, lambda z: np.ones(len(z)), 0.1, 0.02).value
    assert got == cal.cp_threshold(np.abs(y), 0.1 - 0.02).value


def test_pcp_rank_property(rng):
    for _ in range(100):
        n = int(rng.integers(5, 30))
        s = rng.normal(size=n)
        m = rng.uniform(size=n) < 0.3
        w = rng.uniform(0.2, 3, n)
        beta = 0.05
        q = cal.pcp_thresholds(s[~m], w[~m], w, 1 - 0.2 + beta)
        t = cal.pcp_from_weights(s[~m], w[~m], w, 0.2, beta).value
        if math.isfinite(t):
            assert (q <= t).sum() >= math.ceil((n + 1) * (1 - beta) - 1e-9)


def test_pcp_beta_check():
    with pytest.raises(ValueError):
        cal.pcp_from_weights([1.0], [1.0], [1.0], 0.1, 0.2)


def test_naive_impute(rng):
    y = rng.normal(size=20)
    sp = _splits(range(20))
    ds = _dataset(y, np.zeros(20))
    g = lambda X, Z: np.zeros(len(X))
    assert cal.naive_impute_calibrate(ds, sp, ZERO, g, 0.1).value == cal.cp_threshold(np.abs(y), 0.1).value
    ds = _dataset(y, np.ones(20), z=y)
    perfect = lambda X, Z: Z[:, 0]
    assert cal.naive_impute_calibrate(ds, sp, ZERO, perfect, 0.1).value == cal.cp_threshold(np.abs(y), 0.1).value
    m = np.arange(20) % 3 == 0
    ds = _dataset(y, m)
    manual = np.where(m, 0.25, y)
    got = cal.naive_impute_calibrate(ds, sp, ZERO, lambda X, Z: np.full(len(X), 0.25), 0.1).value
    assert got == cal.cp_threshold(np.abs(manual), 0.1).value


# -- samplers and UI ------------------------------------------------------------------

def test_marginal_sampler(rng):
    s = cal.build_error_sampler(cal.MARGINAL, np.zeros((2, 1)), [-1.0, 1.0])
    d = s.draw(np.zeros((10_000, 1)), rng)
    assert set(np.unique(d)) == {-1.0, 1.0}
    assert abs(d.mean()) < 0.05


def test_kmeans_sampler_blobs(rng):
    a = rng.normal(size=(100, 2))
    b = rng.normal(size=(100, 2)) + 30
    ref_z = np.vstack([a, b])
    ref_e = np.r_[np.ones(100), -np.ones(100)]
    s = cal.build_error_sampler(cal.KMEANS, ref_z, ref_e, train_z=ref_z, k=2, seed=0)
    assert np.all(s.draw(a, rng) == 1)
    assert np.all(s.draw(b, rng) == -1)


def test_exact_z_sampler(rng):
    z = np.array([[0.0], [1.0], [0.0], [2.0]])
    e = np.array([5.0, 6.0, 7.0, 8.0])
    s = cal.build_error_sampler(cal.EXACT_Z, z, e)
    pool = s.pools[int(s.route([[0.0]])[0])]
    assert sorted(pool) == [5.0, 7.0]
    with pytest.raises(KeyError):
        s.draw(np.array([[3.0]]), rng)


def test_linear_bin_merges_empty(rng):
    tz = rng.normal(size=(200, 1))
    ty = 2 * tz[:, 0]
    bin_z = rng.normal(size=(80, 1))
    ref_z = bin_z[bin_z[:, 0] > 0]  # labelled refs only in the upper half
    s = cal.build_error_sampler(cal.LINEAR_BIN, ref_z, np.ones(len(ref_z)), tz, ty, k=8, bin_z=bin_z)
    assert np.all(s.draw(np.array([[-5.0], [5.0]]), rng) == 1)
    assert all(len(p) for p in s.pools.values())


def test_empty_pool_error():
    with pytest.raises(ValueError, match="empty error pool"):
        cal.build_error_sampler(cal.MARGINAL, np.zeros((0, 1)), [])


def ui_straight_line(y_obs, m, g, errors, alpha, seed):
    """Impute each corrupted label as g plus a uniformly chosen reference error."""
    rng = np.random.default_rng(seed)
    y = list(y_obs)
    bad = [i for i in range(len(y)) if m[i]]
    picks = rng.integers(0, len(errors), size=len(bad))
    for i, k in zip(bad, picks):
        y[i] = g[i] + errors[k]
    s = sorted(abs(v) for v in y)
    k = math.ceil((len(s) + 1) * (1 - alpha) - 1e-9)
    return s[k - 1] if k <= len(s) else math.inf


def test_ui_matches_straight_line(rng):
    for _ in range(50):
        n_cal, n_ref = 15, 10
        y = rng.normal(size=n_cal + n_ref)
        m = rng.uniform(size=n_cal + n_ref) < 0.3
        m[n_cal] = False
        g_val = rng.normal(size=n_cal + n_ref)
        ds = _dataset(y, m, z=g_val)
        sp = _splits(range(n_cal), range(n_cal, n_cal + n_ref))
        g = lambda X, Z: Z[:, 0]
        _, e = cal.reference_errors(ds, sp, g)
        sampler = cal.build_error_sampler(cal.MARGINAL, np.zeros((len(e), 1)), e)
        seed = int(rng.integers(1 << 30))
        got = cal.ui_calibrate(ds, sp, ZERO, g, sampler, 0.2, np.random.default_rng(seed)).value
        want = ui_straight_line(np.where(m, np.nan, y)[:n_cal], m[:n_cal], g_val[:n_cal], list(e), 0.2, seed)
        assert got == want


def test_ui_reductions(rng):
    y = rng.normal(size=30)
    g = lambda X, Z: np.full(len(X), 0.1)
    sp = _splits(range(20), range(20, 30))
    ds = _dataset(y, np.zeros(30))
    sampler = cal.build_error_sampler(cal.MARGINAL, np.zeros((10, 1)), rng.normal(size=10))
    ui = cal.ui_calibrate(ds, sp, ZERO, g, sampler, 0.1, rng).value
    assert ui == cal.naive_cp(ds, sp, ZERO, 0.1).value == cal.cp_threshold(np.abs(y[:20]), 0.1).value
    m = np.arange(30) % 2 == 0
    ds = _dataset(y, m)
    zero = cal.build_error_sampler(cal.MARGINAL, np.zeros((3, 1)), np.zeros(3))
    assert cal.ui_calibrate(ds, sp, ZERO, g, zero, 0.1, rng).value == \
        cal.naive_impute_calibrate(ds, sp, ZERO, g, 0.1).value
    with pytest.raises(ValueError):
        cal.ui_calibrate(ds, _splits(range(20)), ZERO, g, zero, 0.1, rng)


# -- union ---------------------------------------------------------------------------

def test_triply_examples():
    x = np.zeros(1)
    sf = cqr(lambda X: np.tile([0.0, 1.0], (len(X), 1)))
    assert cal.triply_robust(sf, sf, sf, 0.5, 0.5, 0.5, x) == invert(sf, x, 0.5)
    assert cal.triply_robust(sf, sf, sf, 0.5, math.inf, 0.1, x).length == math.inf


def test_triply_distinct_models_grid():
    x = np.zeros(1)
    sfs = [cqr(lambda X, c=c: np.tile([c, c + 1.0], (len(X), 1))) for c in (0.0, 3.0, 10.0)]
    ts = (0.5, 0.2, -0.1)
    u = cal.triply_robust(*sfs, *ts, x)
    grid = np.linspace(-5, 15, 4001)
    expect = np.zeros_like(grid, dtype=bool)
    for sf, t in zip(sfs, ts):
        expect |= invert(sf, x, t).contains(grid)
    assert np.array_equal(u.contains(grid), expect)
    parts = cal.triply_bounds(sfs, ts, x[None, :])
    assert cal.union_length(parts)[0] == pytest.approx(u.length)
    assert np.array_equal(cal.union_covers(parts, np.array([0.7])), [u.contains(0.7)])


def test_union_dominates_components(rng):
    X = rng.normal(size=(200, 1))
    y = rng.normal(size=200) * 2
    sfs = [cqr(lambda X, c=c: np.column_stack([X[:, 0] + c - 1, X[:, 0] + c + 1])) for c in (-1.0, 0.0, 1.5)]
    parts = cal.triply_bounds(sfs, (0.1, 0.4, 0.2), X)
    u = cal.union_covers(parts, y)
    for lo, hi in parts:
        assert np.all(u >= ((y >= lo) & (y <= hi)))
    assert isinstance(cal.triply_robust(*sfs, 0.1, 0.4, 0.2, X[0]), PredictionSet)
