import numpy as np
import pytest

from privcp import models, synth
from privcp.models import Hyper


def test_pinball_subgradient_matches_finite_differences(rng):
    X = rng.normal(size=(50, 3))
    y = rng.normal(size=50)
    A = models._design(X)
    coef = rng.normal(size=4)
    g = models.pinball_subgradient(A, y, coef, 0.3)
    h = 1e-6
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        fd = (models.pinball_loss(y - A @ (coef + e), 0.3) - models.pinball_loss(y - A @ (coef - e), 0.3)) / (2 * h)
        assert fd == pytest.approx(g[j], rel=1e-5, abs=1e-9)


def test_intercept_only_quantiles():
    X = np.zeros((100, 0))
    y = np.arange(100.0)
    med = models.fit_quantile(X, y, 0.5)
    assert abs(med.coef[0] - 49.5) <= 1.5
    q9 = models.fit_quantile(X, y, 0.9)
    assert abs(q9.coef[0] - 89.1) <= 2


def test_realizable_target(rng):
    X = rng.uniform(-1, 1, size=(200, 3))
    y = X @ np.array([1.0, -2.0, 0.5]) + 0.3
    for tau in (0.1, 0.5, 0.9):
        m = models.fit_quantile(X, y, tau)
        assert m.final_loss < 1e-3
        assert np.all(np.diff(m.losses) <= 1e-12)


def test_quantile_errors():
    with pytest.raises(ValueError):
        models.fit_quantile(np.zeros((5, 1)), np.zeros(5), 1.0)
    with pytest.raises(ValueError):
        models.fit_quantile(np.zeros((5, 1)), np.array([0, 1, np.nan, 0, 0.0]), 0.5)
    with pytest.raises(ValueError):
        models.fit_quantile(np.zeros((1, 1)), np.zeros(1), 0.5)


def test_quantile_deterministic(rng):
    X = rng.normal(size=(100, 2))
    y = X[:, 0] + rng.normal(size=100)
    a = models.fit_quantile(X, y, 0.2)
    b = models.fit_quantile(X, y, 0.2)
    assert np.array_equal(a.coef, b.coef)


def test_logistic_gradient(rng):
    A = models._design(rng.normal(size=(40, 2)))
    t = (rng.uniform(size=40) < 0.4).astype(float)
    coef = rng.normal(size=3)
    _, g = models.logistic_objective(A, t, coef, 0.3)
    h = 1e-6
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd = (models.logistic_objective(A, t, coef + e, 0.3)[0] - models.logistic_objective(A, t, coef - e, 0.3)[0]) / (2 * h)
        assert fd == pytest.approx(g[j], rel=1e-5, abs=1e-9)


def test_logistic_null_features(rng):
    Z = rng.normal(size=(4000, 2))
    m = rng.uniform(size=4000) < 0.3
    p = models.fit_logistic(Z, m).predict_proba(Z)
    assert np.all(np.abs(p - (~m).mean()) < 0.05)


def test_logistic_separable_auc(rng):
    Z = rng.normal(size=(400, 1))
    m = Z[:, 0] > 0
    p = models.fit_logistic(Z, m).predict_proba(Z)
    s = p[~m][:, None] > p[m][None, :]
    assert s.mean() > 0.99


def test_logistic_penalty_limit(rng):
    Z = rng.normal(size=(500, 2))
    m = Z[:, 0] + 0.3 * rng.normal(size=500) > 0.5
    fit = models.fit_logistic(Z, m, Hyper(l2=1e6))
    assert np.all(np.abs(fit.coef[1:]) < 1e-4)
    assert np.allclose(fit.predict_proba(Z), (~m).mean(), atol=1e-3)


def test_logistic_single_class():
    with pytest.raises(ValueError, match="both classes"):
        models.fit_logistic(np.zeros((5, 1)), np.zeros(5, bool))


def test_kmeans_examples(rng):
    pts = rng.normal(size=(6, 2))
    km = models.fit_kmeans(pts, 6)
    assert km.inertia(pts) == 0
    a = rng.normal(size=(100, 2))
    b = rng.normal(size=(100, 2)) + 20
    km = models.fit_kmeans(np.vstack([a, b]), 2, seed=4)
    la, lb = km.assign(a), km.assign(b)
    assert len(set(la)) == 1 and len(set(lb)) == 1 and la[0] != lb[0]
    again = models.fit_kmeans(np.vstack([a, b]), 2, seed=4)
    assert np.array_equal(km.centroids, again.centroids)
    with pytest.raises(ValueError):
        models.fit_kmeans(a, 0)


def test_kmeans_inertia_monotone(rng):
    Z = rng.normal(size=(500, 3))
    km = models.fit_kmeans(Z, 8, seed=1)
    assert np.all(np.diff(km.inertia_history) <= 1e-9)


def test_kmeans_ties_lowest_index():
    km = models.KMeansModel(2, np.array([[1.0], [-1.0]]), 0)
    assert km.assign([[0.0]])[0] == 0


def test_hyper_unknown_key():
    with pytest.raises(ValueError):
        Hyper.from_dict({"learning_rate": 1})


def test_oracles(small_under):
    ds, params = small_under
    x, z = ds.X[:4], ds.Z[:4]
    assert np.all(models.oracle_predict(models.OracleModel(models.IMPUTE_TRIVIAL, params), x, z) == 0)
    assert np.all(models.oracle_predict(models.OracleModel(models.QR_DEGENERATE, params), x, z) == 0)
    q = models.oracle_predict(models.OracleModel(models.QR_ORACLE, params, draws=50_000), x, z, rng=0)
    assert np.all(q[:, 0] < q[:, 1])
    p = models.oracle_predict(models.OracleModel(models.PCP_ORACLE_PROB, params), x, z)
    half = models.oracle_predict(models.OracleModel(models.PCP_HALF_PROB, params), x, z)
    assert np.allclose(half, p / 2)
    with pytest.raises(ValueError):
        models.OracleModel(models.QR_ORACLE, None)


def test_oracle_quantiles_zero_noise(small_under, monkeypatch):
    _, params = small_under
    monkeypatch.setattr(synth, "noise_scale", lambda zp: np.zeros_like(np.asarray(zp, dtype=float)))
    monkeypatch.setattr(synth, "sample_z", lambda rng, n: np.zeros((n, synth.D_Z)))
    x = np.full((2, 10), 3.0)
    q = models.oracle_predict(models.OracleModel(models.QR_ORACLE, params, draws=1000), x, None, rng=0)
    mean = synth.mean_y(params, x, np.zeros((2, 3)))
    assert np.allclose(q, mean[:, None], atol=1e-6)
