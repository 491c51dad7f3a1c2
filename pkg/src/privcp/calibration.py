"""Calibration schemes: plain CP on uncorrupted samples, weighted CP, PCP,
naive imputation, uncertain imputation (UI) and their triply robust union."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import PredictionSet, set_union
from .scores import invert

NAIVE_CP = "NAIVE_CP"
WCP = "WCP"
PCP = "PCP"
NAIVE_IMPUTE = "NAIVE_IMPUTE"
UI = "UI"
CP = "CP"


@dataclass(frozen=True)
class ScoreProfile:
    """Scores with positive weights and the weight of the test point."""

    scores: np.ndarray
    weights: np.ndarray
    test_weight: float
    order: np.ndarray = field(init=False, repr=False)

    def __init__(self, scores, weights, test_weight):
        scores = np.asarray(scores, dtype=float).reshape(-1)
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if scores.shape != weights.shape:
            raise ValueError("scores and weights must align")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "test_weight", float(test_weight))
        object.__setattr__(self, "order", np.argsort(scores, kind="stable"))

    @classmethod
    def uniform(cls, scores):
        return cls(scores, np.ones(len(np.asarray(scores).reshape(-1))), 1.0)


@dataclass(frozen=True)
class CalibratedThreshold:
    value: float
    method: str
    level: float

    @property
    def is_infinite(self) -> bool:
        return self.value == math.inf


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")


# Relative slack absorbing float round-off in level comparisons, so that
# e.g. 0.9 * 10 counts as reaching 9.
RTOL = 1e-12


def _target(level, total):
    t = level * total
    return t - RTOL * abs(t)


def cp_rank(n: int, alpha: float) -> int:
    """1-based rank ceil((n + 1)(1 - alpha)) of the CP order statistic."""
    return math.ceil(_target(1 - alpha, n + 1))


def cp_threshold(scores, alpha: float, method: str = CP) -> CalibratedThreshold:
    """Split-conformal threshold: the ceil((n+1)(1-alpha))-th smallest score."""
    _check_alpha(alpha)
    s = np.sort(np.asarray(scores, dtype=float).reshape(-1))
    k = cp_rank(len(s), alpha)
    value = math.inf if k > len(s) else float(s[k - 1])
    return CalibratedThreshold(value, method, 1 - alpha)


def _tie_ends(sorted_scores):
    """Index of the last element of every run of equal scores."""
    n = len(sorted_scores)
    if n == 0:
        return np.array([], dtype=int)
    last = np.flatnonzero(np.diff(sorted_scores) != 0)
    return np.append(last, n - 1)


def weighted_threshold(profile: ScoreProfile, level: float, method: str = WCP) -> CalibratedThreshold:
    """Smallest score whose normalized cumulative weight reaches ``level``.

    The test point contributes an atom at +inf, so the result is +inf when
    the finite mass never reaches the level. Equal scores are pooled.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if np.any(profile.weights <= 0) or profile.test_weight <= 0:
        raise ValueError("weights must be positive")
    s = profile.scores[profile.order]
    w = profile.weights[profile.order]
    total = w.sum() + profile.test_weight
    ends = _tie_ends(s)
    cum = np.cumsum(w)[ends]
    # cum / total >= level, without the division
    hit = np.flatnonzero(cum >= _target(level, total))
    value = float(s[ends[hit[0]]]) if len(hit) else math.inf
    return CalibratedThreshold(value, method, level)


def signed_weighted_threshold(scores, weights, test_weight: float, level: float) -> float:
    """Weighted quantile walk that tolerates nonpositive masses.

    Masses are normalized by the signed total, so cumulative mass need not
    be monotone; the first pooled score with cumulative mass >= level is
    returned, or +inf if none. A zero total raises.
    """
    scores = np.asarray(scores, dtype=float).reshape(-1)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    total = weights.sum() + test_weight
    if total == 0:
        raise ZeroDivisionError("weight normalization singular")
    order = np.argsort(scores, kind="stable")
    s, w = scores[order], weights[order]
    ends = _tie_ends(s)
    cum = np.cumsum(w)[ends] / total
    hit = np.flatnonzero(cum >= _target(level, 1.0))
    return float(s[ends[hit[0]]]) if len(hit) else math.inf


# -- dataset-level schemes ---------------------------------------------------

def _cal_parts(dataset, splits):
    cal = np.asarray(splits.cal, dtype=int)
    uc = cal[~dataset.m[cal]]
    return cal, uc


def naive_cp(dataset, splits, sf, alpha: float) -> CalibratedThreshold:
    """CP over the uncorrupted calibration samples only."""
    _, uc = _cal_parts(dataset, splits)
    scores = sf.scores(dataset.X[uc], dataset.y_obs[uc])
    return cp_threshold(scores, alpha, NAIVE_CP)


def wcp_threshold(dataset, splits, sf, weights, test_weight: float, alpha: float) -> CalibratedThreshold:
    """Weighted CP over uncorrupted calibration samples.

    ``weights`` holds one entry per calibration index (in ``splits.cal``
    order); entries of corrupted samples are ignored.
    """
    _check_alpha(alpha)
    cal, _ = _cal_parts(dataset, splits)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != cal.shape:
        raise ValueError("one weight per calibration sample expected")
    keep = ~dataset.m[cal]
    scores = sf.scores(dataset.X[cal[keep]], dataset.y_obs[cal[keep]])
    return weighted_threshold(ScoreProfile(scores, weights[keep], test_weight), 1 - alpha, WCP)


def pcp_thresholds(scores_uc, w_uc, w_all, level: float, signed: bool = False) -> np.ndarray:
    """Per-sample weighted thresholds Q(Z_i), one per entry of ``w_all``.

    Each uses the uncorrupted scores ``scores_uc`` with weights ``w_uc`` and
    the i-th weight of ``w_all`` as the +inf atom. With ``signed`` the
    weights may be nonpositive and the signed-mass walk is used.
    """
    scores_uc = np.asarray(scores_uc, dtype=float)
    w_uc = np.asarray(w_uc, dtype=float)
    w_all = np.asarray(w_all, dtype=float)
    if not signed and (np.any(w_uc <= 0) or np.any(w_all <= 0)):
        raise ValueError("weights must be positive")
    if len(scores_uc) == 0:
        return np.full(len(w_all), math.inf)
    order = np.argsort(scores_uc, kind="stable")
    s, w = scores_uc[order], w_uc[order]
    ends = _tie_ends(s)
    cum = np.cumsum(w)[ends]
    atoms = s[ends]
    totals = w.sum() + w_all
    if not signed:
        pos = np.searchsorted(cum, _target(level, totals), side="left")
        out = np.full(len(w_all), math.inf)
        ok = pos < len(cum)
        out[ok] = atoms[pos[ok]]
        return out
    out = np.empty(len(w_all))
    for i, t in enumerate(totals):
        if t == 0:
            raise ZeroDivisionError("weight normalization singular")
        hit = np.flatnonzero(cum / t >= _target(level, 1.0))
        out[i] = atoms[hit[0]] if len(hit) else math.inf
    return out


def pcp_from_weights(scores_uc, w_uc, w_all, alpha: float, beta: float = 0.005,
                     signed: bool = False) -> CalibratedThreshold:
    """PCP threshold from raw ingredients (see ``pcp_calibrate``)."""
    _check_alpha(alpha)
    if not 0 < beta < alpha:
        raise ValueError("beta must lie in (0, alpha)")
    level = 1 - alpha + beta
    q = np.sort(pcp_thresholds(scores_uc, w_uc, w_all, level, signed))
    # +inf entries are legitimate atoms of the per-sample distribution
    k = cp_rank(len(q), beta)
    value = math.inf if k > len(q) else float(q[k - 1])
    return CalibratedThreshold(value, PCP, level)


def pcp_calibrate(dataset, splits, sf, weight_fn, alpha: float, beta: float = 0.005,
                  signed: bool = False) -> CalibratedThreshold:
    """Privileged conformal prediction.

    For every calibration sample i, corrupted or not, a weighted threshold
    at level 1 - alpha + beta is computed over the uncorrupted calibration
    scores with w(Z_i) as the test-side weight. The result is the
    ceil((|cal| + 1)(1 - beta))-th smallest of these.

    ``weight_fn`` maps an (n, d_z) array to n weights.
    """
    cal, _ = _cal_parts(dataset, splits)
    w_all = np.asarray(weight_fn(dataset.Z[cal]), dtype=float).reshape(-1)
    keep = ~dataset.m[cal]
    scores = sf.scores(dataset.X[cal[keep]], dataset.y_obs[cal[keep]])
    return pcp_from_weights(scores, w_all[keep], w_all, alpha, beta, signed)


def naive_impute_calibrate(dataset, splits, sf, g_hat, alpha: float) -> CalibratedThreshold:
    """CP after replacing corrupted calibration labels with g_hat(x, z)."""
    cal = np.asarray(splits.cal, dtype=int)
    y = dataset.y_obs[cal].copy()
    bad = dataset.m[cal]
    if bad.any():
        y[bad] = g_hat(dataset.X[cal[bad]], dataset.Z[cal[bad]])
    return cp_threshold(sf.scores(dataset.X[cal], y), alpha, NAIVE_IMPUTE)


# -- uncertain imputation ----------------------------------------------------

EXACT_Z = "EXACT_Z"
KMEANS = "KMEANS"
LINEAR_BIN = "LINEAR_BIN"
MARGINAL = "MARGINAL"
SAMPLER_KINDS = (EXACT_Z, KMEANS, LINEAR_BIN, MARGINAL)


class ErrorSampler:
    """Draws reference errors from the pool routed to by z.

    ``router`` maps an (n, d_z) array to n integer pool ids.
    """

    def __init__(self, kind, pools, router):
        if kind not in SAMPLER_KINDS:
            raise ValueError(f"unknown sampler kind {kind!r}")
        self.kind = kind
        self.pools = {int(k): np.asarray(v, dtype=float) for k, v in pools.items()}
        if not self.pools or any(len(v) == 0 for v in self.pools.values()):
            raise ValueError("empty error pool")
        self.router = router

    def route(self, Z) -> np.ndarray:
        return np.asarray(self.router(np.atleast_2d(np.asarray(Z, dtype=float))), dtype=int)

    def draw(self, Z, rng) -> np.ndarray:
        """One error per row of Z, uniform over the routed pool."""
        ids = self.route(Z)
        out = np.empty(len(ids))
        for k in np.unique(ids):
            pool = self.pools.get(int(k))
            if pool is None:
                raise ValueError("empty error pool")
            sel = ids == k
            out[sel] = pool[rng.integers(0, len(pool), size=int(sel.sum()))]
        return out

    @classmethod
    def from_router(cls, ref_z, ref_e, router, kind=KMEANS):
        """Pools keyed by a caller-supplied router; every routed id needs errors."""
        ids = np.asarray(router(np.atleast_2d(ref_z)), dtype=int)
        ref_e = np.asarray(ref_e, dtype=float)
        pools = {int(k): ref_e[ids == k] for k in np.unique(ids)}
        return cls(kind, pools, router)


def _merge_empty(pools, centers, k):
    """Send every id without errors to the nearest id that has some."""
    full = [j for j in range(k) if len(pools.get(j, ())) > 0]
    if not full:
        raise ValueError("empty error pool")
    remap = {}
    for j in range(k):
        if j in full:
            remap[j] = j
        else:
            d = [np.sum((np.atleast_1d(centers[j]) - np.atleast_1d(centers[f])) ** 2) for f in full]
            remap[j] = full[int(np.argmin(d))]
    return remap


def build_error_sampler(kind, ref_z, ref_e, train_z=None, train_y=None, k: int = 8, seed: int = 0,
                        bin_z=None) -> ErrorSampler:
    """Build an error sampler from reference (z, error) pairs.

    KMEANS clusters ``train_z``; LINEAR_BIN regresses ``train_y`` on
    ``train_z`` and cuts the predictions at ``bin_z`` (all reference PIs,
    labelled or not; defaults to ``ref_z``) into ``k`` equal-count bins;
    MARGINAL uses a single pool; EXACT_Z pools errors of identical z.
    """
    from .models import fit_kmeans, fit_linear

    ref_z = np.atleast_2d(np.asarray(ref_z, dtype=float))
    ref_e = np.asarray(ref_e, dtype=float).reshape(-1)
    if len(ref_e) == 0:
        raise ValueError("empty error pool")
    if ref_z.shape[0] != len(ref_e):
        ref_z = ref_z.reshape(len(ref_e), -1)

    if kind == MARGINAL:
        return ErrorSampler(MARGINAL, {0: ref_e}, lambda Z: np.zeros(len(Z), dtype=int))

    if kind == EXACT_Z:
        keys = {}
        ids = np.empty(len(ref_e), dtype=int)
        for i, row in enumerate(ref_z):
            ids[i] = keys.setdefault(row.tobytes(), len(keys))
        pools = {j: ref_e[ids == j] for j in range(len(keys))}

        def route_exact(Z):
            out = []
            for row in np.asarray(Z, dtype=float):
                key = row.tobytes()
                if key not in keys:
                    raise KeyError("z not present in the reference set")
                out.append(keys[key])
            return np.array(out, dtype=int)

        return ErrorSampler(EXACT_Z, pools, route_exact)

    if kind == KMEANS:
        if train_z is None:
            raise ValueError("KMEANS needs training Z")
        km = fit_kmeans(train_z, k, seed=seed)
        ids = km.assign(ref_z)
        pools = {j: ref_e[ids == j] for j in range(k)}
        remap = _merge_empty(pools, km.centroids, k)
        lut = np.array([remap[j] for j in range(k)])
        return ErrorSampler(KMEANS, {j: pools[j] for j in set(remap.values())}, lambda Z: lut[km.assign(Z)])

    if kind == LINEAR_BIN:
        if train_z is None or train_y is None:
            raise ValueError("LINEAR_BIN needs training Z and y")
        lin = fit_linear(train_z, train_y)
        pred = lin.predict(ref_z if bin_z is None else np.atleast_2d(bin_z))
        edges = np.quantile(pred, np.linspace(0, 1, k + 1)[1:-1])

        def bin_of(Z):
            return np.searchsorted(edges, lin.predict(Z), side="right")

        ids = bin_of(ref_z)
        pools = {j: ref_e[ids == j] for j in range(k)}
        mids = np.concatenate([[pred.min()], edges, [pred.max()]])
        centers = 0.5 * (mids[:-1] + mids[1:])
        remap = _merge_empty(pools, centers, k)
        lut = np.array([remap[j] for j in range(k)])
        return ErrorSampler(LINEAR_BIN, {j: pools[j] for j in set(remap.values())}, lambda Z: lut[bin_of(Z)])

    raise ValueError(f"unknown sampler kind {kind!r}")


def reference_errors(dataset, splits, g_hat):
    """(z, y - g_hat(x, z)) over uncorrupted reference samples.

    Corrupted labels may be missing, so they contribute no error.
    """
    ref = np.asarray(splits.ref, dtype=int)
    ref = ref[~dataset.m[ref]]
    e = dataset.y_obs[ref] - g_hat(dataset.X[ref], dataset.Z[ref])
    return dataset.Z[ref], e


def ui_labels(dataset, splits, g_hat, sampler: ErrorSampler, rng) -> np.ndarray:
    """Calibration labels with corrupted entries replaced by g_hat + sampled error."""
    cal = np.asarray(splits.cal, dtype=int)
    y = dataset.y_obs[cal].copy()
    bad = dataset.m[cal]
    if bad.any():
        idx = cal[bad]
        y[bad] = g_hat(dataset.X[idx], dataset.Z[idx]) + sampler.draw(dataset.Z[idx], rng)
    return y


def ui_calibrate(dataset, splits, sf, g_hat, sampler: ErrorSampler, alpha: float, rng) -> CalibratedThreshold:
    """Uncertain imputation followed by plain CP over the whole calibration set."""
    if len(splits.ref) == 0:
        raise ValueError("UI needs a non-empty reference split")
    cal = np.asarray(splits.cal, dtype=int)
    y = ui_labels(dataset, splits, g_hat, sampler, rng)
    return cp_threshold(sf.scores(dataset.X[cal], y), alpha, UI)


# -- triply robust -----------------------------------------------------------

def triply_robust(sf_naive, sf_pcp, sf_ui, t_naive, t_pcp, t_ui, x_test) -> PredictionSet:
    """Union of the naive-CP, PCP and UI sets at one test point."""
    parts = [invert(sf, x_test, _value(t), _name(t, name))
             for sf, t, name in ((sf_naive, t_naive, NAIVE_CP), (sf_pcp, t_pcp, PCP), (sf_ui, t_ui, UI))]
    out = set_union(parts)
    if sf_naive is sf_pcp is sf_ui:
        top = max(_value(t) for t in (t_naive, t_pcp, t_ui))
        assert out == invert(sf_naive, x_test, top), "union of nested sets must be the widest"
    return out


def triply_bounds(sfs, thresholds, X):
    """Per-component (lo, hi) interval arrays for rows of X."""
    return [sf.bounds(X, _value(t)) for sf, t in zip(sfs, thresholds)]


def union_covers(parts, y) -> np.ndarray:
    """Membership of y in the union of per-component intervals, per row."""
    y = np.asarray(y, dtype=float)
    out = np.zeros(y.shape, dtype=bool)
    for lo, hi in parts:
        out |= (y >= lo) & (y <= hi)
    return out


def union_length(parts) -> np.ndarray:
    """Per-row Lebesgue measure of the union of up to a few intervals."""
    n = len(parts[0][0])
    out = np.empty(n)
    for i in range(n):
        out[i] = PredictionSet([(lo[i], hi[i]) for lo, hi in parts]).length
    return out


def _value(t):
    return t.value if isinstance(t, CalibratedThreshold) else float(t)


def _name(t, default):
    return t.method if isinstance(t, CalibratedThreshold) else default


# -- weights -----------------------------------------------------------------

def weights_from_probs(p_uncorrupted, marginal_uncorrupted: float) -> np.ndarray:
    """w(z) = P(M = 0) / P(M = 0 | z)."""
    p = np.asarray(p_uncorrupted, dtype=float)
    if np.any(p <= 0):
        raise ValueError("P(M = 0 | z) must be positive")
    return marginal_uncorrupted / p
