"""Experiment orchestration: repeated random splits, per-method coverage,
constant-delta sweeps, region grids and the oracle/degenerate matrix."""

from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import calibration as cal
from . import models, synth, weights
from .data import DataError, coverage_report, read_csv, split, standardize
from .scores import cqr

METHODS = ("NAIVE_CP", "WCP_TRUE", "PCP_TRUE", "PCP_EST", "NAIVE_IMPUTE", "UI", "TRIPLY", "CLEAN_CP")
NEEDS_PARAMS = {"WCP_TRUE", "PCP_TRUE"}
G_HATS = ("LINEAR", "TRUE_MEAN")
SAMPLERS = cal.SAMPLER_KINDS + ("NOISE_BAND",)

# fixed test point for region grids (raw units)
REGION_X = (2.6752, 1.2141, 2.0997, 4.4819, 3.9244, 4.1068, 4.9509, 1.9368, 4.8397, 1.6686)
REGION_Z = (-2.9365, -3.4784, 1.3291)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    kind: str = "under"
    n: int = 30000
    data_seed: int = 0
    csv: str | None = None
    params: str | None = None  # JSON sidecar for CSV sources
    methods: tuple = ("NAIVE_CP", "PCP_TRUE", "PCP_EST", "NAIVE_IMPUTE", "UI", "TRIPLY")
    alpha: float = 0.1
    beta: float = 0.005
    repeats: int = 30
    seed: int = 0
    hyper: dict = field(default_factory=dict)
    sampler: str = cal.LINEAR_BIN
    clusters: int = 8
    g_hat: str = "LINEAR"
    workers: int = 1
    # sweeps
    deltas: tuple = (-1.5, -1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0)
    shape: str = weights.UNIFORM
    delta_min_range: tuple = (-3.0, 3.0)
    delta_max_range: tuple = (-3.0, 3.0)
    grid: tuple = (15, 15)
    draws: int = 100_000
    band: float = 0.0
    x_test: tuple = REGION_X
    z_test: tuple = REGION_Z

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if not 0 < self.beta < self.alpha:
            raise ConfigError("beta must lie in (0, alpha)")
        if int(self.repeats) < 1:
            raise ConfigError("repeats must be at least 1")
        if self.csv is None and self.kind.upper() not in synth.KINDS:
            raise ConfigError(f"unknown generator kind {self.kind!r}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}")
        if self.sampler not in SAMPLERS:
            raise ConfigError(f"unknown sampler {self.sampler!r}")
        if self.g_hat not in G_HATS:
            raise ConfigError(f"unknown g_hat {self.g_hat!r}")
        if not self.deltas:
            raise ConfigError("delta grid must be non-empty")
        if min(self.grid) < 1:
            raise ConfigError("grid must be non-empty")
        try:
            models.Hyper.from_dict(self.hyper)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        d = dict(d)
        src = d.pop("dataset", None)
        if src is not None:
            for key in ("kind", "n", "csv", "params"):
                if key in src:
                    d[key] = src[key]
            if "seed" in src:
                d["data_seed"] = src["seed"]
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        for key in ("methods", "deltas", "delta_min_range", "delta_max_range", "grid", "x_test", "z_test"):
            if key in d:
                d[key] = tuple(d[key])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc


SweepConfig = ExperimentConfig


# -- data and per-repeat fitting ------------------------------------------------

def load_data(cfg: ExperimentConfig):
    """Return the raw dataset (with params attached when known)."""
    if cfg.csv is None:
        ds, _ = synth.generate(int(cfg.n), int(cfg.data_seed), cfg.kind.upper())
        return ds
    params = None
    if cfg.params is not None:
        try:
            params = synth.GeneratorParams.from_json(Path(cfg.params).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read generator parameters: {exc}") from exc
    try:
        return read_csv(cfg.csv, params=params)
    except OSError as exc:
        raise DataError(f"cannot read data: {exc}") from exc


def repeat_seed(master: int, repeat: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master), int(repeat)])


@dataclass
class Context:
    raw: object
    ds: object
    tr: object
    splits: object  # train / val / full calibration / test
    ui_splits: object  # calibration halved into reference and calibration
    sf: object
    rng: np.random.Generator
    hyper: models.Hyper
    cfg: ExperimentConfig
    cache: dict = field(default_factory=dict)

    @property
    def params(self):
        return self.raw.params

    @property
    def train_val(self):
        return np.concatenate([self.splits.train, self.splits.val])


def fit_context(cfg: ExperimentConfig, raw, repeat: int) -> Context:
    ss = repeat_seed(cfg.seed, repeat)
    split_seed, rng_seed = ss.generate_state(2)
    ui_splits = split(raw.n, with_ref=True, seed=int(split_seed))
    splits = replace(ui_splits, cal=np.concatenate([ui_splits.ref, ui_splits.cal]),
                     ref=np.array([], dtype=int))
    ds, tr = standardize(raw, splits.train)
    if ds.y_clean is None:
        raise DataError("clean test labels are required for evaluation")
    hyper = models.Hyper.from_dict(cfg.hyper)
    tr_ok = splits.train[~ds.m[splits.train]]
    va_ok = splits.val[~ds.m[splits.val]]
    pair = models.fit_quantile_pair(ds.X[tr_ok], ds.y_obs[tr_ok], cfg.alpha, hyper, ds.X[va_ok], ds.y_obs[va_ok])
    return Context(raw, ds, tr, splits, ui_splits, cqr(pair), np.random.default_rng(rng_seed), hyper, cfg)


def _need_params(ctx, what):
    if ctx.params is None:
        raise DataError(f"{what} needs generator parameters")
    return ctx.params


def true_weights(ctx, idx) -> np.ndarray:
    return synth.true_weight(_need_params(ctx, "true weights"), ctx.raw.Z[idx])


def estimated_weights(ctx, idx) -> np.ndarray:
    if "logit" not in ctx.cache:
        tv = ctx.train_val
        ctx.cache["logit"] = models.fit_logistic(ctx.ds.Z[tv], ctx.ds.m[tv], ctx.hyper)
        ctx.cache["marginal"] = float(1.0 - ctx.ds.m[tv].mean())
    p0 = ctx.cache["logit"].predict_proba(ctx.ds.Z[idx])
    return cal.weights_from_probs(p0, ctx.cache["marginal"])


def g_hat(ctx):
    """Label imputer on standardized (x, z)."""
    if "g" in ctx.cache:
        return ctx.cache["g"]
    ds, tr = ctx.ds, ctx.tr
    if ctx.cfg.g_hat == "TRUE_MEAN":
        params = _need_params(ctx, "TRUE_MEAN imputer")

        def g(X, Z):
            raw = synth.mean_y(params, X * tr.x_scale + tr.x_mean, Z * tr.z_scale + tr.z_mean)
            return tr.transform_y(raw)
    else:
        tv = ctx.train_val
        tv = tv[~ds.m[tv]]
        lin = models.fit_linear(np.hstack([ds.X[tv], ds.Z[tv]]), ds.y_obs[tv])

        def g(X, Z):
            return lin.predict(np.hstack([X, Z]))
    ctx.cache["g"] = g
    return g


def error_sampler(ctx):
    if "sampler" in ctx.cache:
        return ctx.cache["sampler"]
    ds, cfg = ctx.ds, ctx.cfg
    ref_z, ref_e = cal.reference_errors(ds, ctx.ui_splits, g_hat(ctx))
    tv = ctx.train_val
    if cfg.sampler == "NOISE_BAND":
        # pools keyed by the generator's noise-scale band of Z'
        params, tr = _need_params(ctx, "NOISE_BAND sampler"), ctx.tr

        def band(Z):
            zp = (Z * tr.z_scale + tr.z_mean) @ params.beta2
            return np.where(zp < -3, 0, np.where(zp <= 1, 1, 2))

        s = cal.ErrorSampler.from_router(ref_z, ref_e, band)
    elif cfg.sampler == cal.LINEAR_BIN:
        tv_ok = tv[~ds.m[tv]]
        s = cal.build_error_sampler(cal.LINEAR_BIN, ref_z, ref_e, ds.Z[tv_ok], ds.y_obs[tv_ok], cfg.clusters,
                                    bin_z=ds.Z[ctx.ui_splits.ref])
    else:
        s = cal.build_error_sampler(cfg.sampler, ref_z, ref_e, ds.Z[tv], k=cfg.clusters, seed=int(cfg.seed))
    ctx.cache["sampler"] = s
    return s


def _uc_scores(ctx, idx):
    idx = idx[~ctx.ds.m[idx]]
    return idx, ctx.sf.scores(ctx.ds.X[idx], ctx.ds.y_obs[idx])


def method_thresholds(ctx, method):
    """Threshold(s) for one method: a float, or an array aligned with the test split."""
    ds, s, cfg = ctx.ds, ctx.splits, ctx.cfg
    a = cfg.alpha
    if method == "NAIVE_CP":
        return cal.naive_cp(ds, s, ctx.sf, a).value
    if method == "CLEAN_CP":
        return cal.cp_threshold(ctx.sf.scores(ds.X[s.cal], ds.y_clean[s.cal]), a).value
    if method == "WCP_TRUE":
        uc, sc = _uc_scores(ctx, s.cal)
        return cal.pcp_thresholds(sc, true_weights(ctx, uc), true_weights(ctx, s.test), 1 - a)
    if method in ("PCP_TRUE", "PCP_EST"):
        fn = true_weights if method == "PCP_TRUE" else estimated_weights
        w = fn(ctx, s.cal)
        keep = ~ds.m[s.cal]
        _, sc = _uc_scores(ctx, s.cal)
        return cal.pcp_from_weights(sc, w[keep], w, a, cfg.beta).value
    if method == "NAIVE_IMPUTE":
        return cal.naive_impute_calibrate(ds, s, ctx.sf, g_hat(ctx), a).value
    if method == "UI":
        if "ui" not in ctx.cache:
            ctx.cache["ui"] = cal.ui_calibrate(ds, ctx.ui_splits, ctx.sf, g_hat(ctx), error_sampler(ctx), a, ctx.rng).value
        return ctx.cache["ui"]
    if method == "TRIPLY":
        parts = [method_thresholds(ctx, m) for m in ("NAIVE_CP", "PCP_EST", "UI")]
        # one shared score function: the union is the set at the largest threshold
        return max(parts)
    raise ConfigError(f"unknown method {method!r}")


def evaluate(ctx, method, threshold, repeat):
    ds, test = ctx.ds, ctx.splits.test
    lo, hi = ctx.sf.bounds(ds.X[test], threshold)
    rep = coverage_report(method, repeat, lo, hi, ds.y_clean[test])
    return replace(rep, mean_length=rep.mean_length * ctx.tr.y_scale)


def run_repeat(cfg: ExperimentConfig, raw, repeat: int):
    ctx = fit_context(cfg, raw, repeat)
    if any(m in NEEDS_PARAMS for m in cfg.methods):
        _need_params(ctx, "true-weight methods")
    return [evaluate(ctx, m, method_thresholds(ctx, m), repeat) for m in cfg.methods]


def _pool_map(fn, cfg, items):
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


class _Task:
    """Picklable per-repeat callable."""

    def __init__(self, fn, cfg, raw):
        self.fn, self.cfg, self.raw = fn, cfg, raw

    def __call__(self, repeat):
        return self.fn(self.cfg, self.raw, repeat)


def run_experiment(cfg: ExperimentConfig, raw=None):
    """All configured methods over ``cfg.repeats`` random splits.

    Returns (reports, aggregate rows).
    """
    raw = load_data(cfg) if raw is None else raw
    if raw.params is None and any(m in NEEDS_PARAMS for m in cfg.methods):
        raise DataError("true-weight methods need generator parameters")
    per = _pool_map(_Task(run_repeat, cfg, raw), cfg, range(cfg.repeats))
    reports = [r for rows in per for r in rows]
    return reports, aggregate(reports)


def aggregate(reports):
    """Mean and standard error (sd / sqrt(repeats)) per method, first-seen order."""
    order = list(dict.fromkeys(r.method for r in reports))
    out = []
    for m in order:
        rs = [r for r in reports if r.method == m]
        cov = np.array([r.coverage for r in rs])
        ln = np.array([r.mean_length for r in rs])
        fin = ln[np.isfinite(ln)]
        k = len(rs)
        out.append({
            "method": m, "repeats": k,
            "coverage": float(cov.mean()),
            "coverage_se": float(cov.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0,
            "mean_length": float(fin.mean()) if len(fin) else math.inf,
            "length_se": float(fin.std(ddof=1) / math.sqrt(len(fin))) if len(fin) > 1 else 0.0,
            "n_infinite": int(sum(r.n_infinite for r in rs)),
        })
    return out


# -- constant-delta sweep ------------------------------------------------------

def sweep_repeat(cfg, raw, repeat):
    ctx = fit_context(cfg, raw, repeat)
    s, ds = ctx.splits, ctx.ds
    w = true_weights(ctx, s.cal)
    keep = ~ds.m[s.cal]
    _, sc = _uc_scores(ctx, s.cal)
    rows = []
    for d in cfg.deltas:
        wd = w + d
        t = cal.pcp_from_weights(sc, wd[keep], wd, cfg.alpha, cfg.beta, signed=bool(np.any(wd <= 0))).value
        rep = evaluate(ctx, "PCP", t, repeat)
        rows.append({"delta": float(d), "repeat": repeat, "coverage": rep.coverage,
                     "mean_length": rep.mean_length, "n_infinite": rep.n_infinite})
    # lower end of the valid interval: -W_{n+1} / (n + 1) with the mean test weight
    crit = -(w[keep].sum() + w.mean()) / (keep.sum() + 1)
    return rows, float(crit)


def sweep_constant_delta(cfg: ExperimentConfig, raw=None):
    """PCP coverage with weights w + delta for every delta in the grid.

    Returns (per-repeat rows, per-delta summary rows, mean critical delta).
    """
    raw = load_data(cfg) if raw is None else raw
    if raw.params is None:
        raise DataError("delta sweeps need generator parameters")
    per = _pool_map(_Task(sweep_repeat, cfg, raw), cfg, range(cfg.repeats))
    rows = [r for rs, _ in per for r in rs]
    crit = float(np.mean([c for _, c in per]))
    summary = []
    for d in cfg.deltas:
        cov = np.array([r["coverage"] for r in rows if r["delta"] == float(d)])
        summary.append({"delta": float(d), "coverage": float(cov.mean()),
                        "coverage_se": float(cov.std(ddof=1) / math.sqrt(len(cov))) if len(cov) > 1 else 0.0})
    return rows, summary, crit


# -- region grid ---------------------------------------------------------------

@dataclass
class RegionResult:
    predicate: weights.RegionGrid
    empirical: np.ndarray  # labels from conditional coverage
    cov_true: float
    cov_hat: np.ndarray
    boundary: object  # weights.Boundary for the mean normalized error

    def agreement(self):
        """Fraction of cells, boundary and undefined excluded, where both verdicts agree."""
        p, e = self.predicate.labels, self.empirical
        mask = np.isin(p, (weights.VALID, weights.INVALID)) & np.isin(e, (weights.VALID, weights.INVALID))
        if not mask.any():
            return math.nan, 0
        return float((p[mask] == e[mask]).mean()), int(mask.sum())


def region_inputs(cfg, raw):
    """Fixed calibration draw (repeat 0) and fixed test point, standardized."""
    if raw.params is None:
        raise DataError("generator required")
    ctx = fit_context(cfg, raw, 0)
    uc, sc = _uc_scores(ctx, ctx.splits.cal)
    order = np.argsort(sc, kind="stable")
    x = np.asarray(cfg.x_test, dtype=float)[None, :]
    z = np.asarray(cfg.z_test, dtype=float)[None, :]
    w_test = float(synth.true_weight(raw.params, z)[0])
    w = np.append(true_weights(ctx, uc)[order], w_test)
    rng = np.random.default_rng(repeat_seed(cfg.seed, 10_000))
    y = ctx.tr.transform_y(synth.sample_y_given_xz(raw.params, np.repeat(x, cfg.draws, 0), np.repeat(z, cfg.draws, 0), rng))
    y_scores = np.sort(ctx.sf.scores(np.repeat(ctx.tr.transform_x(x), cfg.draws, 0), y))
    return sc[order], w, y_scores


def sweep_region(cfg: ExperimentConfig, raw=None) -> RegionResult:
    """Predicate grid against conditional coverage at one fixed test point.

    A cell is empirically valid when coverage with perturbed weights is at
    least coverage with true weights; cells whose two coverages differ by
    less than ``cfg.band`` (but are not equal) are unresolved at that
    tolerance and marked boundary.
    """
    raw = load_data(cfg) if raw is None else raw
    scores, w, y_scores = region_inputs(cfg, raw)
    level = 1 - cfg.alpha
    grid = weights.region_grid(w, cfg.alpha, cfg.delta_min_range, cfg.delta_max_range, cfg.grid, cfg.shape, cfg.seed)
    n = len(scores)

    def cov(t):
        return np.searchsorted(y_scores, t, side="right") / len(y_scores)

    q_true = cal.signed_weighted_threshold(scores, w[:n], w[n], level)
    c_true = cov(q_true)
    emp = np.full(grid.labels.shape, weights.UNDEFINED, dtype=object)
    c_hat = np.full(grid.labels.shape, np.nan)
    for (i, j), dt in grid.delta_tilde.items():
        d = grid.delta_min[i] + dt * (grid.delta_max[j] - grid.delta_min[i])
        wp = w + d
        try:
            q = cal.signed_weighted_threshold(scores, wp[:n], wp[n], level)
        except ZeroDivisionError:
            emp[i, j] = weights.BOUNDARY
            continue
        c = cov(q)
        c_hat[i, j] = c
        diff = c - c_true
        if diff != 0 and abs(diff) < cfg.band:
            emp[i, j] = weights.BOUNDARY
        else:
            emp[i, j] = weights.VALID if diff >= 0 else weights.INVALID
    mean_dt = np.mean(list(grid.delta_tilde.values()), axis=0) if grid.delta_tilde else np.zeros(len(w))
    lo, hi = cfg.delta_min_range[0], cfg.delta_max_range[1]
    prof = weights.WeightErrorProfile.from_normalized(w, mean_dt, lo, hi)
    return RegionResult(grid, emp, float(c_true), c_hat, weights.theoretical_boundary(prof, cfg.alpha))


# -- oracle / degenerate matrix -----------------------------------------------

ORACLE, DEGENERATE = "oracle", "degenerate"
TRIPLY_CELLS = tuple(itertools.product((ORACLE, DEGENERATE), repeat=3))


def _union_length(lo, hi):
    """Per-row measure of a union of k intervals given as (n, k) arrays."""
    empty = lo > hi
    lo = np.where(empty, np.inf, lo)
    hi = np.where(empty, -np.inf, hi)
    order = np.argsort(lo, axis=1)
    lo = np.take_along_axis(lo, order, 1)
    hi = np.take_along_axis(hi, order, 1)
    total = np.zeros(lo.shape[0])
    reach = np.full(lo.shape[0], -np.inf)
    for k in range(lo.shape[1]):
        start = np.maximum(lo[:, k], reach)
        with np.errstate(invalid="ignore"):
            seg = hi[:, k] - start
        total += np.where(seg > 0, seg, 0.0)
        reach = np.maximum(reach, hi[:, k])
    return total


def triply_repeat(cfg, raw, repeat):
    ctx = fit_context(cfg, raw, repeat)
    params = _need_params(ctx, "the oracle matrix")
    ds, tr, s, a = ctx.ds, ctx.tr, ctx.splits, cfg.alpha
    test = s.test
    X_raw_test = raw.X[test]
    y = ds.y_clean[test]
    rng = np.random.default_rng(repeat_seed(cfg.seed, 20_000 + repeat))

    # QR component: its own set, uncalibrated
    q_or = models.oracle_predict(models.OracleModel(models.QR_ORACLE, params, ctx.hyper.oracle_draws),
                                 X_raw_test, None, a, rng)
    qr_sets = {ORACLE: (tr.transform_y(q_or[:, 0]), tr.transform_y(q_or[:, 1])),
               DEGENERATE: (np.zeros(len(test)), np.zeros(len(test)))}

    # PCP component on the fitted quantile model
    p_true = synth.corruption_prob(params, raw.Z[s.cal])
    keep = ~ds.m[s.cal]
    _, sc = _uc_scores(ctx, s.cal)
    pcp_t = {}
    for name, p in ((ORACLE, p_true), (DEGENERATE, 0.5 * p_true)):
        w = cal.weights_from_probs(1 - p, 1 - p.mean())
        pcp_t[name] = cal.pcp_from_weights(sc, w[keep], w, a, cfg.beta).value

    # UI component: impute by a draw from Y | X, Z or by 0
    u = ctx.ui_splits
    bad = u.cal[ds.m[u.cal]]
    ui_t = {}
    for name in (ORACLE, DEGENERATE):
        y_cal = ds.y_obs[u.cal].copy()
        if name == ORACLE:
            draw = synth.sample_y_given_xz(params, raw.X[bad], raw.Z[bad], rng)
            y_cal[ds.m[u.cal]] = tr.transform_y(draw)
        else:
            y_cal[ds.m[u.cal]] = 0.0
        ui_t[name] = cal.cp_threshold(ctx.sf.scores(ds.X[u.cal], y_cal), a).value

    rows = []
    for qr_k, pcp_k, ui_k in TRIPLY_CELLS:
        parts = [qr_sets[qr_k], ctx.sf.bounds(ds.X[test], pcp_t[pcp_k]), ctx.sf.bounds(ds.X[test], ui_t[ui_k])]
        covered = cal.union_covers(parts, y)
        comp = [float(((y >= lo) & (y <= hi)).mean()) for lo, hi in parts]
        lo = np.column_stack([p[0] for p in parts])
        hi = np.column_stack([p[1] for p in parts])
        length = _union_length(lo, hi) * tr.y_scale
        fin = np.isfinite(length)
        cov = float(covered.mean())
        rows.append({
            "qr": qr_k, "pcp": pcp_k, "ui": ui_k, "repeat": repeat, "coverage": cov,
            "mean_length": float(length[fin].mean()) if fin.any() else math.inf,
            "n_infinite": int((~fin).sum()),
            "cov_qr": comp[0], "cov_pcp": comp[1], "cov_ui": comp[2],
            "dominates": bool(np.all(covered >= np.column_stack(
                [(y >= lo_) & (y <= hi_) for lo_, hi_ in parts]).any(axis=1)) and cov >= max(comp)),
        })
    return rows


def triply_matrix(cfg: ExperimentConfig, raw=None):
    """All eight oracle/degenerate combinations of (QR, PCP weights, imputer).

    Returns (per-repeat rows, per-cell summary rows).
    """
    raw = load_data(cfg) if raw is None else raw
    if raw.params is None:
        raise DataError("the oracle matrix needs generator parameters")
    per = _pool_map(_Task(triply_repeat, cfg, raw), cfg, range(cfg.repeats))
    rows = [r for rs in per for r in rs]
    summary = []
    for qr_k, pcp_k, ui_k in TRIPLY_CELLS:
        sel = [r for r in rows if (r["qr"], r["pcp"], r["ui"]) == (qr_k, pcp_k, ui_k)]
        cov = np.array([r["coverage"] for r in sel])
        ln = np.array([r["mean_length"] for r in sel])
        summary.append({"qr": qr_k, "pcp": pcp_k, "ui": ui_k, "coverage": float(cov.mean()),
                        "coverage_se": float(cov.std(ddof=1) / math.sqrt(len(cov))) if len(cov) > 1 else 0.0,
                        "mean_length": float(ln[np.isfinite(ln)].mean()) if np.isfinite(ln).any() else math.inf,
                        "dominates_all": all(r["dominates"] for r in sel)})
    return rows, summary


# -- output ------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows(rows, path, columns=None):
    rows = list(rows)
    columns = columns or (list(rows[0]) if rows else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(columns)
        for r in rows:
            out.writerow([_fmt(r[c]) for c in columns])


def write_metrics(reports, path):
    write_rows(({"method": r.method, "repeat": r.repeat_id, "coverage": r.coverage,
                 "mean_length": r.mean_length, "n_infinite": r.n_infinite} for r in reports),
               path, ["method", "repeat", "coverage", "mean_length", "n_infinite"])
