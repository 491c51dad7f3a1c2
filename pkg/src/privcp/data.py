"""Core records shared by every module: datasets, splits, prediction sets
and coverage reports, plus CSV ingestion/emission."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np


class _Missing:
    """Sentinel for an unobserved (missing) label."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "MISSING"

    def __bool__(self):
        return False


MISSING = _Missing()
UNKNOWN = None


class DataError(ValueError):
    """Raised for malformed or inconsistent data."""


@dataclass(frozen=True)
class Sample:
    x: np.ndarray
    z: np.ndarray
    y_obs: object  # float or MISSING
    y_clean: object  # float or UNKNOWN
    m: bool


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented dataset.

    ``y_obs`` holds a float per row; entries where ``observed`` is False are
    MISSING and their numeric value is meaningless (stored as NaN). Noisy
    (non-missing) corruption keeps ``observed`` True with ``m`` True.
    ``y_clean`` is None when ground truth is unavailable.
    """

    X: np.ndarray
    Z: np.ndarray
    y_obs: np.ndarray
    observed: np.ndarray
    m: np.ndarray
    y_clean: np.ndarray | None = None
    standardized: bool = False
    params: object = None

    def __post_init__(self):
        n = self.X.shape[0]
        if self.X.ndim != 2 or self.Z.ndim != 2 or self.Z.shape[0] != n:
            raise DataError("X and Z must be 2-D with matching row counts")
        for name in ("y_obs", "observed", "m"):
            if getattr(self, name).shape != (n,):
                raise DataError(f"{name} must have shape ({n},)")
        if self.y_clean is not None and self.y_clean.shape != (n,):
            raise DataError(f"y_clean must have shape ({n},)")
        if np.any(~self.m & ~self.observed):
            raise DataError("uncorrupted samples must have an observed label")
        if self.y_clean is not None:
            clean = ~self.m & ~np.isnan(self.y_clean)
            if np.any(self.y_obs[clean] != self.y_clean[clean]):
                raise DataError("uncorrupted samples must have y_obs equal to y_clean")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d_x(self) -> int:
        return self.X.shape[1]

    @property
    def d_z(self) -> int:
        return self.Z.shape[1]

    def __len__(self):
        return self.n

    def sample(self, i: int) -> Sample:
        y_obs = float(self.y_obs[i]) if self.observed[i] else MISSING
        if self.y_clean is None or np.isnan(self.y_clean[i]):
            y_clean = UNKNOWN
        else:
            y_clean = float(self.y_clean[i])
        return Sample(self.X[i], self.Z[i], y_obs, y_clean, bool(self.m[i]))

    @property
    def samples(self) -> Iterator[Sample]:
        return (self.sample(i) for i in range(self.n))

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], **kwargs) -> "Dataset":
        if not samples:
            raise DataError("no samples")
        X = np.array([s.x for s in samples], dtype=float)
        Z = np.array([s.z for s in samples], dtype=float)
        observed = np.array([s.y_obs is not MISSING for s in samples])
        y_obs = np.array([s.y_obs if s.y_obs is not MISSING else np.nan for s in samples], dtype=float)
        m = np.array([bool(s.m) for s in samples])
        if all(s.y_clean is UNKNOWN for s in samples):
            y_clean = None
        else:
            y_clean = np.array([np.nan if s.y_clean is UNKNOWN else s.y_clean for s in samples], dtype=float)
        return cls(X, Z, y_obs, observed, m, y_clean, **kwargs)

    def labels_for_scoring(self) -> np.ndarray:
        """Observed labels; NaN where missing."""
        return np.where(self.observed, self.y_obs, np.nan)


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    val: np.ndarray
    cal: np.ndarray
    test: np.ndarray
    ref: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))

    def sizes(self) -> tuple[int, ...]:
        return tuple(len(a) for a in (self.train, self.val, self.cal, self.test, self.ref))


def split(n: int, fractions=(0.5, 0.1, 0.2, 0.2), with_ref: bool = False, seed: int = 0) -> SplitIndices:
    """Random train/val/cal/test partition.

    Sizes of val, cal and test are floor(n * fraction); train absorbs the
    remainder. With ``with_ref`` the calibration part is halved, the
    reference half receiving the ceiling.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 4 or any(f <= 0 for f in fractions):
        raise ValueError("fractions must be four positive reals")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    if n < 10:
        raise ValueError("n must be at least 10")
    n_val, n_cal, n_test = (int(math.floor(n * f + 1e-9)) for f in fractions[1:])
    n_train = n - n_val - n_cal - n_test
    if min(n_train, n_val, n_cal, n_test) < 1 or (with_ref and n_cal < 2):
        raise ValueError(f"n={n} too small to give every split at least one element")
    perm = np.random.default_rng(seed).permutation(n)
    train = perm[:n_train]
    val = perm[n_train:n_train + n_val]
    cal = perm[n_train + n_val:n_train + n_val + n_cal]
    test = perm[n_train + n_val + n_cal:]
    ref = np.array([], dtype=int)
    if with_ref:
        n_ref = (n_cal + 1) // 2
        ref, cal = cal[:n_ref], cal[n_ref:]
    return SplitIndices(train, val, cal, test, ref)


@dataclass(frozen=True)
class Standardizer:
    """Affine per-column transform fitted on one split."""

    x_mean: np.ndarray
    x_scale: np.ndarray
    z_mean: np.ndarray
    z_scale: np.ndarray
    y_mean: float
    y_scale: float

    def transform_y(self, y):
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_scale

    def inverse_y(self, y):
        return np.asarray(y, dtype=float) * self.y_scale + self.y_mean

    def transform_x(self, X):
        return (np.asarray(X, dtype=float) - self.x_mean) / self.x_scale

    def transform_z(self, Z):
        return (np.asarray(Z, dtype=float) - self.z_mean) / self.z_scale

    def inverse_interval(self, lo, hi):
        return self.inverse_y(lo), self.inverse_y(hi)


def _moments(a: np.ndarray):
    mean = a.mean(axis=0)
    sd = a.std(axis=0)
    # constant columns map to zero
    scale = np.where(sd > 0, sd, 1.0)
    return mean, scale


def standardize(dataset: Dataset, fit_on) -> tuple[Dataset, Standardizer]:
    """Zero-mean, unit-variance transform fitted on ``fit_on`` rows only.

    The label transform is fitted on the clean labels of the fitting rows
    where known, otherwise on the observed ones.
    """
    fit_on = np.asarray(fit_on, dtype=int)
    if fit_on.size == 0:
        raise ValueError("empty fit split")
    x_mean, x_scale = _moments(dataset.X[fit_on])
    z_mean, z_scale = _moments(dataset.Z[fit_on])
    y_fit = None
    if dataset.y_clean is not None:
        y_fit = dataset.y_clean[fit_on]
        y_fit = y_fit[~np.isnan(y_fit)]
    if y_fit is None or y_fit.size == 0:
        y_fit = dataset.y_obs[fit_on][dataset.observed[fit_on]]
    if y_fit.size == 0:
        y_mean, y_scale = 0.0, 1.0
    else:
        y_mean, y_scale = _moments(y_fit)
    tr = Standardizer(x_mean, x_scale, z_mean, z_scale, float(y_mean), float(y_scale))
    out = replace(
        dataset,
        X=tr.transform_x(dataset.X),
        Z=tr.transform_z(dataset.Z),
        y_obs=np.where(dataset.observed, tr.transform_y(dataset.y_obs), np.nan),
        y_clean=None if dataset.y_clean is None else tr.transform_y(dataset.y_clean),
        standardized=True,
    )
    return out, tr


class PredictionSet:
    """Union of disjoint closed intervals, normalized on construction."""

    __slots__ = ("intervals", "threshold_provenance")

    def __init__(self, intervals=(), threshold_provenance=None):
        self.intervals = _normalize(intervals)
        self.threshold_provenance = dict(threshold_provenance or {})

    @classmethod
    def empty(cls, provenance=None):
        return cls((), provenance)

    @classmethod
    def full(cls, provenance=None):
        return cls([(-math.inf, math.inf)], provenance)

    def __contains__(self, y) -> bool:
        return any(lo <= y <= hi for lo, hi in self.intervals)

    def contains(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape, dtype=bool)
        for lo, hi in self.intervals:
            out |= (y >= lo) & (y <= hi)
        return out

    @property
    def length(self) -> float:
        return float(sum(hi - lo for lo, hi in self.intervals))

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    def __eq__(self, other):
        return isinstance(other, PredictionSet) and self.intervals == other.intervals

    def __repr__(self):
        body = " U ".join(f"[{lo:g}, {hi:g}]" for lo, hi in self.intervals) or "{}"
        return f"PredictionSet({body})"


def _normalize(intervals):
    ivs = sorted((float(lo), float(hi)) for lo, hi in intervals if lo <= hi)
    out: list[tuple[float, float]] = []
    for lo, hi in ivs:
        # closed intervals sharing an endpoint merge
        if out and lo <= out[-1][1]:
            if hi > out[-1][1]:
                out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return tuple(out)


def set_union(sets: Sequence[PredictionSet]) -> PredictionSet:
    provenance = {}
    intervals = []
    for s in sets:
        intervals.extend(s.intervals)
        provenance.update(s.threshold_provenance)
    return PredictionSet(intervals, provenance)


@dataclass(frozen=True)
class CoverageReport:
    method: str
    repeat_id: int
    coverage: float
    mean_length: float
    n_test: int
    n_infinite: int = 0


def coverage_report(method, repeat_id, lo, hi, y) -> CoverageReport:
    """Empirical coverage and mean finite length of per-point intervals.

    Empty sets are encoded with lo > hi and have length 0.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    y = np.asarray(y, dtype=float)
    covered = (y >= lo) & (y <= hi)
    lengths = np.clip(hi - lo, 0.0, None)
    infinite = ~np.isfinite(lengths)
    n_inf = int(infinite.sum())
    mean_length = float(lengths[~infinite].mean()) if n_inf < len(y) else math.inf
    return CoverageReport(method, repeat_id, int(covered.sum()) / len(y), mean_length, len(y), n_inf)


# -- CSV ---------------------------------------------------------------------

def write_csv(dataset: Dataset, path) -> None:
    header = [f"x{j}" for j in range(dataset.d_x)] + [f"z{j}" for j in range(dataset.d_z)] + ["y", "y_obs", "m"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(dataset.n):
            y = "" if dataset.y_clean is None or np.isnan(dataset.y_clean[i]) else repr(float(dataset.y_clean[i]))
            y_obs = repr(float(dataset.y_obs[i])) if dataset.observed[i] else ""
            w.writerow([repr(float(v)) for v in dataset.X[i]] + [repr(float(v)) for v in dataset.Z[i]]
                       + [y, y_obs, int(dataset.m[i])])


def read_csv(path, params=None) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError("empty CSV")
    header, body = rows[0], rows[1:]
    x_cols = [i for i, h in enumerate(header) if h.startswith("x")]
    z_cols = [i for i, h in enumerate(header) if h.startswith("z")]
    try:
        iy, iobs, im = header.index("y"), header.index("y_obs"), header.index("m")
    except ValueError as exc:
        raise DataError("CSV header must contain y, y_obs and m columns") from exc
    if not x_cols or not z_cols:
        raise DataError("CSV must contain x* and z* columns")
    if [header[i] for i in x_cols] != [f"x{j}" for j in range(len(x_cols))] or \
            [header[i] for i in z_cols] != [f"z{j}" for j in range(len(z_cols))]:
        raise DataError("x*/z* columns must be numbered consecutively from 0")
    try:
        X = np.array([[float(r[i]) for i in x_cols] for r in body], dtype=float)
        Z = np.array([[float(r[i]) for i in z_cols] for r in body], dtype=float)
        y = np.array([float(r[iy]) if r[iy] != "" else np.nan for r in body], dtype=float)
        observed = np.array([r[iobs] != "" for r in body])
        y_obs = np.array([float(r[iobs]) if r[iobs] != "" else np.nan for r in body], dtype=float)
        m_raw = [r[im] for r in body]
    except (ValueError, IndexError) as exc:
        raise DataError(f"malformed CSV row: {exc}") from exc
    if any(v not in ("0", "1") for v in m_raw):
        raise DataError("m must be 0 or 1")
    m = np.array([v == "1" for v in m_raw])
    y_clean = None if np.all(np.isnan(y)) else y
    return Dataset(X.reshape(len(body), -1), Z.reshape(len(body), -1), y_obs, observed, m, y_clean, params=params)
