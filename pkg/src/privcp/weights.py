"""Closed-form validity predicates for weighted calibration run with
inaccurate weights, plus (delta_min, delta_max) region grids.

Conventions: ``w`` lists the true weights of the n calibration samples in
ascending score order followed by the test weight (its score atom sits at
+inf, so it is last). Partial sums are 1-based: ``W[k]`` is the sum of the
first k weights and ``W[0] = 0``.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .calibration import RTOL, _target, cp_rank

VALID = "valid"
INVALID = "invalid"
UNDEFINED = "undefined"
BOUNDARY = "boundary"

CP_GT_WCP = "k_cp > k_wcp"
CP_LT_WCP = "k_cp < k_wcp"
CP_EQ_WCP = "k_cp = k_wcp"


@dataclass(frozen=True)
class WeightErrorProfile:
    """True weights (test last) and additive errors.

    ``delta`` is a scalar for the constant-error case or a length n + 1
    vector with ``delta_min <= delta_i <= delta_max``.
    """

    w: np.ndarray
    delta: object = 0.0
    delta_min: float | None = None
    delta_max: float | None = None

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).reshape(-1)
        if len(w) < 2:
            raise ValueError("need at least one calibration weight and the test weight")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "w", w)
        d = np.asarray(self.delta, dtype=float)
        if d.ndim:
            if d.shape != w.shape:
                raise ValueError("delta must have one entry per weight")
            lo = float(d.min()) if self.delta_min is None else float(self.delta_min)
            hi = float(d.max()) if self.delta_max is None else float(self.delta_max)
            if np.any(d < lo) or np.any(d > hi):
                raise ValueError("delta outside [delta_min, delta_max]")
            object.__setattr__(self, "delta_min", lo)
            object.__setattr__(self, "delta_max", hi)
        object.__setattr__(self, "delta", d if d.ndim else float(d))

    @classmethod
    def from_normalized(cls, w, delta_tilde, delta_min, delta_max):
        dt = np.asarray(delta_tilde, dtype=float)
        d = np.clip(delta_min + dt * (delta_max - delta_min), delta_min, delta_max)  # rounding
        return cls(w, d, delta_min, delta_max)

    @property
    def n(self) -> int:
        return len(self.w) - 1

    @property
    def W(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.w)])

    @property
    def delta_vector(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.delta, dtype=float), self.w.shape).copy()

    @property
    def delta_tilde(self) -> np.ndarray:
        span = self.delta_max - self.delta_min
        if span <= 0:
            raise ValueError("delta_max must exceed delta_min")
        return np.clip((self.delta_vector - self.delta_min) / span, 0.0, 1.0)

    @property
    def Delta_tilde(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.delta_tilde)])

    @property
    def delta_bar(self) -> float:
        return self.delta_min / (self.delta_max - self.delta_min)

    @property
    def perturbed(self) -> np.ndarray:
        return self.w + self.delta_vector


@dataclass(frozen=True)
class ValidityVerdict:
    q_hat_ge_q_wcp: bool
    q_hat_ge_q_cp: bool | None
    case: str
    boundary: bool = False


def k_cp(n: int, alpha: float) -> int:
    """min{k : k / (n + 1) >= 1 - alpha}, capped at n + 1."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return min(cp_rank(n, alpha), n + 1)


def k_wcp(profile: WeightErrorProfile, alpha: float) -> int:
    """min{k <= n : W_k / W_{n+1} >= 1 - alpha}, or n + 1."""
    W = profile.W
    n = profile.n
    hit = np.flatnonzero(W[1:n + 1] >= _target(1 - alpha, W[-1]))
    return int(hit[0]) + 1 if len(hit) else n + 1


def _case(kc, kw):
    return CP_GT_WCP if kc > kw else CP_LT_WCP if kc < kw else CP_EQ_WCP


def _singular(total, scale):
    return abs(total) <= RTOL * scale


def constant_delta_verdict(profile: WeightErrorProfile, alpha: float, delta: float | None = None) -> ValidityVerdict:
    """Clause-based verdicts for weights shifted by a constant delta."""
    delta = float(profile.delta if delta is None else delta)
    n = profile.n
    Wn = float(profile.W[-1])
    crit = -Wn / (n + 1)
    if _singular(Wn + (n + 1) * delta, Wn):
        raise ValueError("weight normalization singular")
    kc, kw = k_cp(n, alpha), k_wcp(profile, alpha)
    case = _case(kc, kw)
    if kc > kw:
        ge_wcp = delta >= 0 or delta < crit
        ge_cp = delta < crit
    elif kc < kw:
        ge_wcp = crit < delta <= 0
        ge_cp = crit < delta
    else:
        ge_wcp = ge_cp = True
    return ValidityVerdict(bool(ge_wcp), bool(ge_cp), case)


@dataclass(frozen=True)
class Requirements:
    req1: bool | None
    req2: bool
    req3: bool
    boundary: bool
    diagnostics: dict = field(default_factory=dict)


def req1_rhs(profile: WeightErrorProfile, kw: int) -> tuple[float, float]:
    """Numerator and denominator of the requirement-1 bound on delta_bar."""
    W, D = profile.W, profile.Delta_tilde
    n = profile.n
    num = D[-1] * W[kw] - D[kw] * W[-1]
    den = W[-1] * kw - (n + 1) * W[kw]
    return float(num), float(den)


def general_error_requirements(profile: WeightErrorProfile, alpha: float) -> Requirements:
    """Evaluate the three requirements on (delta_min, delta_max, delta_tilde)."""
    if not profile.delta_max > profile.delta_min:
        raise ValueError("delta_max must exceed delta_min")
    n = profile.n
    kw = k_wcp(profile, alpha)
    if kw > n:
        raise ValueError("k_wcp must not exceed n")
    W, D = profile.W, profile.Delta_tilde
    num, den = req1_rhs(profile, kw)
    boundary = _singular(den, W[-1] * kw)
    dbar = profile.delta_bar
    req1 = None if boundary else bool(dbar <= num / den)
    req2 = bool(profile.delta_min > -(profile.delta_max * D[-1] + W[-1]) / (n + 1 - D[-1]))
    req3 = True if D[-1] == 0 else bool(D[kw] / D[-1] <= W[kw] / W[-1])
    diag = {
        "k_wcp": kw, "k_cp": k_cp(n, alpha), "W": W.copy(), "Delta_tilde": D.copy(),
        "delta_bar": dbar, "req1_num": num, "req1_den": den,
    }
    return Requirements(req1, req2, req3, boundary, diag)


def general_error_verdict(profile: WeightErrorProfile, alpha: float) -> ValidityVerdict:
    """Clause-based verdict for per-sample errors in [delta_min, delta_max]."""
    n = profile.n
    if not np.any(profile.delta_tilde > 0):
        # every error equals delta_min: constant case
        v = constant_delta_verdict(profile, alpha, profile.delta_min)
        return ValidityVerdict(v.q_hat_ge_q_wcp, None, v.case)
    r = general_error_requirements(profile, alpha)
    kc, kw = k_cp(n, alpha), r.diagnostics["k_wcp"]
    if r.boundary:
        # requirement 1 reduces to 0 <= numerator, which is requirement 3
        return ValidityVerdict(r.req3, None, CP_EQ_WCP, True)
    if kc < kw:
        ok = r.req1 == r.req2
    elif kc > kw:
        ok = r.req1 != r.req2
    else:
        ok = r.req1 == r.req3
    return ValidityVerdict(bool(ok), None, _case(kc, kw))


# -- region grids -------------------------------------------------------------

UNIFORM = "UNIFORM"
RIGHT_SKEWED = "RIGHT_SKEWED"
LEFT_SKEWED = "LEFT_SKEWED"
SMALL_TAILS = "SMALL_TAILS"
EXTREME_TAILS = "EXTREME_TAILS"
SHAPES = (UNIFORM, RIGHT_SKEWED, LEFT_SKEWED, SMALL_TAILS, EXTREME_TAILS)


def sample_shape(name: str, size: int, rng) -> np.ndarray:
    """Draw normalized errors on [0, 1] from a named shape.

    RIGHT_SKEWED puts 95% of the mass in [0.95, 1] and LEFT_SKEWED mirrors
    it. SMALL_TAILS is Beta(4, 4), EXTREME_TAILS is Beta(0.2, 0.2), and
    ``"BETA(a,b)"`` is any beta law.
    """
    if name == UNIFORM:
        return rng.uniform(0.0, 1.0, size)
    if name in (RIGHT_SKEWED, LEFT_SKEWED):
        top = rng.uniform(size=size) < 0.95
        u = np.where(top, rng.uniform(0.95, 1.0, size), rng.uniform(0.0, 0.95, size))
        return u if name == RIGHT_SKEWED else 1.0 - u
    if name == SMALL_TAILS:
        return rng.beta(4.0, 4.0, size)
    if name == EXTREME_TAILS:
        return rng.beta(0.2, 0.2, size)
    m = re.fullmatch(r"BETA\(\s*([0-9.eE+-]+)\s*,\s*([0-9.eE+-]+)\s*\)", str(name))
    if m:
        a, b = float(m.group(1)), float(m.group(2))
        if a <= 0 or b <= 0:
            raise ValueError("beta parameters must be positive")
        return rng.beta(a, b, size)
    raise ValueError(f"unknown error distribution {name!r}")


def cell_rng(seed: int, row: int, col: int):
    return np.random.default_rng([int(seed), int(row), int(col)])


@dataclass
class RegionGrid:
    delta_min: np.ndarray
    delta_max: np.ndarray
    labels: np.ndarray  # object array of VALID / INVALID / BOUNDARY / UNDEFINED
    delta_tilde: dict  # (row, col) -> normalized errors used in that cell
    distribution: str

    def to_csv(self, path) -> None:
        write_region_csv(self, path)


def region_grid(w, alpha: float, delta_min_range, delta_max_range, grid=(15, 15),
                distribution: str = UNIFORM, seed: int = 0) -> RegionGrid:
    """Evaluate the general-error verdict on a (delta_min, delta_max) grid.

    ``w`` is the true weight vector (scores ascending, test last). Cells
    with delta_min >= delta_max are undefined; each defined cell draws its
    own normalized errors from a substream keyed by (seed, row, col).
    """
    w = np.asarray(w, dtype=float)
    r, c = grid
    for lo, hi in (delta_min_range, delta_max_range):
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("ranges must be finite")
    sample_shape(distribution, 1, np.random.default_rng(0))  # validates the name
    dmins = np.linspace(*delta_min_range, r)
    dmaxs = np.linspace(*delta_max_range, c)
    labels = np.empty((r, c), dtype=object)
    draws = {}
    for i, dmin in enumerate(dmins):
        for j, dmax in enumerate(dmaxs):
            if dmin >= dmax:
                labels[i, j] = UNDEFINED
                continue
            dt = sample_shape(distribution, len(w), cell_rng(seed, i, j))
            draws[i, j] = dt
            prof = WeightErrorProfile.from_normalized(w, dt, dmin, dmax)
            try:
                v = general_error_verdict(prof, alpha)
            except ValueError:
                labels[i, j] = BOUNDARY
                continue
            labels[i, j] = BOUNDARY if v.boundary else VALID if v.q_hat_ge_q_wcp else INVALID
    return RegionGrid(dmins, dmaxs, labels, draws, distribution)


def write_region_csv(grid: RegionGrid, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["row", "col", "delta_min", "delta_max", "cell"])
        for i, dmin in enumerate(grid.delta_min):
            for j, dmax in enumerate(grid.delta_max):
                out.writerow([i, j, repr(float(dmin)), repr(float(dmax)), grid.labels[i, j]])


@dataclass(frozen=True)
class Boundary:
    """Two boundary lines in the (delta_max, delta_min) plane.

    ``req2_delta_min(dmax)`` is where the perturbed normalizer vanishes;
    ``req1_delta_max(dmin)`` is where delta_bar meets the requirement-1
    bound ``slope``. ``degenerate`` is set when that bound is 0 or undefined.
    """

    Delta_total: float
    W_total: float
    n: int
    slope: float
    degenerate: bool

    def req2_delta_min(self, delta_max):
        d = np.asarray(delta_max, dtype=float)
        return -(d * self.Delta_total + self.W_total) / (self.n + 1 - self.Delta_total)

    def req1_delta_max(self, delta_min):
        if self.degenerate:
            return np.full(np.shape(delta_min), np.nan)
        return np.asarray(delta_min, dtype=float) * (1.0 / self.slope + 1.0)

    def polyline(self, delta_max_range, num: int = 50):
        """Points (delta_max, delta_min) tracing both lines over a range."""
        xs = np.linspace(*delta_max_range, num)
        req2 = np.column_stack([xs, self.req2_delta_min(xs)])
        if self.degenerate:
            return req2, np.empty((0, 2))
        # invert delta_max = delta_min * (1/slope + 1)
        factor = 1.0 / self.slope + 1.0
        req1 = np.column_stack([xs, xs / factor]) if factor != 0 else np.empty((0, 2))
        return req2, req1


def theoretical_boundary(profile: WeightErrorProfile, alpha: float) -> Boundary:
    """Boundary lines from the profile's partial sums and normalized errors."""
    W, D = profile.W, profile.Delta_tilde
    n = profile.n
    kw = k_wcp(profile, alpha)
    degenerate = kw > n
    slope = math.nan
    if not degenerate:
        num, den = req1_rhs(profile, kw)
        degenerate = _singular(den, W[-1] * kw) or num == 0
        if not degenerate:
            slope = num / den
    return Boundary(float(D[-1]), float(W[-1]), n, slope, degenerate)
