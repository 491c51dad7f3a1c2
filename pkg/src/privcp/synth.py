"""Synthetic data with privileged information and label corruption.

X ~ Uni(1, 5)^10, a 3-dimensional PI Z, a scalar projection Z' = Z @ beta2,
heteroscedastic noise scale U in {1, 2, 8} set by Z', and missing labels
drawn with a probability that depends on Z only.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset

UNDER = "UNDER"
OVER = "OVER"
HARD = "HARD"
KINDS = (UNDER, OVER, HARD)

D_X = 10
D_Z = 3
TARGET_RATE = 0.2
P_LO, P_HI = 0.2, 0.9


# -- corruption pipeline -----------------------------------------------------

@dataclass(frozen=True)
class CorruptionMap:
    """Frozen constants of the probability pipeline, reusable on new inputs."""

    kind: str
    shift: float
    scale: float
    cutoff: float
    v_lo: float
    v_hi: float
    gamma: float

    def __call__(self, base, T=None) -> np.ndarray:
        v = _squash(np.asarray(base, dtype=float), self.shift, self.scale)
        v = _filter(v, self.kind, self.cutoff, T)
        keep = v > 0
        s = np.zeros_like(v)
        if self.v_hi > self.v_lo:
            s[keep] = P_LO + (P_HI - P_LO) * np.clip((v[keep] - self.v_lo) / (self.v_hi - self.v_lo), 0, 1)
        else:
            s[keep] = P_HI
        return _power(s, self.gamma)


def _squash(base, shift, scale):
    u = np.maximum((base - shift) / scale * 2.5, 0.0)
    return 1.0 - np.exp(-u)


def _filter(v, kind, cutoff, T=None):
    v = v.copy()
    v[v < 0] = 0.0  # no-op guard: v >= 0 by construction
    if kind == UNDER:
        v[v < cutoff] = 0.0
    elif kind == OVER:
        v[v > cutoff] = 0.0
    elif kind == HARD:
        if T is None:
            raise ValueError("HARD corruption needs T")
        v[np.asarray(T) <= 1.2] = 0.0
        v[v < cutoff] = 0.0
    else:
        raise ValueError(f"unknown corruption kind {kind!r}")
    return v


def _power(s, gamma):
    # 0.9 * (s / 0.9)^gamma keeps every probability inside [0, 0.9]
    return np.where(s > 0, P_HI * (s / P_HI) ** gamma, 0.0)


def _calibrate_gamma(s, target=TARGET_RATE, lo=0.01, hi=50.0, iters=60):
    """Bisection for mean(_power(s, gamma)) = target; the mean falls with gamma."""
    if _power(s, lo).mean() < target or _power(s, hi).mean() > target:
        raise ValueError("target corruption rate unattainable")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _power(s, mid).mean() > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _pipeline(base, kind, T=None):
    base = np.asarray(base, dtype=float)
    if np.ptp(base) == 0:
        raise ValueError("constant PI projection")
    shift = min(np.quantile(base, 0.05), 0.0)
    scale = np.quantile(base - shift, 0.95)
    if scale <= 0:
        raise ValueError("constant PI projection")
    v = _squash(base, shift, scale)
    if kind == UNDER:
        cutoff = np.quantile(v, 0.77)
    elif kind == OVER:
        cutoff = np.quantile(v, 0.30)
    else:
        pre = v.copy()
        pre[np.asarray(T) <= 1.2] = 0.0
        cutoff = np.quantile(pre, 0.50)
    v = _filter(v, kind, cutoff, T)
    keep = v > 0
    if not keep.any():
        raise ValueError("no sample survives the corruption filter")
    v_lo, v_hi = float(v[keep].min()), float(v[keep].max())
    cmap = CorruptionMap(kind, float(shift), float(scale), float(cutoff), v_lo, v_hi, 1.0)
    s = np.zeros_like(v)
    s[keep] = P_LO + (P_HI - P_LO) * ((v[keep] - v_lo) / (v_hi - v_lo) if v_hi > v_lo else 1.0)
    gamma = _calibrate_gamma(s)
    cmap = CorruptionMap(kind, cmap.shift, cmap.scale, cmap.cutoff, v_lo, v_hi, float(gamma))
    return _power(s, gamma), cmap


def corruption_probs_default(base):
    """Probabilities concentrated on the top 23% of ``base``. Returns (p, map)."""
    return _pipeline(base, UNDER)


def corruption_probs_over(base):
    """Probabilities on the bottom 30% of the squashed ``base``. Returns (p, map)."""
    return _pipeline(base, OVER)


def hard_T(zp):
    """Oscillating transform of Z' that gates the HARD mechanism."""
    zp = np.asarray(zp, dtype=float)
    sig = 1.0 / (1.0 + np.exp(-zp / 2))
    num = np.arctan(0.3 * np.sqrt(6 * np.sin(zp) ** 2)) ** (1 / 3) - 0.8 * np.tanh(np.cos(zp ** 4))
    return num / (0.5 * sig + 0.5) + 0.5 + np.sin(zp ** 2 / 5) * np.cos(zp ** 4 / 8)


def corruption_probs_hard(zp):
    """Default pipeline gated by hard_T(Z') > 1.2 with a median filter. Returns (p, map)."""
    return _pipeline(zp, HARD, hard_T(zp))


# -- generator ----------------------------------------------------------------

@dataclass
class GeneratorParams:
    beta1: np.ndarray
    beta2: np.ndarray
    seed: int
    kind: str
    cmap: CorruptionMap
    marginal: float
    probs: np.ndarray | None = field(default=None, repr=False)
    draws: dict = field(default_factory=dict, repr=False)  # U, E, Zp per sample

    def to_json(self) -> str:
        d = {
            "beta1": self.beta1.tolist(), "beta2": self.beta2.tolist(), "seed": self.seed,
            "kind": self.kind, "marginal": self.marginal, "corruption_map": asdict(self.cmap),
        }
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GeneratorParams":
        d = json.loads(text)
        try:
            return cls(np.array(d["beta1"], dtype=float), np.array(d["beta2"], dtype=float), int(d["seed"]),
                       d["kind"], CorruptionMap(**d["corruption_map"]), float(d["marginal"]))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed generator parameters: {exc}") from exc


def noise_scale(zp):
    zp = np.asarray(zp, dtype=float)
    return np.where(zp < -3, 1.0, np.where(zp <= 1, 2.0, 8.0))


def sample_z(rng, n):
    E1 = rng.normal(size=(n, D_Z))
    E2 = rng.uniform(-1, 1, size=(n, D_Z))
    E3 = rng.normal(size=(n, D_Z))
    P = rng.poisson(np.cos(E1) ** 2 + 0.1) * E2
    return P + 2 * E3


def mean_y(params, x, z):
    return 0.3 * np.asarray(x) @ params.beta1 + 0.8 * (np.asarray(z) @ params.beta2) + 0.2


def generate(n: int, seed: int = 0, kind: str = UNDER):
    """Draw a corrupted synthetic dataset; labels with M = 1 are MISSING."""
    if kind not in KINDS:
        raise ValueError(f"unknown corruption kind {kind!r}")
    if n < 100:
        raise ValueError("n must be at least 100")
    rng = np.random.default_rng(seed)
    beta1 = rng.uniform(0, 1, D_X)
    beta1 /= beta1.sum()
    beta2 = rng.uniform(0, 1, D_Z)
    beta2 /= beta2.sum()
    X = rng.uniform(1, 5, size=(n, D_X))
    Z = sample_z(rng, n)
    zp = Z @ beta2
    U = noise_scale(zp)
    E = rng.normal(size=n)
    y = 0.3 * X @ beta1 + 0.8 * zp + 0.2 + U * E
    if kind == UNDER:
        p, cmap = corruption_probs_default(zp)
    elif kind == OVER:
        p, cmap = corruption_probs_over(zp)
    else:
        p, cmap = corruption_probs_hard(zp)
    m = rng.uniform(size=n) < p
    params = GeneratorParams(beta1, beta2, int(seed), kind, cmap, float(p.mean()), p,
                             {"U": U, "E": E, "Zp": zp})
    y_obs = np.where(m, np.nan, y)
    ds = Dataset(X, Z, y_obs, ~m, m, y.copy(), params=params)
    return ds, params


# -- ground-truth laws --------------------------------------------------------

def corruption_prob(params: GeneratorParams, z) -> np.ndarray:
    """P(M = 1 | Z = z) for arbitrary rows z."""
    zp = np.atleast_2d(np.asarray(z, dtype=float)) @ params.beta2
    return params.cmap(zp, hard_T(zp) if params.kind == HARD else None)


def true_weight(params: GeneratorParams, z) -> np.ndarray:
    """P(M = 0) / P(M = 0 | z)."""
    if params is None:
        raise ValueError("generator parameters required")
    return (1.0 - params.marginal) / (1.0 - corruption_prob(params, z))


def sample_y_given_xz(params, x, z, rng) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = np.atleast_2d(np.asarray(z, dtype=float))
    return mean_y(params, x, z) + noise_scale(z @ params.beta2) * rng.normal(size=x.shape[0])


def conditional_quantiles(params, x, taus, draws, rng) -> np.ndarray:
    """Quantiles of Y | X = x, one column per tau.

    Y - 0.3 x beta1 - 0.2 = 0.8 Z' + U E does not depend on x, so a single
    Monte-Carlo sample of that residual serves every row.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = sample_z(rng, int(draws))
    zp = z @ params.beta2
    resid = 0.8 * zp + noise_scale(zp) * rng.normal(size=len(zp))
    q = np.quantile(resid, list(taus))
    base = 0.3 * x @ params.beta1 + 0.2
    return base[:, None] + q[None, :]
