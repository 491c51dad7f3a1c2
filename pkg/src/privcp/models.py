"""Desk-scale learners: linear quantile and mean regression, logistic
corruption-probability model, k-means, and generator-backed oracles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Hyper:
    """Learner hyperparameters (the JSON ``hyper`` block)."""

    step_size: float = 1.0
    step_decay: float = 0.996
    epochs: int = 2000
    check_every: int = 10
    patience: int = 20
    l2: float = 0.0
    logistic_iters: int = 3000
    seed: int = 0
    oracle_draws: int = 200_000

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**d)


def _design(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.hstack([np.ones((X.shape[0], 1)), X])


def pinball_loss(residual, tau: float) -> float:
    """Mean of rho_tau(r) = max(tau * r, (tau - 1) * r)."""
    r = np.asarray(residual, dtype=float)
    return float(np.mean(np.maximum(tau * r, (tau - 1.0) * r)))


def pinball_subgradient(A, y, coef, tau):
    """Subgradient of the mean pinball loss of y - A @ coef w.r.t. coef."""
    r = y - A @ coef
    return -A.T @ (tau - (r < 0)) / len(y)


# -- quantile regression -----------------------------------------------------

@dataclass
class LinearQuantileModel:
    tau: float
    coef: np.ndarray
    iterations: int = 0
    final_loss: float = float("nan")
    losses: list = field(default_factory=list)

    def predict(self, X):
        return _design(X) @ self.coef


def fit_quantile(X, y, tau: float, hyper: Hyper | None = None, X_val=None, y_val=None) -> LinearQuantileModel:
    """Minimize the mean pinball loss by normalized subgradient descent.

    The step size decays geometrically. The best iterate on the training
    loss is kept; when validation data is given, the iterate with the
    lowest validation loss is returned instead and training stops after
    ``patience`` checks without improvement.
    """
    hyper = hyper or Hyper()
    y = np.asarray(y, dtype=float)
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    if np.any(np.isnan(y)):
        raise ValueError("missing targets")
    A = _design(X)
    if A.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    coef = np.zeros(A.shape[1])
    coef[0] = np.quantile(y, tau)
    best, best_loss = coef.copy(), pinball_loss(y - A @ coef, tau)
    losses = [best_loss]

    use_val = X_val is not None and len(y_val) > 0
    if use_val:
        A_val, y_val = _design(X_val), np.asarray(y_val, dtype=float)
        val_best, val_coef = pinball_loss(y_val - A_val @ coef, tau), coef.copy()
        stale = 0

    t = 0
    for t in range(1, hyper.epochs + 1):
        g = pinball_subgradient(A, y, coef, tau)
        norm = np.linalg.norm(g)
        if norm == 0.0:
            break
        coef = coef - hyper.step_size * hyper.step_decay ** (t - 1) * g / norm
        loss = pinball_loss(y - A @ coef, tau)
        if loss < best_loss:
            best, best_loss = coef.copy(), loss
        losses.append(best_loss)
        if use_val and t % hyper.check_every == 0:
            vl = pinball_loss(y_val - A_val @ coef, tau)
            if vl < val_best:
                val_best, val_coef, stale = vl, coef.copy(), 0
            else:
                stale += 1
                if stale >= hyper.patience:
                    break
    if use_val:
        best = val_coef
    if not np.all(np.isfinite(best)):
        raise FloatingPointError("non-finite quantile regression coefficients")
    return LinearQuantileModel(tau, best, t, pinball_loss(y - A @ best, tau), losses)


@dataclass
class QuantilePair:
    """Lower/upper conditional quantile predictor for CQR scores."""

    lo: object
    hi: object

    def __call__(self, X):
        return np.column_stack([self.lo.predict(X), self.hi.predict(X)])


def fit_quantile_pair(X, y, alpha: float, hyper=None, X_val=None, y_val=None) -> QuantilePair:
    lo = fit_quantile(X, y, alpha / 2, hyper, X_val, y_val)
    hi = fit_quantile(X, y, 1 - alpha / 2, hyper, X_val, y_val)
    return QuantilePair(lo, hi)


# -- mean regression ---------------------------------------------------------

@dataclass
class LinearModel:
    coef: np.ndarray

    def predict(self, X):
        return _design(X) @ self.coef

    def __call__(self, X):
        return self.predict(X)


def fit_linear(X, y) -> LinearModel:
    """Ordinary least squares with intercept."""
    coef, *_ = np.linalg.lstsq(_design(X), np.asarray(y, dtype=float), rcond=None)
    return LinearModel(coef)


# -- logistic ----------------------------------------------------------------

PROB_CLAMP = (1e-3, 1 - 1e-3)


@dataclass
class LogisticModel:
    """Predicts P(M = 0 | z)."""

    coef: np.ndarray

    def predict_proba(self, Z, clamp: bool = True):
        p = 1.0 / (1.0 + np.exp(-(_design(Z) @ self.coef)))
        return np.clip(p, *PROB_CLAMP) if clamp else p


def logistic_objective(A, t, coef, lam):
    """Mean negative log-likelihood plus (lam / 2) * |coef[1:]|^2, and its gradient."""
    s = A @ coef
    nll = np.mean(np.logaddexp(0.0, s) - t * s)
    p = 1.0 / (1.0 + np.exp(-s))
    grad = A.T @ (p - t) / len(t)
    reg = coef.copy()
    reg[0] = 0.0
    return nll + 0.5 * lam * reg @ reg, grad + lam * reg


def fit_logistic(Z, m, hyper: Hyper | None = None) -> LogisticModel:
    """Gradient-descent MLE for P(M = 0 | z) with an L2 penalty (intercept free)."""
    hyper = hyper or Hyper()
    m = np.asarray(m, dtype=bool)
    if m.all() or (~m).all():
        raise ValueError("both classes must be present")
    A = _design(Z)
    t = (~m).astype(float)
    lam = hyper.l2
    # 1 / Lipschitz constant of the gradient
    lip = 0.25 * np.linalg.norm(A, 2) ** 2 / len(t) + lam
    step = 1.0 / lip
    coef = np.zeros(A.shape[1])
    rate = t.mean()
    coef[0] = np.log(rate / (1 - rate))
    for _ in range(hyper.logistic_iters):
        _, g = logistic_objective(A, t, coef, lam)
        coef = coef - step * g
        if np.max(np.abs(g)) < 1e-10:
            break
    return LogisticModel(coef)


# -- k-means -----------------------------------------------------------------

@dataclass
class KMeansModel:
    k: int
    centroids: np.ndarray
    seed: int
    inertia_history: list = field(default_factory=list)

    def assign(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        d = ((Z[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d, axis=1)  # first minimum = lowest index

    def inertia(self, Z) -> float:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return float(((Z - self.centroids[self.assign(Z)]) ** 2).sum())


def fit_kmeans(Z, k: int, seed: int = 0, max_iter: int = 200, tol: float = 1e-8) -> KMeansModel:
    """Lloyd iterations from k distinct random rows."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if k <= 0:
        raise ValueError("k must be positive")
    if Z.shape[0] < k:
        raise ValueError("fewer rows than clusters")
    rng = np.random.default_rng(seed)
    centroids = Z[rng.choice(Z.shape[0], size=k, replace=False)].copy()
    model = KMeansModel(k, centroids, seed)
    for _ in range(max_iter):
        labels = model.assign(Z)
        model.inertia_history.append(float(((Z - centroids[labels]) ** 2).sum()))
        new = centroids.copy()
        for j in range(k):
            members = Z[labels == j]
            if len(members):  # empty clusters keep their centroid
                new[j] = members.mean(axis=0)
        shift = np.max(np.abs(new - centroids))
        centroids = new
        model.centroids = centroids
        if shift < tol:
            break
    model.inertia_history.append(model.inertia(Z))
    return model


# -- oracles -----------------------------------------------------------------

QR_ORACLE = "QR_ORACLE"
QR_DEGENERATE = "QR_DEGENERATE"
PCP_ORACLE_PROB = "PCP_ORACLE_PROB"
PCP_HALF_PROB = "PCP_HALF_PROB"
IMPUTE_ORACLE = "IMPUTE_ORACLE"
IMPUTE_TRIVIAL = "IMPUTE_TRIVIAL"
ORACLE_KINDS = (QR_ORACLE, QR_DEGENERATE, PCP_ORACLE_PROB, PCP_HALF_PROB, IMPUTE_ORACLE, IMPUTE_TRIVIAL)


@dataclass(frozen=True)
class OracleModel:
    """Ground-truth or deliberately broken component built from generator parameters.

    All inputs and outputs are in the generator's raw units.
    """

    kind: str
    params: object
    draws: int = 200_000

    def __post_init__(self):
        if self.kind not in ORACLE_KINDS:
            raise ValueError(f"unknown oracle kind {self.kind!r}")
        if self.params is None:
            raise ValueError("oracle models need generator parameters")


def oracle_predict(om: OracleModel, x, z, alpha: float = 0.1, rng=None):
    """Batch oracle output for rows of x (and z where the oracle needs it).

    QR_* return an (n, 2) quantile array, PCP_* return P(M = 1 | z), and
    IMPUTE_* return one label per row.
    """
    from . import synth

    if om.params is None:
        raise ValueError("oracle models need generator parameters")
    rng = np.random.default_rng(rng)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    if om.kind == QR_DEGENERATE:
        return np.zeros((n, 2))
    if om.kind == IMPUTE_TRIVIAL:
        return np.zeros(n)
    if om.kind == QR_ORACLE:
        return synth.conditional_quantiles(om.params, x, (alpha / 2, 1 - alpha / 2), om.draws, rng)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if om.kind == PCP_ORACLE_PROB:
        return synth.corruption_prob(om.params, z)
    if om.kind == PCP_HALF_PROB:
        return 0.5 * synth.corruption_prob(om.params, z)
    return synth.sample_y_given_xz(om.params, x, z, rng)
