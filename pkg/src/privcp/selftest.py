"""Oracle-equivalence suites for the threshold and validity machinery.

Each suite draws small random instances, compares a library routine with a
straightforward reference computation and returns a SuiteResult. The
reference computations here deliberately avoid the library's own helpers.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import calibration as cal
from . import weights as wts


@dataclass
class SuiteResult:
    name: str
    checked: int
    mismatches: int
    seconds: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.mismatches == 0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.note})" if self.note else ""
        return (f"{flag} {self.name}: {self.mismatches}/{self.checked} mismatches, "
                f"{self.seconds:.2f}s{extra}")


# -- reference computations -----------------------------------------------------

def enumeration_threshold(scores, weights, test_weight, level):
    """Smallest candidate t with exact mass{s_i <= t} / total >= level.

    Masses are summed as exact rationals over every candidate, one at a
    time; +inf is the last candidate and always qualifies.
    """
    w = [Fraction(float(v)) for v in weights]
    total = sum(w) + Fraction(float(test_weight))
    lvl = Fraction(float(level))
    for t in sorted(set(float(s) for s in scores)):
        mass = sum((wi for si, wi in zip(scores, w) if si <= t), Fraction(0))
        if mass >= lvl * total:
            return t
    return math.inf


def direct_signed_threshold(scores, masses, level):
    """Plain loop over sorted scores with masses normalized by their signed sum.

    ``masses`` includes the test mass last. Returns +inf when no finite
    score reaches ``level``.
    """
    order = sorted(range(len(scores)), key=lambda i: scores[i])
    total = float(np.sum(masses))
    run = 0.0
    for pos, i in enumerate(order):
        run += masses[i]
        nxt = order[pos + 1] if pos + 1 < len(order) else None
        if nxt is not None and scores[nxt] == scores[i]:
            continue
        if run / total >= level * (1 - 1e-12):
            return float(scores[i])
    return math.inf


def _instance(rng, n_max=12):
    n = int(rng.integers(1, n_max + 1))
    w = rng.uniform(0.1, 3.0, n + 1)
    scores = np.sort(rng.normal(size=n))  # profiles list weights in score order
    alpha = float(rng.choice([0.05, 0.1, 0.2, 0.3, 0.5]))
    return n, w, scores, alpha


# -- suites -----------------------------------------------------------------------

def weighted_vs_enumeration(count=1000, seed=0) -> SuiteResult:
    """weighted_threshold against exact rational enumeration; ties included."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(count):
        n = int(rng.integers(1, 13))
        s = rng.integers(0, 6, n).astype(float) if rng.uniform() < 0.5 else rng.normal(size=n)
        w = rng.uniform(0.01, 5.0, n)
        wt = float(rng.uniform(0.01, 5.0))
        level = float(rng.uniform(0.01, 0.99))
        got = cal.weighted_threshold(cal.ScoreProfile(s, w, wt), level).value
        bad += got != enumeration_threshold(s, w, wt, level)
    return SuiteResult("weighted threshold = enumeration", count, bad, time.perf_counter() - t0)


def uniform_reduction(n_max=50, seed=0) -> SuiteResult:
    """Unit weights reproduce the split-conformal threshold for every (n, alpha)."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    alphas = np.round(np.arange(1, 100) / 100, 2)
    bad = checked = 0
    for n in range(1, n_max + 1):
        s = rng.normal(size=n)
        s[rng.uniform(size=n) < 0.2] = 0.0  # some ties
        prof = cal.ScoreProfile.uniform(s)
        for a in alphas:
            checked += 1
            bad += cal.weighted_threshold(prof, 1 - a).value != cal.cp_threshold(s, a).value
    return SuiteResult("uniform weights = CP", checked, bad, time.perf_counter() - t0)


def constant_delta_soundness(count=1000, seed=0):
    """Constant-shift verdicts against direct threshold comparisons.

    Returns one result for the WCP comparison and one for the CP comparison.
    """
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    bad_w = bad_c = checked = 0
    while checked < count:
        n, w, s, alpha = _instance(rng)
        delta = float(rng.uniform(-2, 2))
        prof = wts.WeightErrorProfile(w, delta)
        try:
            v = wts.constant_delta_verdict(prof, alpha)
        except ValueError:
            continue
        masses = w + delta
        q_hat = direct_signed_threshold(s, masses, 1 - alpha)
        q_wcp = direct_signed_threshold(s, w, 1 - alpha)
        k = math.ceil((n + 1) * (1 - alpha) - 1e-9)
        q_cp = float(np.sort(s)[k - 1]) if k <= n else math.inf
        checked += 1
        bad_w += v.q_hat_ge_q_wcp != (q_hat >= q_wcp)
        bad_c += v.q_hat_ge_q_cp != (q_hat >= q_cp)
    dt = time.perf_counter() - t0
    return (SuiteResult("constant-shift verdict vs WCP comparison", checked, bad_w, dt),
            SuiteResult("constant-shift verdict vs CP comparison", checked, bad_c, dt))


def _general_instances(rng):
    while True:
        n, w, s, alpha = _instance(rng)
        dmin, dmax = sorted(rng.uniform(-2, 2, 2))
        if dmax <= dmin:
            continue
        prof = wts.WeightErrorProfile.from_normalized(w, rng.uniform(0, 1, n + 1), dmin, dmax)
        yield n, w, s, alpha, prof


def general_error_soundness(count=1000, seed=0) -> SuiteResult:
    """Bounded per-sample verdicts against direct threshold comparisons."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    bad = checked = 0
    for n, w, s, alpha, prof in _general_instances(rng):
        if checked >= count:
            break
        masses = prof.perturbed
        if abs(masses.sum()) < 1e-9 * w.sum():
            continue
        try:
            v = wts.general_error_verdict(prof, alpha)
        except ValueError:
            continue  # k_wcp = n + 1: the WCP threshold is already +inf
        q_hat = direct_signed_threshold(s, masses, 1 - alpha)
        q_wcp = direct_signed_threshold(s, w, 1 - alpha)
        checked += 1
        bad += v.q_hat_ge_q_wcp != (q_hat >= q_wcp)
    return SuiteResult("bounded-error verdict vs WCP comparison", checked, bad, time.perf_counter() - t0)


def requirement_formulas(count=2000, seed=2) -> SuiteResult:
    """Requirements 1 and 2, branched on the sign of their denominator,
    against the perturbed-versus-true cumulative mass at k_wcp."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    bad = checked = 0
    for n, w, s, alpha, prof in _general_instances(rng):
        if checked >= count:
            break
        try:
            r = wts.general_error_requirements(prof, alpha)
        except ValueError:
            continue
        if r.boundary:
            continue
        kw = r.diagnostics["k_wcp"]
        cw = np.concatenate([[0.0], np.cumsum(w)])
        cd = np.concatenate([[0.0], np.cumsum(prof.delta_vector)])
        total_hat = cw[-1] + cd[-1]
        if abs(total_hat) < 1e-9 * cw[-1]:
            continue
        mass_le = (cw[kw] + cd[kw]) / total_hat <= cw[kw] / cw[-1]
        formula = (r.req1 == r.req2) if r.diagnostics["req1_den"] > 0 else (r.req1 != r.req2)
        checked += 1
        bad += formula != mass_le
    return SuiteResult("requirement formulas vs mass at k_wcp", checked, bad, time.perf_counter() - t0)


def run_all(count=1000, seed=0):
    out = [weighted_vs_enumeration(count, seed), uniform_reduction(seed=seed)]
    out.extend(constant_delta_soundness(count, seed))
    out.append(general_error_soundness(count, seed))
    out.append(requirement_formulas(2 * count, seed + 2))
    return out


def main(verbose=True) -> int:
    """Print one line per suite. Exit status 1 if any suite has mismatches."""
    results = run_all()
    if verbose:
        for r in results:
            print(r.line())
    return 0 if all(r.passed for r in results) else 1
