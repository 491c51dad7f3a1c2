"""
Weighted quantiles and the infinite atom
========================================

A weighted calibration threshold is the smallest score whose cumulative
weight reaches the target level, where the test point contributes a mass
sitting at +inf.
"""

import numpy as np

from privcp import calibration as cal

# three calibration scores, the first one heavily weighted
profile = cal.ScoreProfile([1.0, 2.0, 3.0], [3.0, 1.0, 1.0], test_weight=1.0)
for level in (0.5, 0.8, 0.9):
    print(level, cal.weighted_threshold(profile, level).value)

# the finite mass is 5/6, so any level above it lands on the +inf atom
print("finite mass", 5 / 6)

# with unit weights the walk is ordinary split conformal
rng = np.random.default_rng(0)
scores = rng.exponential(size=25)
for alpha in (0.05, 0.1, 0.3):
    w = cal.weighted_threshold(cal.ScoreProfile.uniform(scores), 1 - alpha).value
    print(alpha, w, cal.cp_threshold(scores, alpha).value)

# per-sample thresholds: each calibration weight in turn plays the test weight,
# at level 1 - alpha + beta; the aggregate is a (1 - beta) order statistic of them
alpha, beta = 0.2, 0.05
w_all = rng.uniform(0.5, 2.0, 25)
q = cal.pcp_thresholds(scores, w_all, w_all, level=1 - alpha + beta)
print(np.round(np.sort(q), 3))
print("aggregated", cal.pcp_from_weights(scores, w_all, w_all, alpha, beta).value)
