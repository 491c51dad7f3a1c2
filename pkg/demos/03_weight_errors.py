"""
What happens when the weights are off
=====================================

Shifting every weight by the same constant moves the weighted threshold
toward or away from the unweighted one. The closed-form verdicts below are
set against the threshold actually computed with the shifted weights.
"""

import numpy as np

from privcp import calibration as cal
from privcp import weights as W

rng = np.random.default_rng(3)
n = 40
scores = np.sort(rng.normal(size=n))
w = np.append(np.linspace(3.0, 0.5, n), 1.0)  # heavy on low scores, test weight last
prof = W.WeightErrorProfile(w)
print("k_cp", W.k_cp(n, 0.1), "k_wcp", W.k_wcp(prof, 0.1), "-W/(n+1)", -w.sum() / (n + 1))

q_true = cal.signed_weighted_threshold(scores, w[:n], w[n], 0.9)
for delta in (-3.0, -1.0, -0.5, 0.0, 0.5, 2.0):
    v = W.constant_delta_verdict(W.WeightErrorProfile(w, delta), 0.1)
    q = cal.signed_weighted_threshold(scores, w[:n] + delta, w[n] + delta, 0.9)
    print(f"delta {delta:+.1f}  verdict {v.q_hat_ge_q_wcp!s:<5}  direct {q >= q_true!s:<5}  q {q:.3f}")

# per-sample errors in [delta_min, delta_max]
grid = W.region_grid(w, 0.1, (-1.0, 1.0), (-1.0, 1.0), grid=(9, 9), distribution=W.UNIFORM, seed=0)
sym = {W.VALID: "+", W.INVALID: "-", W.BOUNDARY: "o", W.UNDEFINED: "."}
for row in grid.labels[::-1]:
    print(" ".join(sym[c] for c in row))
