"""Conditional-moment and filter-rate diagnostics on the OU model."""

import numpy as np

from jumpcontrast import FilterConfig, JumpLaw, TruncationKernel, linear_ou
from jumpcontrast.mc_harness import check_conditional_moment, check_filter_rate

theta0 = (2.0, 0.5)
deltas = 2.0 ** -np.arange(6, 13)

for lam, c in [(0.0, 2.0), (10.0, 2.0), (10.0, np.inf)]:
    model = linear_ou(-1.0, 1.0, JumpLaw(lam, 0.0, 1.0))
    rep = check_conditional_moment(model, theta0, 0.0, FilterConfig(0.49, c), TruncationKernel(), deltas, 100_000)
    print(f"lambda={lam:g} c={c:g}: leading coefficient {rep.coefficient:.4f} (a^2 = {rep.target:.4f}, ratio {rep.ratio:.3f})")

clean = check_filter_rate(linear_ou(-1.0), theta0, 100.0, 50_000, FilterConfig(0.49, 2.0), 5)
print(f"no jumps, D=0.002: false-positive rate {clean.false_positive_rate:.2e} (Gaussian tail {clean.gaussian_tail:.2e})")
jumpy = check_filter_rate(linear_ou(-1.0, 1.0, JumpLaw(10.0, 0.0, 1.0)), theta0, 100.0, 500_000,
                          FilterConfig(0.49, 2.0), 2)
print(f"lambda=10, D=0.0002: detection rate {jumpy.detection_rate:.4f} over {jumpy.n_big_jumps} large jumps")
