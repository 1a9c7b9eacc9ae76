"""Increment correlations decay like n^{2H-2}.

Unit-lag increments of the paths have autocovariance
rho(n) = sigma^2/2 ((n+1)^{2H} + (n-1)^{2H} - 2 n^{2H}); for H > 1/2 the sum
over n diverges (long memory), for H = 1/2 it vanishes and for H < 1/2 it
is negative.
"""

from fgbm.gfbm import autocovariance, autocovariance_target, loglog_slope, simulate_policies
from fgbm.grid import TimeGrid
from fgbm.priors import ConstantVertex, UncertaintySet
from fgbm.volterra import kernel_weights

theta = UncertaintySet.interval(0.25, 1.0)
grid = TimeGrid.uniform(64 * 8, 64.0)  # 64 time units, 8 cells per unit
for H in (0.3, 0.5, 0.75):
    sets = simulate_policies(theta, [ConstantVertex(1), ConstantVertex(0)], kernel_weights(H, grid), seed=7, n_paths=1000)
    print(f"H = {H}")
    for n in (1, 2, 5, 10):
        res = autocovariance(sets, 0, n)
        print(f"  rho({n:2d}) upper {res.rho_upper:+.4f} lower {res.rho_lower:+.4f}   sigma_high target {autocovariance_target(H, n):+.4f}")
    if H > 0.5:
        lags = range(2, 21)
        slope = loglog_slope(lags, [autocovariance(sets, 0, n).rho_upper for n in lags])
        print(f"  fitted decay exponent {slope:.3f} (2H - 2 = {2 * H - 2:.3f})")
