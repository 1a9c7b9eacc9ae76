"""Fractional paths when the volatility itself is uncertain.

Volatility is only known to lie in [0.5, 1.5], so variances are in [0.25, 2.25].
Each scenario policy picks a variance from that interval at every step, and
the sublinear (upper) expectation is the worst case over the policies.  The
second moment of B^H_t is then bracketed by sigma_low^2 t^{2H} and
sigma_high^2 t^{2H}, whichever policy is used.
"""

import numpy as np

from fgbm.gfbm import empirical_second_moment, simulate_policies, sublinear_moment
from fgbm.grid import TimeGrid
from fgbm.priors import ConstantMix, ConstantVertex, PiecewiseSwitch, UncertaintySet
from fgbm.volterra import kernel_weights

H = 0.75
theta = UncertaintySet.interval(0.25, 2.25)
grid = TimeGrid.uniform(256)
policies = [
    ConstantVertex(0),  # calm market throughout
    ConstantVertex(1),  # stressed market throughout
    ConstantMix((0.5, 0.5)),  # the average variance 1.25
    PiecewiseSwitch(seed=4, rule="random", every=16),  # regime flips every 16 steps
    PiecewiseSwitch(rule="sign", vertices=(1, 0)),  # stressed while the path is negative
]
sets = simulate_policies(theta, policies, kernel_weights(H, grid), seed=2024, n_paths=4000)

print("E[(B^H_1)^2] per policy (bounds 0.25 and 2.25)")
for pol, paths in zip(policies, sets):
    est = empirical_second_moment(paths, 0, 0, 1.0, 1.0)
    print(f"  {pol.policy_id:24s} {est.mean:7.4f} +- {est.stderr:.4f}")

upper, lower, _ = sublinear_moment(sets, lambda p: p.at(1.0)[:, 0] ** 2)
print(f"upper expectation {upper.mean:.4f}, lower expectation {lower.mean:.4f}")

# the sign-dependent policy is path-dependent, yet its moment stays inside the band
t = grid.times[::32]
band = np.array([0.25 * t ** (2 * H), 2.25 * t ** (2 * H)])
inside = all(band[0, k] * 0.95 <= (sets[-1].values[:, 0, 32 * k] ** 2).mean() <= band[1, k] * 1.05 for k in range(t.size))
print("sign-switch second moment within the band at every 1/8:", inside)
