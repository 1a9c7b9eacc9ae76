import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from fgbm.gfbm import (
    GfbmPath,
    autocovariance,
    autocovariance_target,
    build_gfbm,
    difference_quotient,
    empirical_second_moment,
    exact_fbm_oracle,
    fbm_covariance,
    holder_exponent,
    increment_covariance,
    increment_covariance_target,
    loglog_slope,
    moment_scaling,
    p_variation,
    p_variation_refinement,
    second_moment_target,
    simulate_gfbm,
    simulate_policies,
    sublinear_moment,
)
from fgbm.grid import TimeGrid
from fgbm.priors import ConstantVertex, PathBundle, UncertaintySet, simulate_gbm
from fgbm.volterra import HurstIndex, kernel_weights

THETA = UncertaintySet.interval(0.25, 2.25)
HIGH, LOW = ConstantVertex(1), ConstantVertex(0)
UNIT = UncertaintySet([[[1.0]]])


def line_path(n, h=0.75):
    g = TimeGrid.uniform(n)
    return GfbmPath(g, g.times[None, None, :], HurstIndex(h))


@pytest.fixture(scope="module")
def high_low():
    table = kernel_weights(0.75, TimeGrid.uniform(128))
    return simulate_policies(THETA, [HIGH, LOW], table, seed=21, n_paths=4000)


def within(est, target, n_se=3.0, rel=0.02):
    return abs(est.mean - target) <= n_se * est.stderr + rel * abs(target)


class TestBuild:
    def test_half_is_identity(self):
        g = TimeGrid.uniform(32)
        bundle = simulate_gbm(THETA, HIGH, g, seed=1, n_paths=3)
        path = build_gfbm(bundle, kernel_weights(0.5, g))
        np.testing.assert_array_equal(path.values, bundle.values)

    def test_zero_increments(self):
        g = TimeGrid.uniform(16)
        z = np.zeros((2, 1, 16))
        bundle = PathBundle(g, z, np.zeros((2, 1, 17)), "zero", (0, 1), 0)
        assert np.all(build_gfbm(bundle, kernel_weights(0.75, g)).values == 0)

    def test_starts_at_zero(self, high_low):
        assert np.all(high_low[0].values[:, :, 0] == 0)

    def test_grid_mismatch(self):
        bundle = simulate_gbm(THETA, HIGH, TimeGrid.uniform(16), seed=1)
        with pytest.raises(ValueError):
            build_gfbm(bundle, kernel_weights(0.75, TimeGrid.uniform(32)))

    def test_provenance(self):
        table = kernel_weights(0.75, TimeGrid.uniform(16))
        p = simulate_gfbm(THETA, HIGH, table, seed=4, n_paths=2)
        assert p.provenance == ("vertex[1]", (0, 1), table.table_id)

    def test_unit_variance(self):
        table = kernel_weights(0.75, TimeGrid.uniform(128))
        p = simulate_gfbm(UNIT, ConstantVertex(0), table, seed=2, n_paths=4000)
        assert within(empirical_second_moment(p, 0, 0, 1.0, 1.0), 1.0)

    def test_coarsen_and_csv(self, tmp_path):
        p = line_path(8)
        c = p.coarsen(2)
        assert c.grid.n == 4
        np.testing.assert_allclose(c.values[0, 0], [0, 0.25, 0.5, 0.75, 1.0])
        p.to_csv(tmp_path / "p.csv")
        rows = list(csv.reader(open(tmp_path / "p.csv")))
        assert rows[0] == ["t", "B1"]
        assert float(rows[-1][1]) == 1.0


class TestOracle:
    def test_covariance_at_one(self):
        assert fbm_covariance(0.75, [1.0])[0, 0] == 1.0

    def test_half_is_min(self):
        t = np.array([0.2, 0.5, 1.0])
        np.testing.assert_allclose(fbm_covariance(0.5, t), np.minimum.outer(t, t))

    def test_half_increments_iid(self):
        p = exact_fbm_oracle(0.5, TimeGrid.uniform(100), seed=3, n_paths=200)
        inc = p.increments.ravel()
        assert abs(inc.var() - 0.01) < 4 * 0.01 * np.sqrt(2 / inc.size)
        x = p.increments[:, 0, :]
        lag1 = np.mean(x[:, 1:] * x[:, :-1])
        assert abs(lag1) < 4 * 0.01 / np.sqrt(x[:, 1:].size)

    def test_size_limit(self):
        with pytest.raises(ValueError):
            exact_fbm_oracle(0.75, TimeGrid.uniform(5000), seed=0)

    def test_pipeline_equivalence(self):
        g = TimeGrid.uniform(64)
        oracle = exact_fbm_oracle(0.75, g, seed=5, n_paths=3000)
        pipe = simulate_gfbm(UNIT, ConstantVertex(0), kernel_weights(0.75, g), seed=6, n_paths=3000)
        for t in (0.5, 1.0):
            assert stats.ks_2samp(oracle.at(t)[:, 0], pipe.at(t)[:, 0]).pvalue > 0.01


class TestSecondMoments:
    def test_covariance_high(self, high_low):
        est = empirical_second_moment(high_low[0], 0, 0, 0.5, 1.0)
        assert within(est, 1.125)
        assert second_moment_target(0.75, 2.25, 0.5, 1.0) == pytest.approx(1.125)

    def test_covariance_low(self, high_low):
        est = empirical_second_moment(high_low[1], 0, 0, 0.25, 0.75)
        assert within(est, second_moment_target(0.75, 0.25, 0.25, 0.75))

    def test_at_zero(self, high_low):
        est = empirical_second_moment(high_low[0], 0, 0, 0.0, 1.0)
        assert est.mean == 0.0 and est.stderr == 0.0

    def test_off_grid(self, high_low):
        with pytest.raises(ValueError):
            empirical_second_moment(high_low[0], 0, 0, 0.3, 1.0)

    def test_ordering_gap(self, high_low):
        hi = empirical_second_moment(high_low[0], 0, 0, 1.0, 1.0)
        lo = empirical_second_moment(high_low[1], 0, 0, 1.0, 1.0)
        gap = 2.0
        assert abs(hi.mean - lo.mean - gap) <= 3 * np.hypot(hi.stderr, lo.stderr) + 0.04 * gap

    def test_centering(self, high_low):
        for p in high_low:
            x = p.at(1.0)[:, 0]
            assert abs(x.mean()) <= 3 * x.std(ddof=1) / np.sqrt(x.size)

    def test_stationarity(self, high_low):
        p = high_low[0]
        for t, lag in ((0.25, 0.25), (0.5, 0.25)):
            shifted = sublinear_moment(p, lambda q: (q.at(t + lag)[:, 0] - q.at(lag)[:, 0]) ** 2)[0]
            assert within(shifted, second_moment_target(0.75, 2.25, t, t))

    def test_self_similarity(self, high_low):
        p = high_low[0]
        a, t = 2.0, 0.5
        scaled = sublinear_moment(p, lambda q: (a**-0.75 * q.at(a * t)[:, 0]) ** 2)[0]
        plain = sublinear_moment(p, lambda q: q.at(t)[:, 0] ** 2)[0]
        assert abs(scaled.mean - plain.mean) <= 3 * np.hypot(scaled.stderr, plain.stderr) + 0.02 * plain.mean

    def test_cross_bound(self):
        theta = UncertaintySet([[[1.0, 0.3], [0.3, 0.5]], [[0.6, -0.2], [-0.2, 1.2]]])
        table = kernel_weights(0.75, TimeGrid.uniform(64))
        sets = simulate_policies(theta, [ConstantVertex(0), ConstantVertex(1)], table, seed=3, n_paths=3000)
        s, t = 0.5, 1.0
        bound = 0.125 * (t**1.5 + s**1.5 - abs(t - s) ** 1.5) * 2.1
        for p in sets:
            est = empirical_second_moment(p, 0, 1, s, t)
            assert est.mean <= bound + 3 * est.stderr


class TestIncrements:
    def test_target_values(self):
        want = 0.5 * 2.25 * (1 - 0.5**1.5 - 0.75**1.5 + 0.25**1.5)
        assert increment_covariance_target(0.75, 2.25, 0, 0.25, 0.5, 1) == pytest.approx(want)
        assert increment_covariance_target(0.5, 1.0, 0, 0.25, 0.5, 1) == pytest.approx(0.0, abs=1e-15)

    def test_high_policy(self, high_low):
        est = increment_covariance(high_low[0], 0, 0.0, 0.25, 0.5, 1.0)
        assert within(est, increment_covariance_target(0.75, 2.25, 0, 0.25, 0.5, 1))

    def test_brownian_disjoint(self):
        table = kernel_weights(0.5, TimeGrid.uniform(16))
        p = simulate_gfbm(THETA, HIGH, table, seed=8, n_paths=4000)
        est = increment_covariance(p, 0, 0.0, 0.25, 0.5, 1.0)
        assert abs(est.mean) <= 3 * est.stderr

    @pytest.mark.parametrize("args", [(0.25, 0.25, 0.5, 1.0), (0.0, 0.5, 0.25, 1.0), (0.5, 1.0, 0.5, 1.0)])
    def test_order_rejected(self, high_low, args):
        with pytest.raises(ValueError):
            increment_covariance(high_low[0], 0, *args)


class TestAutocovariance:
    def test_frozen_targets(self):
        assert autocovariance_target(0.75, 1) == pytest.approx(0.414214, abs=1e-6)
        assert autocovariance_target(0.75, 2) == pytest.approx(0.269649, abs=1e-6)
        assert autocovariance_target(0.5, 3) == pytest.approx(0.0, abs=1e-15)
        assert autocovariance_target(0.75, 0, 2.0) == pytest.approx(2.0)

    @pytest.mark.parametrize("h", [0.5, 0.75])
    def test_unit_lag_series(self, h):
        g = TimeGrid.uniform(16 * 4, 16.0)
        sets = simulate_policies(THETA, [HIGH, LOW], kernel_weights(h, g), seed=9, n_paths=2000)
        for n in (1, 2):
            res = autocovariance(sets, 0, n)
            tol = 3 * res.rho_upper_stderr + 0.05 * abs(autocovariance_target(h, n, 2.25))
            assert abs(res.rho_upper - autocovariance_target(h, n, 2.25)) <= tol
            tol = 3 * res.rho_lower_stderr + 0.05 * abs(autocovariance_target(h, n, 0.25))
            assert abs(res.rho_lower - autocovariance_target(h, n, 0.25)) <= tol

    def test_short_horizon(self):
        p = line_path(8)
        with pytest.raises(ValueError):
            autocovariance(p, 0, 1)


class TestVariation:
    def test_line(self):
        assert p_variation(line_path(64), 2.0)[0] == pytest.approx(1 / 64)

    def test_bad_p(self):
        with pytest.raises(ValueError):
            p_variation(line_path(8), 0.0)

    def test_refinement_slope(self):
        p = exact_fbm_oracle(0.75, TimeGrid.uniform(2048), seed=12, n_paths=100)
        mesh, sums = p_variation_refinement(p, 2.0, [2**k for k in range(6, 12)])
        assert loglog_slope(mesh, sums.mean(axis=1)) == pytest.approx(0.5, abs=0.1)

    def test_trend_above_critical_p(self):
        p = exact_fbm_oracle(0.75, TimeGrid.uniform(2048), seed=13, n_paths=100)
        _, sums = p_variation_refinement(p, 2.0, [2**k for k in range(6, 12)])
        slopes = [np.polyfit(np.arange(sums.shape[0]), np.log(sums[:, m]), 1)[0] for m in range(100)]
        assert np.mean(np.array(slopes) < 0) >= 0.95

    @settings(max_examples=30, deadline=None)
    @given(c=st.floats(0.01, 100.0), p=st.floats(0.5, 4.0))
    def test_homogeneous(self, c, p):
        path = exact_fbm_oracle(0.75, TimeGrid.uniform(32), seed=0)
        scaled = GfbmPath(path.grid, c * path.values, path.hurst)
        assert p_variation(scaled, p)[0] == pytest.approx(c**p * p_variation(path, p)[0], rel=1e-9)


class TestRegularity:
    def test_line_exponent(self):
        assert holder_exponent(line_path(1024))[0] == pytest.approx(1.0, abs=1e-10)

    def test_small_grid_rejected(self):
        with pytest.raises(ValueError):
            holder_exponent(line_path(64))

    def test_calibration_window(self):
        p = exact_fbm_oracle(0.75, TimeGrid.uniform(4096), seed=14, n_paths=200)
        est = holder_exponent(p)
        assert np.mean((est >= 0.6) & (est <= 0.8)) >= 0.9

    def test_difference_quotient_growth(self):
        p = exact_fbm_oracle(0.75, TimeGrid.uniform(4096), seed=15, n_paths=100)
        levels = [2**k for k in range(8, 13)]
        dq = difference_quotient(p, levels)
        assert np.all(np.diff(np.log(dq), axis=0).sum(axis=0) > 0)
        slope = loglog_slope(levels, dq.mean(axis=1))
        assert slope == pytest.approx(1 - 0.75, abs=0.15)

    def test_line_quotient_flat(self):
        dq = difference_quotient(line_path(256), [16, 64, 256])
        np.testing.assert_allclose(dq[:, 0], 1.0)


class TestMomentScaling:
    def test_variance_law(self):
        p = exact_fbm_oracle(0.75, TimeGrid.uniform(64), seed=16, n_paths=4000)
        est = moment_scaling(p, 0, 2, 0.5)
        assert within(est, 0.5**1.5)

    def test_cubic_ratio(self):
        p = exact_fbm_oracle(0.75, TimeGrid.uniform(64), seed=17, n_paths=10000)
        ratio = moment_scaling(p, 0, 3, 1.0).mean / moment_scaling(p, 0, 3, 0.25).mean
        assert ratio == pytest.approx(0.25**-2.25, rel=0.1)

    def test_takes_upper(self, high_low):
        up = moment_scaling(high_low, 0, 2, 1.0)
        assert up == moment_scaling(high_low[0], 0, 2, 1.0)

    def test_bad_order(self, high_low):
        with pytest.raises(ValueError):
            moment_scaling(high_low[0], 0, 1.5, 1.0)
