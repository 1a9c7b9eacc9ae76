import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fgbm.gfbm import GfbmPath, exact_fbm_oracle, p_variation
from fgbm.grid import TimeGrid
from fgbm.priors import ConstantVertex, UncertaintySet
from fgbm.volterra import HurstIndex
from fgbm.youngsde import (
    SdeSpec,
    SolverError,
    arbitrage_experiment,
    ito_residual,
    residual_refinement,
    solve_sde,
    unit_volatility_policy,
)

THETA = UncertaintySet.interval(0.25, 2.25)


@pytest.fixture(scope="module")
def fbm():
    return exact_fbm_oracle(0.75, TimeGrid.uniform(2048), seed=31, n_paths=40)


def smooth_driver(fn, n, h=0.75):
    g = TimeGrid.uniform(n)
    return GfbmPath(g, fn(g.times)[None, None, :], HurstIndex(h))


class TestSpec:
    def test_alpha_window(self):
        spec = SdeSpec.geometric(1.0)
        assert spec.check_order(0.75).alpha == pytest.approx(0.375)
        rough = SdeSpec(lambda t, x: 0, lambda t, x: 1, [0.0], beta=0.3)
        with pytest.raises(ValueError, match="alpha_0"):
            rough.check_order(0.75)

    def test_positive_constants(self):
        with pytest.raises(ValueError):
            SdeSpec(lambda t, x: 0, lambda t, x: 1, [0.0], lipschitz=0.0)


class TestSolver:
    def test_zero_coefficients(self, fbm):
        spec = SdeSpec.constant([0.0], [[0.0]], [2.5])
        assert np.all(solve_sde(spec, fbm).values == 2.5)

    def test_unit_drift(self, fbm):
        spec = SdeSpec.constant([1.0], [[0.0]], [0.5])
        x = solve_sde(spec, fbm).values[0, 0]
        np.testing.assert_allclose(x, 0.5 + fbm.grid.times, atol=1e-12)

    def test_additive_noise_exact(self, fbm):
        spec = SdeSpec.constant([0.0], [[3.0]], [1.0])
        np.testing.assert_allclose(solve_sde(spec, fbm).values, 1.0 + 3.0 * fbm.values, atol=1e-12)

    def test_rejects_low_hurst(self):
        w = exact_fbm_oracle(0.5, TimeGrid.uniform(16), seed=0)
        with pytest.raises(ValueError, match="H > 1/2"):
            solve_sde(SdeSpec.geometric(1.0), w)

    def test_noise_dimension(self, fbm):
        spec = SdeSpec.constant([0.0], [[1.0, 1.0]], [0.0])
        with pytest.raises(ValueError):
            solve_sde(spec, fbm)

    def test_blow_up_reports_step(self):
        drv = smooth_driver(lambda t: t, 64)
        spec = SdeSpec(lambda t, x: x**2 * 1e100, lambda t, x: 0.0, [1e100])
        # 1e100 + 1e300/64 is still finite; the square overflows on step 2
        with pytest.raises(SolverError, match="step 2 "), np.errstate(over="ignore"):
            solve_sde(spec, drv)

    def test_geometric(self, fbm):
        x = solve_sde(SdeSpec.geometric(1.0), fbm).terminal[:, 0]
        ref = np.exp(fbm.values[:, 0, -1])
        assert np.max(np.abs(x - ref) / ref) < 0.05

    def test_geometric_convergence(self, fbm):
        spec = SdeSpec.geometric(0.8)

        def err(p):
            ref = np.exp(0.8 * p.values[:, 0, -1])
            return np.abs(solve_sde(spec, p).terminal[:, 0] - ref) / ref

        _, _, slope = residual_refinement(fbm, [2**k for k in range(6, 12)], err)
        assert slope >= 0.4

    def test_smooth_driver_first_order(self):
        # dX = X dg with g = sin: X = exp(sin t)
        errs = []
        for n in (64, 128, 256, 512):
            drv = smooth_driver(np.sin, n)
            x = solve_sde(SdeSpec.geometric(1.0), drv).values[0, 0]
            errs.append(np.max(np.abs(x - np.exp(np.sin(drv.grid.times)))))
        errs = np.array(errs)
        assert np.all(errs * np.array([64, 128, 256, 512]) < 2.0)
        assert np.polyfit(np.log([64, 128, 256, 512]), np.log(errs), 1)[0] == pytest.approx(-1, abs=0.1)

    def test_two_dimensional_rotation(self):
        # dX = J X dg with skew J and g(t) = t: rotation by angle t
        J = np.array([[0.0, -1.0], [1.0, 0.0]])
        spec = SdeSpec(lambda t, x: 0.0, lambda t, x: (x @ J.T)[:, :, None], [1.0, 0.0], noise_dim=1)
        drv = smooth_driver(lambda t: t, 4096)
        x = solve_sde(spec, drv).terminal[0]
        np.testing.assert_allclose(x, [np.cos(1), np.sin(1)], atol=1e-3)


class TestIto:
    def test_constant_and_identity(self, fbm):
        assert np.all(ito_residual(lambda x: 0 * x + 3, lambda x: 0 * x, fbm) == 0)
        assert np.max(ito_residual(lambda x: x, lambda x: 1 + 0 * x, fbm)) < 1e-12

    def test_square_is_quadratic_variation(self, fbm):
        res = ito_residual(lambda x: x**2, lambda x: 2 * x, fbm)
        np.testing.assert_allclose(res, p_variation(fbm, 2.0), rtol=1e-9)

    def test_square_rate(self, fbm):
        _, _, slope = residual_refinement(
            fbm, [2**k for k in range(6, 12)], lambda p: ito_residual(lambda x: x**2, lambda x: 2 * x, p)
        )
        assert slope == pytest.approx(0.5, abs=0.1)

    def test_time_dependent(self):
        # f(t, x) = t x on the driver g(t) = t: t^2 = int t dt + int t dg
        drv = smooth_driver(lambda t: t, 1000)
        res = ito_residual(lambda t, x: t * x, lambda t, x: t + 0 * x, drv, dt_f=lambda t, x: x)
        assert res[0] == pytest.approx(1e-3, rel=1e-6)

    def test_exponential_coherence(self, fbm):
        scale = np.exp(fbm.values[:, 0, :]).max(axis=-1)
        res = ito_residual(np.exp, np.exp, fbm) / scale
        sde = solve_sde(SdeSpec.geometric(1.0), fbm).values[:, 0, :]
        sde_err = np.abs(sde - np.exp(fbm.values[:, 0, :])).max(axis=-1) / scale
        assert res.max() < 0.05 and sde_err.max() < 0.05

    def test_rejects_brownian(self):
        w = exact_fbm_oracle(0.5, TimeGrid.uniform(16), seed=0)
        with pytest.raises(ValueError):
            ito_residual(np.exp, np.exp, w)

    @settings(max_examples=20, deadline=None)
    @given(a=st.floats(-5, 5), b=st.floats(-5, 5))
    def test_affine_exact(self, a, b):
        p = exact_fbm_oracle(0.75, TimeGrid.uniform(64), seed=1)
        assert ito_residual(lambda x: a * x + b, lambda x: a + 0 * x, p)[0] < 1e-12 * (1 + abs(a))


class TestArbitrage:
    def test_unit_policy(self):
        pol = unit_volatility_policy(THETA)
        assert np.isclose(THETA.mix(pol.weights)[0, 0], 1.0)
        with pytest.raises(ValueError):
            unit_volatility_policy(UncertaintySet.interval(2.0, 3.0))

    def test_triple(self):
        pols = [ConstantVertex(0), ConstantVertex(1), unit_volatility_policy(THETA)]
        rep = arbitrage_experiment(THETA, pols, TimeGrid.uniform(256), 0.75, 2000, seed=4)
        assert rep.initial_wealth == 0.0
        assert rep.min_wealth >= -1e-12
        for p in rep.per_policy:
            assert p.fraction_positive > 0
            assert p.algebra_error < 1e-12
        assert rep.policy("vertex[1]").terminal_mean == pytest.approx(2.25, rel=0.1)
        assert rep.residual_slope == pytest.approx(0.5, abs=0.1)

    def test_rejects_multidimensional(self):
        theta = UncertaintySet([np.eye(2)])
        with pytest.raises(ValueError):
            arbitrage_experiment(theta, [ConstantVertex(0)], TimeGrid.uniform(32), 0.75, 10, seed=0)
