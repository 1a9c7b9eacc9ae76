import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from fgbm.grid import TimeGrid
from fgbm.volterra import (
    HurstIndex,
    Regime,
    eval_kernel,
    kernel_antiderivative,
    kernel_constant,
    kernel_inner,
    kernel_inner_quad,
    kernel_weights,
)

GOLDEN = json.loads((Path(__file__).parent / "fixtures" / "kernel_golden.json").read_text())


def hyp_kernel(H, t, s):
    """Independent oracle: the inner integrals as Gauss hypergeometric functions."""
    z = (t - s) / s
    if H > 0.5:
        c = np.sqrt(H * (2 * H - 1) / special.beta(H - 0.5, 2 - 2 * H))
        a = H - 0.5
        return c * (t - s) ** a * special.hyp2f1(0.5 - H, a, a + 1, -z) / a
    d = np.sqrt(2 * H / ((1 - 2 * H) * special.beta(H + 0.5, 1 - 2 * H)))
    a = H + 0.5
    inner = (t - s) ** a * s ** (H - 1.5) * special.hyp2f1(1.5 - H, a, a + 1, -z) / a
    return d * ((t / s) ** (H - 0.5) * (t - s) ** (H - 0.5) - (H - 0.5) * s ** (0.5 - H) * inner)


class TestHurstIndex:
    def test_regimes(self):
        assert HurstIndex(0.3).regime is Regime.LOW
        assert HurstIndex(0.5).regime is Regime.HALF
        assert HurstIndex(0.75).regime is Regime.HIGH

    @pytest.mark.parametrize("h", [0.0, 1.0, -0.2, 1.5])
    def test_rejects_out_of_range(self, h):
        with pytest.raises(ValueError):
            HurstIndex(h)


class TestKernelConstant:
    def test_c_h(self):
        b = special.gamma(0.25) * special.gamma(0.5) / special.gamma(0.75)
        assert kernel_constant(0.75) == pytest.approx(np.sqrt(0.375 / b), rel=1e-14)
        assert kernel_constant(0.75) == pytest.approx(0.26741, abs=5e-6)

    def test_d_h(self):
        b = special.gamma(0.75) * special.gamma(0.5) / special.gamma(1.25)
        assert kernel_constant(0.25) == pytest.approx(np.sqrt(0.5 / (0.5 * b)), rel=1e-14)
        assert kernel_constant(0.25) == pytest.approx(0.64599, abs=1e-5)

    def test_half_rejected(self):
        with pytest.raises(ValueError):
            kernel_constant(0.5)

    @pytest.mark.parametrize("h", [0.1, 0.3, 0.45, 0.55, 0.75, 0.95])
    def test_beta_and_quad_agree(self, h):
        assert kernel_constant(h, "quad") == pytest.approx(kernel_constant(h, "beta"), rel=1e-10)


class TestEvalKernel:
    def test_golden_fixture(self):
        for row in GOLDEN["values"]:
            assert eval_kernel(row["h"], row["t"], row["s"]) == pytest.approx(row["value"], rel=1e-8)

    def test_golden_midpoint(self):
        # frozen before the table code existed
        assert eval_kernel(0.75, 1.0, 0.5) == pytest.approx(0.9375919636980571, rel=1e-12)
        assert hyp_kernel(0.75, 1.0, 0.5) == pytest.approx(0.9375919636980571, rel=1e-12)

    def test_half_branch(self):
        assert eval_kernel(0.5, 1.0, 0.3) == 1.0

    @pytest.mark.parametrize("h", [0.3, 0.75])
    def test_zero_on_and_above_diagonal(self, h):
        assert eval_kernel(h, 1.0, 1.0) == 0.0
        assert eval_kernel(h, 1.0, 1.5) == 0.0

    def test_vanishes_at_diagonal_high(self):
        # K_H(t, s) ~ c_H (t-s)^{H-1/2} / (H-1/2) as s -> t
        for gap in (1e-4, 1e-8, 1e-12):
            approx = kernel_constant(0.75) * gap**0.25 / 0.25
            assert eval_kernel(0.75, 1.0, 1.0 - gap) == pytest.approx(approx, rel=2e-3)

    def test_rejects_s_zero(self):
        with pytest.raises(ValueError):
            eval_kernel(0.75, 1.0, 0.0)

    @settings(max_examples=40, deadline=None)
    @given(
        h=st.floats(0.52, 0.98),
        t=st.floats(0.05, 5.0),
        frac=st.floats(0.01, 0.99),
    )
    def test_positive_high(self, h, t, frac):
        assert eval_kernel(h, t, frac * t) > 0.0

    @settings(max_examples=30, deadline=None)
    @given(
        h=st.sampled_from([0.2, 0.3, 0.4, 0.6, 0.75, 0.9]),
        t=st.floats(0.1, 3.0),
        frac=st.floats(0.05, 0.95),
    )
    def test_matches_hypergeometric_oracle(self, h, t, frac):
        s = frac * t
        assert eval_kernel(h, t, s) == pytest.approx(hyp_kernel(h, t, s), rel=1e-8)

    @pytest.mark.parametrize("h", [0.3, 0.4, 0.6, 0.75, 0.9])
    @pytest.mark.parametrize("a", [0.5, 2.0, 5.0])
    def test_scaling(self, h, a):
        for t, u in [(1.0, 0.3), (0.7, 0.6), (2.0, 0.1)]:
            lhs = eval_kernel(h, a * t, u)
            rhs = a ** (h - 0.5) * eval_kernel(h, t, u / a)
            assert lhs == pytest.approx(rhs, rel=1e-8)


class TestKernelInner:
    def test_examples(self):
        assert kernel_inner(0.3, 1.0, 1.0) == 1.0
        assert kernel_inner(0.75, 1.0, 2.0) == pytest.approx(0.5 * 2**1.5, rel=1e-12)
        assert kernel_inner(0.75, 0.0, 3.0) == 0.0

    @pytest.mark.parametrize("h", [0.3, 0.75])
    def test_quadrature_matches_closed_form(self, h):
        for s, t in [(0.4, 1.2), (1.0, 1.0), (2.0, 0.8)]:
            assert kernel_inner_quad(h, s, t) == pytest.approx(kernel_inner(h, s, t), rel=1e-4)

    @settings(max_examples=50, deadline=None)
    @given(h=st.floats(0.05, 0.95), s=st.floats(0.0, 3.0), t=st.floats(0.0, 3.0))
    def test_symmetric_and_bounded(self, h, s, t):
        v = kernel_inner(h, s, t)
        assert v == kernel_inner(h, t, s)
        # Cauchy-Schwarz on the Gram matrix
        assert abs(v) <= s**h * t**h * (1 + 1e-12) + 1e-300


class TestAntiderivative:
    @pytest.mark.parametrize("h", [0.3, 0.4, 0.6, 0.75, 0.9])
    def test_cell_integrals_vs_quad(self, h):
        t = 1.3
        for lo, hi in [(0.2, 0.5), (0.9, 1.2), (1.2, 1.3)]:
            ref, _ = integrate.quad(lambda s: eval_kernel(h, t, s), lo, hi, epsrel=1e-11, limit=200)
            got = kernel_antiderivative(h, t, hi) - kernel_antiderivative(h, t, lo)
            assert got == pytest.approx(ref, rel=1e-8)

    @pytest.mark.parametrize("h", [0.3, 0.75])
    def test_first_cell_vs_quad(self, h):
        # integrable singularity s^{-|H-1/2|} at 0, weighted on a short piece
        e = abs(h - 0.5)
        head, _ = integrate.quad(
            lambda s: eval_kernel(h, 1.0, max(s, 1e-100)) * max(s, 1e-100) ** e,
            0.0,
            1e-4,
            weight="alg",
            wvar=(-e, 0.0),
            epsrel=1e-11,
            limit=200,
        )
        body, _ = integrate.quad(lambda s: eval_kernel(h, 1.0, s), 1e-4, 0.1, epsrel=1e-11, limit=200)
        assert kernel_antiderivative(h, 1.0, 0.1) == pytest.approx(head + body, rel=1e-8)

    def test_half(self):
        assert kernel_antiderivative(0.5, 1.0, 0.3) == pytest.approx(0.3)
        assert kernel_antiderivative(0.5, 1.0, 2.0) == pytest.approx(1.0)


class TestKernelWeights:
    def test_half_all_ones(self):
        tab = kernel_weights(0.5, TimeGrid.uniform(16))
        w = tab.weights
        assert np.all(w[np.tril_indices(17, -1, 16)] == 1.0)
        assert np.all(w[np.triu_indices(17, 0, 16)] == 0.0)

    @pytest.mark.parametrize("h", [0.6, 0.75, 0.9])
    def test_positive_high(self, h):
        tab = kernel_weights(h, TimeGrid.uniform(64))
        lower = tab.weights[np.tril_indices(65, -1, 64)]
        assert np.all(lower > 0)

    def test_upper_triangle_zero(self):
        tab = kernel_weights(0.3, TimeGrid.uniform(32))
        assert np.all(tab.weights[np.triu_indices(33, 0, 32)] == 0.0)
        assert np.all(tab.weights[0] == 0.0)

    def test_cell_average_vs_quad(self):
        grid = TimeGrid.uniform(16)
        tab = kernel_weights(0.75, grid)
        k, j = 10, 4
        lo, hi = grid.times[j], grid.times[j + 1]
        ref, _ = integrate.quad(lambda s: eval_kernel(0.75, grid.times[k], s), lo, hi, epsrel=1e-11)
        assert tab.weights[k, j] == pytest.approx(ref / (hi - lo), rel=1e-8)

    def test_covariance_n256(self):
        grid = TimeGrid.uniform(256)
        tab = kernel_weights(0.75, grid)
        t = grid.times
        exact = 0.5 * (t[:, None] ** 1.5 + t[None, :] ** 1.5 - np.abs(t[:, None] - t[None, :]) ** 1.5)
        scale = np.maximum(t[:, None], t[None, :]) ** 1.5
        err = np.abs(tab.covariance() - exact)[1:, 1:] / scale[1:, 1:]
        assert err.max() <= 0.02
        assert tab.covariance()[-1, -1] == pytest.approx(1.0, rel=0.02)

    @pytest.mark.parametrize("h", [0.3, 0.4])
    def test_covariance_low_regime(self, h):
        grid = TimeGrid.uniform(256)
        tab = kernel_weights(h, grid)
        t = grid.times
        exact = 0.5 * (t[:, None] ** (2 * h) + t[None, :] ** (2 * h) - np.abs(t[:, None] - t[None, :]) ** (2 * h))
        assert np.abs(tab.covariance() - exact).max() < 0.01

    def test_nonuniform_grid(self):
        grid = TimeGrid(np.sort(np.r_[0.0, np.linspace(0.01, 1.0, 80) ** 1.5]))
        tab = kernel_weights(0.75, grid)
        assert tab.covariance()[-1, -1] == pytest.approx(1.0, rel=1e-10)

    def test_apply_shapes_and_half(self):
        grid = TimeGrid.uniform(8)
        inc = np.random.default_rng(1).standard_normal((3, 2, 8))
        out = kernel_weights(0.5, grid).apply(inc)
        assert out.shape == (3, 2, 9)
        np.testing.assert_allclose(out[..., 1:], np.cumsum(inc, axis=-1))
        with pytest.raises(ValueError):
            kernel_weights(0.75, grid).apply(inc[..., :5])

    def test_immutable(self):
        tab = kernel_weights(0.75, TimeGrid.uniform(8))
        with pytest.raises(ValueError):
            tab.weights[1, 0] = 3.0

    def test_csv(self, tmp_path):
        tab = kernel_weights(0.75, TimeGrid.uniform(4))
        tab.to_csv(tmp_path / "w.csv")
        lines = (tmp_path / "w.csv").read_text().splitlines()
        assert lines[0] == "k,j,weight"
        assert len(lines) == 1 + 4 * 5 // 2
