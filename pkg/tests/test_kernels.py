"""Tests for the limit covariance kernels and Gaussian-process sampling."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.random import Generator, Philox

from karlin import kernels as kern
from karlin.errors import DomainError

SQRT_PI = math.sqrt(math.pi)


class TestKernelSpec:
    def test_alpha_families_require_alpha(self):
        with pytest.raises(DomainError):
            kern.KernelSpec("limit-z")
        with pytest.raises(DomainError):
            kern.KernelSpec("limit-u1", alpha=1.0)

    def test_fbm_range(self):
        assert kern.KernelSpec("fbm", h=1.0).hurst == 1.0
        with pytest.raises(DomainError):
            kern.KernelSpec("fbm", h=1.2)
        with pytest.raises(DomainError):
            kern.KernelSpec("fbm", h=0.0)

    def test_bifbm_extended_range(self):
        # h*k <= 1 admits h well above 1
        spec = kern.KernelSpec("bifbm", h=2.5, k=0.2)
        assert spec.hurst == pytest.approx(0.5)
        with pytest.raises(DomainError):
            kern.KernelSpec("bifbm", h=2.5, k=0.5)
        with pytest.raises(DomainError):
            kern.KernelSpec("bifbm", h=0.5, k=1.5)

    def test_hurst_exponents(self):
        assert kern.KernelSpec("limit-u", alpha=0.6).hurst == pytest.approx(0.3)
        assert kern.KernelSpec("limit-z", alpha=0.6).hurst == pytest.approx(0.3)
        assert kern.KernelSpec("fbm", h=0.7).hurst == pytest.approx(0.7)

    def test_unknown_family(self):
        with pytest.raises(DomainError):
            kern.KernelSpec("brownian-sheet", alpha=0.5)


class TestKernelValues:
    def test_standard_brownian_is_min(self):
        spec = kern.KernelSpec("fbm", h=0.5)
        s = np.array([0.2, 0.7, 1.3])
        t = np.array([0.5, 0.5, 0.5])
        np.testing.assert_allclose(kern.kernel_eval(spec, s, t), np.minimum(s, t), rtol=1e-15)

    def test_frozen_point_values(self):
        a = 0.5
        assert kern.kernel_eval(kern.KernelSpec("limit-z", alpha=a), 1.0, 1.0) == pytest.approx(
            SQRT_PI, rel=1e-14
        )
        assert kern.kernel_eval(kern.KernelSpec("limit-u2", alpha=a), 1.0, 1.0) == pytest.approx(
            SQRT_PI * 2.0**-1.5 * (2.0 - math.sqrt(2.0)), rel=1e-13
        )
        assert kern.kernel_eval(kern.KernelSpec("limit-u", alpha=a), 1.0, 1.0) == pytest.approx(
            SQRT_PI / math.sqrt(2.0), rel=1e-14
        )

    def test_bifbm_with_unit_k_is_fbm(self):
        s, t = np.meshgrid(np.linspace(0, 2, 9), np.linspace(0, 2, 9), indexing="ij")
        a = kern.kernel_eval(kern.KernelSpec("bifbm", h=0.3, k=1.0), s, t)
        b = kern.kernel_eval(kern.KernelSpec("fbm", h=0.3), s, t)
        np.testing.assert_allclose(a, b, atol=1e-14)

    def test_time_changed_bm_is_min_power(self):
        spec = kern.KernelSpec("tc-bm", alpha=0.7)
        s = np.array([0.4, 1.0, 3.0])
        t = np.array([2.0, 0.1, 3.0])
        np.testing.assert_allclose(
            kern.kernel_eval(spec, s, t), np.minimum(s, t) ** 0.7, rtol=1e-15
        )

    def test_zero_time_row_vanishes(self):
        for fam in kern.KERNEL_FAMILIES:
            if fam == "fbm":
                spec = kern.KernelSpec(fam, h=0.4)
            elif fam == "bifbm":
                spec = kern.KernelSpec(fam, h=0.4, k=0.9)
            else:
                spec = kern.KernelSpec(fam, alpha=0.45)
            got = kern.kernel_eval(spec, 0.0, 1.7)
            assert got == pytest.approx(0.0, abs=1e-14), fam

    def test_rejects_negative_times(self):
        spec = kern.KernelSpec("fbm", h=0.5)
        with pytest.raises(DomainError):
            kern.kernel_eval(spec, -0.1, 1.0)

    def test_broadcasting(self):
        spec = kern.KernelSpec("limit-z1", alpha=0.5)
        s = np.linspace(0.1, 1.0, 4).reshape(4, 1)
        t = np.linspace(0.1, 1.0, 3).reshape(1, 3)
        assert kern.kernel_eval(spec, s, t).shape == (4, 3)

    @given(st.floats(0.05, 0.95), st.floats(0.0, 4.0), st.floats(0.0, 4.0))
    @settings(max_examples=80, deadline=None)
    def test_symmetry(self, alpha, s, t):
        for fam in ("limit-z1", "limit-z2", "limit-u1", "limit-u2", "limit-z", "limit-u"):
            spec = kern.KernelSpec(fam, alpha=alpha)
            assert kern.kernel_eval(spec, s, t) == pytest.approx(
                kern.kernel_eval(spec, t, s), rel=1e-12, abs=1e-14
            )


class TestStructuralResiduals:
    GRID = np.linspace(0.0, 3.0, 13)

    @pytest.mark.parametrize("alpha", [0.15, 0.5, 0.85])
    def test_component_sums(self, alpha):
        assert kern.decomposition_residual(alpha, self.GRID) < 1e-12

    @pytest.mark.parametrize("alpha", [0.15, 0.5, 0.85])
    def test_odd_occupancy_matches_scaled_fbm(self, alpha):
        assert kern.lei_residual(alpha, self.GRID) < 1e-12

    @pytest.mark.parametrize("alpha", [0.15, 0.5, 0.85])
    def test_first_component_odd_part(self, alpha):
        assert kern.oddpart_residual(alpha, self.GRID) < 1e-12

    def test_self_similarity_all_families(self):
        grid = np.linspace(0.0, 2.0, 9)
        for fam in kern.KERNEL_FAMILIES:
            if fam == "fbm":
                spec = kern.KernelSpec(fam, h=0.35)
            elif fam == "bifbm":
                spec = kern.KernelSpec(fam, h=1.25, k=0.4)
            else:
                spec = kern.KernelSpec(fam, alpha=0.6)
            assert kern.self_similarity_residual(spec, grid, 2.7) < 1e-11, fam

    def test_z2_u2_constant_ratio(self):
        s, t = np.meshgrid(np.linspace(0, 2, 7), np.linspace(0, 2, 7), indexing="ij")
        for alpha in (0.2, 0.5, 0.8):
            z2 = kern.kernel_eval(kern.KernelSpec("limit-z2", alpha=alpha), s, t)
            u2 = kern.kernel_eval(kern.KernelSpec("limit-u2", alpha=alpha), s, t)
            np.testing.assert_allclose(z2, 2.0 ** (2.0 - alpha) * u2, atol=1e-13)


class TestQuadrature:
    def test_matches_closed_form(self):
        for alpha, s, t in ((0.5, 1.0, 1.0), (0.3, 0.5, 2.0), (0.8, 1.7, 0.2)):
            got = kern.u2_cov_quadrature(alpha, s, t)
            want = kern.kernel_eval(kern.KernelSpec("limit-u2", alpha=alpha), s, t)
            np.testing.assert_allclose(got, want, rtol=1e-10)

    def test_frozen_value(self):
        np.testing.assert_allclose(
            kern.u2_cov_quadrature(0.5, 1.0, 1.0),
            SQRT_PI * 2.0**-1.5 * (2.0 - math.sqrt(2.0)),
            rtol=1e-11,
        )


class TestCovMatrixAndSampling:
    def test_factor_reproduces_matrix(self):
        spec = kern.KernelSpec("limit-u", alpha=0.5)
        cm = kern.cov_matrix(spec, np.linspace(0.1, 2.0, 12))
        kern.chol_psd(cm)
        block = cm.matrix[1:, 1:]
        np.testing.assert_allclose(cm.factor @ cm.factor.T, block, atol=1e-10)
        assert cm.jitter == 0.0

    def test_min_eig_matches_numpy(self):
        spec = kern.KernelSpec("bifbm", h=1.0, k=0.5)
        cm = kern.cov_matrix(spec, np.linspace(0.2, 3.0, 9))
        assert kern.min_eig(cm) == pytest.approx(
            float(np.linalg.eigvalsh(cm.matrix)[0]), abs=1e-12
        )

    def test_sample_gp_shape_and_pinning(self):
        spec = kern.KernelSpec("fbm", h=0.5)
        cm = kern.cov_matrix(spec, np.linspace(0.25, 1.0, 4))
        rng = Generator(Philox(key=[5, 0]))
        paths = kern.sample_gp(cm, rng, n_paths=7)
        assert paths.shape == (7, 5)
        np.testing.assert_array_equal(paths[:, 0], 0.0)

    def test_sample_gp_covariance(self):
        spec = kern.KernelSpec("limit-z", alpha=0.5)
        times = np.array([0.3, 0.6, 1.0])
        cm = kern.cov_matrix(spec, times)
        rng = Generator(Philox(key=[6, 0]))
        paths = kern.sample_gp(cm, rng, n_paths=60_000)[:, 1:]
        emp = paths.T @ paths / paths.shape[0]
        # SE of each entry is ~ sqrt((K_ii K_jj + K_ij^2)/R) ~ 0.01
        np.testing.assert_allclose(emp, cm.matrix[1:, 1:], atol=0.06)

    def test_rejects_single_point_grid(self):
        spec = kern.KernelSpec("fbm", h=0.5)
        with pytest.raises(DomainError):
            kern.cov_matrix(spec, np.array([]))

    @given(st.floats(0.1, 0.9), st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_limit_families_are_psd(self, alpha, seed):
        rng = Generator(Philox(key=[seed, 3]))
        times = np.sort(rng.uniform(0.05, 3.0, 8))
        times = np.unique(times)
        for fam in ("limit-z1", "limit-z2", "limit-u1", "limit-u2", "limit-z", "limit-u"):
            cm = kern.cov_matrix(kern.KernelSpec(fam, alpha=alpha), times)
            dm = float(np.max(np.diag(cm.matrix)))
            assert kern.min_eig(cm) >= -1e-12 * max(dm, 1.0), fam
