import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kquad import kernels
from kquad.errors import DimensionMismatchError, UnsupportedSmoothnessError

# Truncated Fourier-series oracle: k_s(lag) = 1 + 2 sum_m m^{-2s} cos(2 pi m lag).
def series_value(s, lag, terms=10**5):
    m = np.arange(1, terms + 1, dtype=float)
    return 1.0 + 2.0 * np.sum(m ** (-2 * s) * np.cos(2 * np.pi * m * lag))


# Frozen oracle outputs (series with 10^6 terms).
SERIES_S1_DIAG = 4.289866133697453
SERIES_S1_HALF = -0.6449340668472261
SERIES_S3_DIAG = 3.0346861239688976


class TestSobolev:
    def test_diag_s1_matches_series(self):
        val = kernels.sobolev_kernel(1, 0.25, 0.25)
        assert val == pytest.approx(1 + math.pi**2 / 3, rel=1e-14)
        assert abs(val - SERIES_S1_DIAG) <= 1e-5

    def test_lag_half_s1_matches_series(self):
        # 1 + 2 pi^2 B2(0.5) = 1 - pi^2/6; the series at lag 1/2 alternates.
        val = kernels.sobolev_kernel(1, 0.0, 0.5)
        assert val == pytest.approx(1 - math.pi**2 / 6, rel=1e-14)
        assert abs(val - SERIES_S1_HALF) <= 1e-8

    def test_diag_s3_is_one_plus_two_zeta6(self):
        val = kernels.sobolev_kernel(3, 0.7, 0.7)
        assert val == pytest.approx(1 + 2 * math.pi**6 / 945, rel=1e-14)
        assert abs(val - SERIES_S3_DIAG) <= 1e-10

    @given(s=st.sampled_from([1, 2, 3]),
           x=st.floats(-5, 5, allow_nan=False),
           y=st.floats(-5, 5, allow_nan=False))
    @settings(max_examples=200, deadline=None)
    def test_symmetry(self, s, x, y):
        a = kernels.sobolev_kernel(s, x, y)
        b = kernels.sobolev_kernel(s, y, x)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)

    def test_periodicity(self):
        for s in (1, 2, 3):
            assert kernels.sobolev_kernel(s, 0.3, 0.1) == pytest.approx(
                kernels.sobolev_kernel(s, 1.3, 0.1), rel=1e-12)

    @pytest.mark.parametrize("s", [0, 4, -1])
    def test_unsupported_smoothness(self, s):
        with pytest.raises(UnsupportedSmoothnessError):
            kernels.sobolev_kernel(s, 0.0, 0.0)
        with pytest.raises(UnsupportedSmoothnessError):
            kernels.sobolev(s)

    def test_closed_form_vs_series_property(self, rng):
        lags = rng.random(1000)
        modes = np.arange(1, 10**5 + 1, dtype=float)
        for s in (1, 2, 3):
            closed = kernels.sobolev_value(s, lags)
            coeff = modes ** (-2 * s)
            approx = np.empty_like(lags)
            for a in range(0, len(lags), 50):
                block = lags[a:a + 50]
                approx[a:a + 50] = 1.0 + 2.0 * (
                    np.cos(2 * np.pi * block[:, None] * modes[None, :]) @ coeff)
            assert np.all(np.abs(closed - approx) <= 1e-4 * (1 + np.abs(closed)))


class TestProductKernel:
    def test_diagonal_is_cube_of_1d(self):
        x = np.array([0.2, 0.5, 0.9])
        base = kernels.sobolev(1)
        val = kernels.product_kernel(base, x, x)
        assert val == pytest.approx(78.94630858187922, rel=1e-12)
        spec = kernels.sobolev_product(1, 3)
        assert spec.evaluate(x, x) == pytest.approx(val, rel=1e-12)

    def test_constant_base_gives_one(self):
        const = kernels.blackbox(lambda x, y: 1.0, dim=1, diagonal_bound=1.0)
        assert kernels.product_kernel(const, [0.1, 0.7, 0.3], [0.9, 0.2, 0.4]) == 1.0

    def test_coordinate_permutation_invariance(self, rng):
        spec = kernels.sobolev_product(2, 3)
        x = rng.random(3)
        y = rng.random(3)
        perm = np.array([2, 0, 1])
        assert spec.evaluate(x, y) == pytest.approx(
            spec.evaluate(x[perm], y[perm]), rel=1e-12)

    def test_dimension_mismatch(self):
        base = kernels.sobolev(1)
        with pytest.raises(DimensionMismatchError):
            kernels.product_kernel(base, [0.1, 0.2], [0.1, 0.2, 0.3])
        spec = kernels.sobolev_product(1, 3)
        with pytest.raises(DimensionMismatchError):
            spec.evaluate(np.array([0.1, 0.2]), np.array([0.3, 0.4]))


class TestMatern52:
    def test_diagonal_is_one(self):
        assert kernels.matern52_kernel(2.0, [0.3, 0.4], [0.3, 0.4]) == 1.0

    def test_monotone_radial_profile(self):
        r = np.linspace(0.0, 10.0, 200)
        vals = kernels.matern52_value(2.0, r)
        assert np.all(np.diff(vals) < 0)

    def test_value_bandwidth2_distance2(self):
        # (1 + sqrt5 + 5/3) exp(-sqrt5), cross-checked at 30 digits.
        val = kernels.matern52_kernel(2.0, [0.0, 0.0], [2.0, 0.0])
        assert val == pytest.approx(0.5239941088318203, rel=1e-13)

    def test_bandwidth_must_be_positive(self):
        with pytest.raises(ValueError):
            kernels.matern52_kernel(0.0, [0.0], [1.0])
        with pytest.raises(ValueError):
            kernels.matern52(-1.0)


class TestGramPSD:
    @pytest.mark.parametrize("make", [
        lambda: kernels.sobolev(1), lambda: kernels.sobolev(3),
        lambda: kernels.sobolev_product(1, 3),
        lambda: kernels.matern52(2.0, 2), lambda: kernels.gaussian(0.5, 2)])
    def test_gram_psd_50_random_sets(self, make, rng):
        spec = make()
        for _ in range(50):
            pts = rng.random((8, spec.dim))
            G = spec.gram(pts)
            lam = np.linalg.eigvalsh(G)
            assert lam.min() >= -1e-8 * np.trace(G)

    def test_symmetry_within_1e12(self, rng):
        for spec in (kernels.sobolev(2), kernels.matern52(2.0, 3)):
            for _ in range(20):
                x = rng.random(spec.dim)
                y = rng.random(spec.dim)
                a = spec.evaluate(x, y)
                b = spec.evaluate(y, x)
                assert abs(a - b) <= 1e-12 * (1 + abs(a))


def test_product_trace_matches_analytic():
    # trace of the 3-d product operator = (1 + 2 zeta(2s))^3; the diagonal is
    # constant so the midpoint rule must hit it to high relative accuracy.
    for s in (1, 2, 3):
        spec = kernels.sobolev_product(s, 3)
        g = (np.arange(24) + 0.5) / 24
        pts = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
        numeric = float(np.mean(spec.diag_batch(pts)))
        analytic = (1 + 2 * kernels.ZETA[2 * s]) ** 3
        assert numeric == pytest.approx(analytic, rel=1e-6)
        assert spec.trace_T == pytest.approx(analytic, rel=1e-12)


def test_blackbox_requires_positive_bound():
    with pytest.raises(ValueError):
        kernels.blackbox(lambda x, y: 1.0, dim=1, diagonal_bound=0.0)


def test_blackbox_rejects_non_finite_values():
    spec = kernels.blackbox(lambda x, y: float("nan"), dim=1, diagonal_bound=1.0)
    with pytest.raises(ValueError):
        spec.evaluate(np.array([0.1]), np.array([0.2]))


def test_from_gram_checks_shape_and_symmetry():
    with pytest.raises(ValueError):
        kernels.from_gram(np.ones((2, 3)))
    with pytest.raises(ValueError):
        kernels.from_gram(np.array([[1.0, 0.5], [0.2, 1.0]]))


def test_kernel_by_name():
    spec = kernels.by_name("sobolev", {"s": 3, "dim": 1})
    assert spec.name == "sobolev" and spec.params["s"] == 3
    prod = kernels.by_name("sobolev", {"s": 1, "dim": 3})
    assert prod.name == "sobolev-product"
    with pytest.raises(KeyError):
        kernels.by_name("laplace", {})


def test_eigenvalue_law_sobolev():
    spec = kernels.sobolev(2)
    lam = spec.eigenvalues
    assert lam(1) == 1.0
    assert lam(2) == lam(3) == 1.0
    assert lam(4) == lam(5) == pytest.approx(2.0**-4)
    vals = np.array([lam(i) for i in range(1, 200)])
    assert np.all(np.diff(vals) <= 0)
