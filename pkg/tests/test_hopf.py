"""Cutoff bumps, discriminant terms, closed-form bounds, MC cross-check."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from newtonlab import (
    CutoffFunction,
    FourierMode,
    FourierPotential,
    InvalidAlphaError,
    InvalidSupportError,
    NotNormalizedError,
    SupportTooLowError,
    UnsupportedDimensionError,
    alpha_sweep,
    c1_constant,
    c2_constant,
    d_alpha,
    d_alpha_direct_mc,
    default_bump,
    make_bump,
    omega_n,
    term_a_bound,
    term_a_exact,
    term_b_bound,
    term_b_exact,
)
from conftest import random_potential


@pytest.fixture(scope="module")
def pot_t():
    """Compact 2-d potential with real time dependence, embedded as needed."""
    return FourierPotential(
        n=2,
        modes=(
            FourierMode(k=(1, 0), m=1, amplitude=0.25),
            FourierMode(k=(0, 1), m=0, amplitude=0.2, phase=0.3),
            FourierMode(k=(1, 1), m=0, amplitude=0.1, phase=-0.2),
        ),
    ).normalize()


@pytest.fixture(scope="module")
def bump():
    return make_bump(2.0, 3.0)


class TestBump:
    def test_support_and_peak(self, bump):
        assert bump.support == (2.0, 3.0)
        assert bump.value(2.5) == pytest.approx(1.0)
        assert bump.value(2.0) == 0.0
        assert bump.value(3.0) == 0.0
        assert bump.value(1.0) == 0.0
        assert bump.value(4.5) == 0.0

    def test_cubic_tangency_at_endpoints(self, bump):
        # rho ~ delta^3 at the left edge: doubling delta multiplies by 8,
        # which pins down two vanishing derivatives
        v1 = bump.value(2.0 + 1e-4)
        v2 = bump.value(2.0 + 2e-4)
        assert v2 / v1 == pytest.approx(8.0, rel=1e-3)
        assert bump.deriv(2.0) == 0.0
        assert bump.deriv(3.0) == 0.0
        assert bump.deriv(2.5) == pytest.approx(0.0, abs=1e-14)

    def test_derivative_matches_finite_differences(self, bump):
        xs = np.linspace(2.05, 2.95, 19)
        h = 1e-7
        fd = (bump.value(xs + h) - bump.value(xs - h)) / (2 * h)
        np.testing.assert_allclose(bump.deriv(xs), fd, atol=1e-5)
        np.testing.assert_allclose(bump.sq_deriv(xs),
                                   2 * bump.value(xs) * bump.deriv(xs))

    def test_profile_coefficients_reproduce_values(self, bump):
        coeffs = bump.profile_coefficients()
        xs = np.linspace(2.01, 2.99, 17)
        poly = np.polynomial.polynomial.polyval(xs, coeffs)
        np.testing.assert_allclose(poly, bump.value(xs), atol=1e-12)

    def test_stretch_is_exact_reparametrization(self, bump):
        for alpha in (0.5, 0.1, 0.013):
            st = bump.stretched(alpha)
            assert st.support == (2.0 / alpha, 3.0 / alpha)
            xs = np.linspace(1.9 / alpha, 3.1 / alpha, 33)
            np.testing.assert_allclose(st.value(xs), bump.value(alpha * xs),
                                       rtol=1e-12, atol=1e-15)
            np.testing.assert_allclose(st.deriv(xs),
                                       alpha * bump.deriv(alpha * xs),
                                       rtol=1e-12, atol=1e-15)

    def test_invalid_parameters(self, bump):
        with pytest.raises(InvalidSupportError):
            make_bump(3.0, 2.0)
        with pytest.raises(InvalidSupportError):
            make_bump(0.0, 1.0)
        with pytest.raises(InvalidAlphaError):
            bump.stretched(1.5)
        with pytest.raises(InvalidAlphaError):
            bump.stretched(0.0)

    def test_default_bump_sits_above_shell_and_potential(self, pot_t):
        rho = default_bump(pot_t, r=0.5)
        lo = 0.5 * 0.25 + pot_t.upper_bound() + 1.0
        assert rho.a == pytest.approx(lo)
        assert rho.b == pytest.approx(lo + 1.0)


class TestConstants:
    def test_sphere_measures(self):
        assert omega_n(1) == pytest.approx(2.0)
        assert omega_n(2) == pytest.approx(2 * math.pi)
        assert omega_n(3) == pytest.approx(4 * math.pi)
        assert omega_n(4) == pytest.approx(2 * math.pi ** 2)
        with pytest.raises(UnsupportedDimensionError):
            omega_n(0)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_c1_against_adaptive_quadrature(self, bump, n):
        expo = 0.5 * (n - 2)
        ref, _ = quad(lambda x: bump.deriv(x) ** 2 * (2 * x) ** expo, 2.0, 3.0)
        assert c1_constant(bump, n) == pytest.approx(ref, rel=1e-9)

    @pytest.mark.parametrize("n,upper", [(3, 0.0), (4, 0.0), (5, 0.7), (6, 1.3)])
    def test_c2_against_adaptive_quadrature(self, bump, n, upper):
        if n == 3:
            f = lambda x: bump.value(x) ** 2 * (2 * x) ** -0.5
        elif n == 4:
            f = lambda x: bump.value(x) ** 2
        else:
            f = lambda x: bump.value(x) ** 2 * (2 * (x - upper)) ** (0.5 * (n - 4))
        ref, _ = quad(f, 2.0, 3.0)
        assert c2_constant(bump, n, upper) == pytest.approx(ref, rel=1e-9)

    def test_c2_dimension_and_support_guards(self, bump):
        with pytest.raises(UnsupportedDimensionError):
            c2_constant(bump, 2)
        with pytest.raises(SupportTooLowError):
            c2_constant(bump, 5, upper=2.5)


class TestTerms:
    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_exact_terms_respect_their_bounds(self, pot_t, bump, n):
        for alpha in (0.4, 0.1, 0.02):
            ra = bump.stretched(alpha)
            a_ex = term_a_exact(pot_t, ra, n)
            b_ex = term_b_exact(pot_t, ra, n)
            assert a_ex >= 0.0
            assert b_ex <= 0.0
            assert a_ex <= term_a_bound(pot_t, bump, alpha, n) * (1 + 1e-10)
            assert b_ex <= term_b_bound(pot_t, bump, alpha, n) * (1 - 1e-10) \
                or b_ex <= term_b_bound(pot_t, bump, alpha, n) + 1e-15

    def test_bounds_become_tight_for_small_potentials(self, bump):
        tiny = FourierPotential(
            n=3, modes=(FourierMode(k=(1, 0, 0), m=1, amplitude=1e-6),)
        ).normalize()
        alpha = 0.2
        ra = bump.stretched(alpha)
        a_ex = term_a_exact(tiny, ra, 3)
        a_bd = term_a_bound(tiny, bump, alpha, 3)
        assert a_ex / a_bd == pytest.approx(1.0, abs=1e-4)

    def test_term_b_is_exactly_zero_in_dimension_two(self, pot_t, bump):
        ra = bump.stretched(0.1)
        assert term_b_exact(pot_t, ra, 2) == 0.0
        assert term_b_bound(pot_t, bump, 0.1, 2) == 0.0

    def test_term_b_equals_bound_in_dimension_four(self, pot_t, bump):
        # the energy weight (2(E-u))^0 is constant, so dropping u is free
        for alpha in (0.3, 0.05):
            b_ex = term_b_exact(pot_t, bump.stretched(alpha), 4)
            b_bd = term_b_bound(pot_t, bump, alpha, 4)
            assert b_ex == pytest.approx(b_bd, rel=1e-10)

    def test_autonomous_term_a_is_zero(self, bump):
        auto = FourierPotential(
            n=3, modes=(FourierMode(k=(1, 1, 0), m=0, amplitude=0.3),)
        ).normalize()
        assert term_a_exact(auto, bump.stretched(0.2), 3) == 0.0
        assert term_a_bound(auto, bump, 0.2, 3) == 0.0

    def test_requires_normalized_potential(self, bump):
        raw = FourierPotential(
            n=2, modes=(FourierMode(k=(1, 0), m=1, amplitude=0.2),))
        with pytest.raises(NotNormalizedError):
            term_a_exact(raw, bump.stretched(0.2), 3)

    def test_support_must_clear_the_potential_range(self, pot_t):
        low = make_bump(0.05, 0.3)
        with pytest.raises(SupportTooLowError):
            term_a_exact(pot_t, low, 3)


class TestDiscriminant:
    def test_report_is_internally_consistent(self, pot_t, bump):
        rep = d_alpha(pot_t, bump, 0.1, n=3)
        assert rep.d_alpha == pytest.approx(rep.term_a + rep.term_b)
        assert rep.d_bound == pytest.approx(rep.term_a_bound + rep.term_b_bound)
        assert rep.stretched_support == (bump.a / 0.1, bump.b / 0.1)
        assert rep.quadrature_error < 1e-6 * max(1.0, abs(rep.d_alpha))
        assert rep.l2_ut == pytest.approx(pot_t.l2_ut())

    def test_negative_for_small_alpha_in_dimension_three(self, pot_t, bump):
        rep = d_alpha(pot_t, bump, 0.002, n=3)
        assert rep.d_alpha < 0.0
        assert abs(rep.d_alpha) > rep.quadrature_error

    def test_autonomous_potential_every_alpha_negative(self, bump):
        auto = FourierPotential(
            n=3, modes=(FourierMode(k=(1, 0, 0), m=0, amplitude=0.3),)
        ).normalize()
        for alpha in (0.5, 0.1):
            rep = d_alpha(auto, bump, alpha, n=3)
            assert rep.term_a == 0.0
            assert rep.d_alpha < 0.0

    def test_dimension_guard(self, pot_t, bump):
        with pytest.raises(UnsupportedDimensionError):
            d_alpha(pot_t, bump, 0.1, n=1)

    def test_fixed_grid_override_matches_adaptive(self, pot_t, bump):
        from newtonlab import PhaseGrid
        rep = d_alpha(pot_t, bump, 0.2, n=3)
        grid = PhaseGrid.for_potential(pot_t, points_per_freq=16)
        ra = bump.stretched(0.2)
        a_fixed = term_a_exact(pot_t, ra, 3, grid=grid)
        assert a_fixed == pytest.approx(rep.term_a, rel=1e-8)


class TestMonteCarlo:
    def test_matches_reduced_quadrature_within_3_sigma(self, pot_t, bump):
        alpha = 0.15
        rep = d_alpha(pot_t, bump, alpha, n=3)
        mc = d_alpha_direct_mc(pot_t, bump, alpha, samples=200_000, seed=11, n=3)
        for ex, est, se in [
            (rep.term_a, mc.term_a, mc.term_a_stderr),
            (rep.term_b, mc.term_b, mc.term_b_stderr),
            (rep.d_alpha, mc.value, mc.stderr),
        ]:
            assert abs(est - ex) <= 3.0 * se + rep.quadrature_error

    def test_annulus_bounds_cover_the_support(self, pot_t, bump):
        mc = d_alpha_direct_mc(pot_t, bump, 0.2, samples=1000, seed=3, n=3)
        ra = bump.stretched(0.2)
        assert mc.r_lo == pytest.approx(
            math.sqrt(2 * (ra.a - pot_t.upper_bound())))
        assert mc.r_hi == pytest.approx(math.sqrt(2 * ra.b))
        assert mc.volume == pytest.approx(
            omega_n(3) / 3 * (mc.r_hi ** 3 - mc.r_lo ** 3))

    def test_deterministic_across_thread_counts(self, pot_t, bump):
        a = d_alpha_direct_mc(pot_t, bump, 0.2, samples=150_000, seed=5, n=3,
                              threads=1)
        b = d_alpha_direct_mc(pot_t, bump, 0.2, samples=150_000, seed=5, n=3,
                              threads=4)
        assert a.value == b.value
        assert a.stderr == b.stderr

    def test_seed_changes_the_estimate(self, pot_t, bump):
        a = d_alpha_direct_mc(pot_t, bump, 0.2, samples=10_000, seed=1, n=3)
        b = d_alpha_direct_mc(pot_t, bump, 0.2, samples=10_000, seed=2, n=3)
        assert a.value != b.value


class TestSweep:
    def test_slopes_recover_scaling_exponents(self, pot_t, bump):
        alphas = np.geomspace(1e-3, 1e-1, 10)
        rep = alpha_sweep(pot_t, bump, alphas, n=3)
        assert rep.slope_term_a == pytest.approx(0.5, abs=0.05)
        assert rep.slope_term_b == pytest.approx(-0.5, abs=0.05)
        assert rep.expected_slope_a == 0.5
        assert rep.expected_slope_b == -0.5

    def test_largest_negative_alpha_reported(self, pot_t, bump):
        alphas = np.geomspace(1e-3, 0.5, 12)
        rep = alpha_sweep(pot_t, bump, alphas, n=3)
        assert rep.largest_negative_alpha is not None
        picked = rep.largest_negative_alpha
        for r in rep.reports:
            if r.alpha <= picked:
                assert r.d_alpha < 0.0
            if r.alpha == picked:
                assert abs(r.d_alpha) > r.quadrature_error

    def test_empty_alpha_list_rejected(self, pot_t, bump):
        from newtonlab import ValidationFailure
        with pytest.raises(ValidationFailure):
            alpha_sweep(pot_t, bump, [], n=3)
