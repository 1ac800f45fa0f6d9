import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from picardop.errors import ConfigurationError, DomainError
from picardop.semigroup import (
    SemigroupKind,
    _phi1,
    _phi2,
    apply_semigroup,
    duhamel,
    heat_multiplier,
)
from picardop.spectral import (
    GridSpec,
    TorusField,
    TrajectoryField,
    forward,
    inverse,
    sup_norm,
    to_spectrum,
)

from conftest import band_limited

KINDS = [SemigroupKind.exact(), SemigroupKind.truncated(16)]


class TestHeatMultiplier:
    def test_identity_at_zero_time(self):
        assert heat_multiplier((3, -2), 0.0) == 1.0

    def test_mean_conserved(self):
        assert heat_multiplier(0, 7.5) == 1.0

    def test_value(self):
        # e^{-0.4}
        assert heat_multiplier(2, 0.1) == pytest.approx(0.6703200460356393, abs=1e-15)

    def test_negative_time(self):
        with pytest.raises(DomainError):
            heat_multiplier(1, -0.1)


class TestApplySemigroup:
    def test_identity(self, rng):
        spec = GridSpec(1, 64)
        f = band_limited(spec, rng, 10)
        np.testing.assert_allclose(apply_semigroup(SemigroupKind.exact(), f, 0.0).values, f.values, atol=1e-14)

    @pytest.mark.parametrize("kind", KINDS, ids=str)
    def test_constant_invariant(self, kind):
        spec = GridSpec(1, 64)
        out = apply_semigroup(kind, TorusField.constant(spec, 0.8), 0.7)
        np.testing.assert_allclose(out.values, 0.8, atol=1e-15)

    def test_cosine_decay(self):
        spec = GridSpec(1, 32)
        f = TorusField.from_function(spec, np.cos)
        out = apply_semigroup(SemigroupKind.exact(), f, 0.5)
        np.testing.assert_allclose(out.values, math.exp(-0.5) * np.cos(spec.coordinates()), atol=1e-15)

    def test_truncated_mask_applied_once(self):
        spec = GridSpec(1, 32)
        f = TorusField.from_function(spec, np.cos)
        out = apply_semigroup(SemigroupKind.truncated(1), f, 0.5)
        np.testing.assert_allclose(out.values, 0.5 * math.exp(-0.5) * f.values, atol=1e-15)

    def test_rank_too_large_for_grid(self):
        with pytest.raises(ConfigurationError):
            apply_semigroup(SemigroupKind.truncated(40), TorusField.zeros(GridSpec(1, 32)), 0.1)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0, 0.5), st.floats(0, 0.5), st.integers(0, 9999))
    def test_semigroup_property(self, t1, t2, seed):
        spec = GridSpec(2, 16)
        f = band_limited(spec, np.random.default_rng(seed), 5)
        ex = SemigroupKind.exact()
        a = apply_semigroup(ex, f, t1 + t2)
        b = apply_semigroup(ex, apply_semigroup(ex, f, t1), t2)
        assert np.max(np.abs(a.values - b.values)) <= 1e-12

    @pytest.mark.parametrize("kind", KINDS, ids=str)
    def test_sup_contractive(self, rng, kind):
        # Band-limited inputs, where the grid operator is the continuum heat flow.
        spec = GridSpec(1, 64)
        c = np.zeros((1000, 64), complex)
        idx = np.r_[0:9, 56:64]
        c[:, idx] = rng.standard_normal((1000, 17)) + 1j * rng.standard_normal((1000, 17))
        v = np.real(np.fft.ifft(c, axis=1))
        for t in np.linspace(0.0, 0.5, 11):
            out = inverse(forward(v, spec) * np.exp(-t * spec.wavenumber_sq) * kind.mask(spec), spec)
            assert np.all(np.max(np.abs(out), axis=1) <= np.max(np.abs(v), axis=1) + 1e-12)


class TestPhiFunctions:
    def test_continuity_across_series_cutoff(self):
        z = np.array([0.0999999, 0.1000001])
        assert abs(_phi1(z)[0] - _phi1(z)[1]) < 1e-6
        assert abs(_phi2(z)[0] - _phi2(z)[1]) < 1e-6

    def test_limits(self):
        assert _phi1(np.array([0.0]))[0] == 1.0
        assert _phi2(np.array([0.0]))[0] == 0.5

    def test_series_against_extended_precision(self):
        from fractions import Fraction

        for zf in (1e-9, 1e-4, 0.05, 0.0999):
            z = Fraction(zf)
            # e^{-z} by a long rational Taylor sum
            e = sum(Fraction((-1) ** k) * z**k / math.factorial(k) for k in range(40))
            p1 = float((1 - e) / z)
            p2 = float((1 - e * (1 + z)) / z**2)
            assert _phi1(np.array([zf]))[0] == pytest.approx(p1, rel=1e-15)
            assert _phi2(np.array([zf]))[0] == pytest.approx(p2, rel=1e-15)


class TestDuhamel:
    def test_zero(self):
        spec = GridSpec(1, 16, 9)
        out = duhamel(SemigroupKind.exact(), TrajectoryField.zeros(spec, 0.5))
        assert sup_norm(out) == 0

    def test_constant_gives_linear_growth(self):
        spec = GridSpec(1, 16, 9)
        g = TrajectoryField(spec, np.full((9, 16), 0.3), 0.5)
        out = duhamel(SemigroupKind.exact(), g)
        np.testing.assert_allclose(out.values, np.broadcast_to(0.3 * out.times[:, None], (9, 16)), atol=1e-15)

    def test_single_mode_closed_form(self):
        # (1 - e^{-2}) / 4
        spec = GridSpec(1, 16, 5)
        g = TrajectoryField(spec, np.tile(np.cos(2 * spec.coordinates()), (5, 1)), 0.5)
        out = duhamel(SemigroupKind.exact(), g)
        c = to_spectrum(out.slice(4))[2] / to_spectrum(g.slice(0))[2]
        assert c.real == pytest.approx(0.2161661791908467, abs=1e-14)

    def test_second_order_in_time(self):
        # int_0^t e^{-(t-s)} sin(s) ds = (sin t - cos t + e^{-t}) / 2
        T = 1.0
        exact = (math.sin(T) - math.cos(T) + math.exp(-T)) / 2
        errs = []
        for n_t in (9, 17, 33, 65):
            spec = GridSpec(1, 8, n_t)
            t = np.linspace(0, T, n_t)
            g = TrajectoryField(spec, np.sin(t)[:, None] * np.cos(spec.coordinates())[None, :], T)
            out = duhamel(SemigroupKind.exact(), g)
            errs.append(abs(out.values[-1, 0] - exact))
        ratios = [a / b for a, b in zip(errs, errs[1:])]
        assert all(3.6 < r < 4.4 for r in ratios), ratios

    @pytest.mark.parametrize("kind", KINDS, ids=str)
    def test_bounded_by_horizon_times_sup(self, rng, kind):
        spec = GridSpec(1, 64, 17)
        for _ in range(50):
            g = TrajectoryField(spec, rng.uniform(-1, 1, (17, 64)), 0.5)
            assert sup_norm(duhamel(kind, g)) <= 0.5 * sup_norm(g) * (1 + 1e-8)

    def test_grid_mismatch(self):
        spec = GridSpec(1, 16, 9)
        g = TrajectoryField(spec, np.zeros((9, 16)), 0.5)
        from picardop.semigroup import duhamel_coeffs

        with pytest.raises(ConfigurationError):
            duhamel_coeffs(np.zeros((5, 16), complex), spec, 0.5, np.ones(16))
        assert duhamel(SemigroupKind.exact(), g).spec == spec
