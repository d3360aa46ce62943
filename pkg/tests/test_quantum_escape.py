import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.linalg import expm
from scipy.special import dawsn, erf, j1, j2, jn_zeros

import magtrap.quantum_escape as qe
from magtrap import (
    DerivedFrequencies,
    ParticleSpec,
    TrapConfig,
    derive_frequencies,
    dimensionless_trap,
    frequencies_from_ratios,
)
from magtrap.constants import HBAR

CFG = TrapConfig(B0=100.0, Bp=10.0, Bpp=1.0)
TABLE1_PARTICLE = ParticleSpec(mass=1e-22, mu=1e-20)


class TestSpinMatrices:
    def test_entries(self):
        s = qe.spin_one_matrices()
        np.testing.assert_array_equal(np.diag(s.sz), [1.0, 0.0, -1.0])
        assert s.sx[0, 1] == pytest.approx(1 / math.sqrt(2))
        assert s.sy[1, 0] == pytest.approx(1j / math.sqrt(2))

    def test_commutators(self):
        s = qe.spin_one_matrices()
        for a, b, c in [(s.sx, s.sy, s.sz), (s.sy, s.sz, s.sx), (s.sz, s.sx, s.sy)]:
            assert np.max(np.abs(a @ b - b @ a - 1j * c)) < 1e-15

    def test_casimir(self):
        s = qe.spin_one_matrices()
        total = s.sx @ s.sx + s.sy @ s.sy + s.sz @ s.sz
        np.testing.assert_allclose(total, 2 * np.eye(3), atol=1e-15)


class TestRotations:
    @given(theta=st.floats(-2 * math.pi, 2 * math.pi))
    @settings(max_examples=100)
    def test_closed_form_matches_matrix_exponential(self, theta):
        # expm by scipy (Pade) is the independent oracle for the s_y^3 = s_y
        # closed form.
        ref = expm(1j * theta * np.asarray(qe.SY))
        assert np.max(np.abs(qe.rotation_y(theta) - ref)) < 1e-13

    def test_rotation_z_diagonal(self):
        r = qe.rotation_z(0.7)
        np.testing.assert_allclose(
            np.diag(r), [np.exp(0.7j), 1.0, np.exp(-0.7j)], atol=1e-15
        )

    def test_identity_at_zero(self):
        assert qe.rotation_identity_check(0.0) == 0.0

    def test_quarter_turn_flips_z_to_minus_x(self):
        assert qe.rotation_identity_check(math.pi / 2) < 1e-12
        r = expm(1j * (math.pi / 2) * np.asarray(qe.SY))
        rinv = expm(-1j * (math.pi / 2) * np.asarray(qe.SY))
        np.testing.assert_allclose(r @ qe.SZ @ rinv, -np.asarray(qe.SX), atol=1e-13)

    @given(theta=st.floats(-10, 10))
    @settings(max_examples=100)
    def test_conjugation_identities_everywhere(self, theta):
        assert qe.rotation_identity_check(theta) < 1e-12


class TestDiagonalization:
    def test_already_diagonal(self):
        assert qe.diagonalization_check(0.0, 0.0) < 1e-15

    def test_generic_angles(self):
        assert qe.diagonalization_check(math.pi / 3, 1.1) < 1e-12

    @given(theta=st.floats(0, math.pi), varphi=st.floats(-math.pi, math.pi))
    @settings(max_examples=100)
    def test_spectrum_is_zeeman_triple(self, theta, varphi):
        mu_b = 2.7
        h = qe.magnetic_hamiltonian(mu_b, theta, varphi)
        eig = np.sort(np.linalg.eigvalsh(h))
        np.testing.assert_allclose(eig, [-mu_b, 0.0, mu_b], atol=1e-12)


class TestBoundState:
    def test_energy_is_harmonic_ground_level(self):
        cfg, p = dimensionless_trap(0.05, 0.08)
        f = derive_frequencies(cfg, p)
        bs = qe.bound_state(f, p, cfg)
        expected = p.mu * cfg.B0 + 0.5 * p.spin * f.omega_z + p.spin * f.omega_r
        assert math.isclose(bs.energy, expected, rel_tol=1e-15)

    def test_energy_near_zeeman_offset_for_benchmark_trap(self):
        f = derive_frequencies(CFG, TABLE1_PARTICLE)
        bs = qe.bound_state(f, TABLE1_PARTICLE, CFG)
        assert math.isclose(bs.energy, TABLE1_PARTICLE.mu * CFG.B0, rel_tol=1e-7)

    def test_normalization_by_quadrature(self):
        cfg, p = dimensionless_trap(0.05, 0.08)
        f = derive_frequencies(cfg, p)
        bs = qe.bound_state(f, p, cfg)
        radial, _ = quad(
            lambda r: abs(bs.wavefunction(r, 0.0, 0.0)) ** 2 * r,
            0.0, np.inf, epsabs=1e-14, epsrel=1e-13,
        )
        axial_profile, _ = quad(
            lambda z: math.exp(-p.mass * f.omega_z * z * z / p.spin),
            -np.inf, np.inf, epsabs=1e-14, epsrel=1e-13,
        )
        # |psi|^2 separates; the z-Gaussian of the |.|^2 at z=0 slice is 1/axial_profile
        total = 2 * math.pi * radial * axial_profile
        assert abs(total - 1.0) < 1e-10

    def test_width_ratios_are_sqrt_of_adiabaticity(self):
        cfg, p = dimensionless_trap(0.02, 0.03)
        f = derive_frequencies(cfg, p)
        bs = qe.bound_state(f, p, cfg)
        # scale over which mu*|B| varies: sqrt(B0/Bpp) axially,
        # sqrt(mu*B0/(m omega_r^2)) laterally
        scale_z = math.sqrt(cfg.B0 / cfg.Bpp)
        scale_r = math.sqrt(p.mu * cfg.B0 / (p.mass * f.omega_r**2))
        assert math.isclose(bs.width_z / scale_z, math.sqrt(f.K_z), rel_tol=1e-12)
        assert math.isclose(bs.width_r / scale_r, math.sqrt(f.K_r), rel_tol=1e-12)

    def test_warns_outside_harmonic_validity(self):
        cfg, p = dimensionless_trap(0.5, 0.5)
        f = derive_frequencies(cfg, p)
        with pytest.warns(UserWarning, match="dubious"):
            qe.bound_state(f, p, cfg)


class TestContinuumState:
    def test_energy_shell(self):
        cs = qe.continuum_state(TABLE1_PARTICLE, CFG, gamma=0.7)
        k0_sq = 2 * TABLE1_PARTICLE.mu * TABLE1_PARTICLE.mass * CFG.B0 / HBAR**2
        assert math.isclose(cs.k_r**2 + cs.k_z**2, k0_sq, rel_tol=1e-12)
        assert math.isclose(cs.k0**2, k0_sq, rel_tol=1e-12)

    def test_box_normalization_constant(self):
        cs = qe.continuum_state(TABLE1_PARTICLE, CFG, gamma=0.7, box=(50.0, 25.0))
        assert math.isclose(
            cs.c_gamma_sq, cs.k0 * math.sin(0.7) / (2 * 50.0 * 25.0), rel_tol=1e-14
        )

    def test_gamma_domain(self):
        with pytest.raises(ValueError):
            qe.continuum_state(TABLE1_PARTICLE, CFG, gamma=0.0)

    def test_bessel_norm_identity_at_box_zeros(self):
        # integral_0^R J1(k r)^2 r dr = R^2 J2(k R)^2 / 2 when J1(k R) = 0
        r_box = 30.0
        for zero in jn_zeros(1, 3):
            k = zero / r_box
            val, _ = quad(lambda r: j1(k * r) ** 2 * r, 0.0, r_box,
                          epsabs=1e-13, epsrel=1e-12, limit=200)
            assert math.isclose(val, 0.5 * r_box**2 * j2(zero) ** 2, rel_tol=1e-9)

    def test_radial_orthogonality_of_box_modes(self):
        # Different zeros of J1 on the same box radius are orthogonal.
        r_box = 30.0
        zeros = jn_zeros(1, 4)
        k1, k2 = zeros[0] / r_box, zeros[2] / r_box
        val, _ = quad(lambda r: j1(k1 * r) * j1(k2 * r) * r, 0.0, r_box,
                      epsabs=1e-13, epsrel=1e-12, limit=200)
        norm, _ = quad(lambda r: j1(k1 * r) ** 2 * r, 0.0, r_box,
                       epsabs=1e-13, epsrel=1e-12, limit=200)
        assert abs(val) < 1e-9 * norm


class TestSpecialFunctionAccuracy:
    """The rate prefactor leans on scipy's j1, erf and Dawson; pin their
    accuracy on the used domains against mpmath."""

    def test_bessel_j1(self):
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 30
        for x in [0.1, 0.5, 1.0, 3.83, 7.0, 20.0, 61.7]:
            ref = float(mpmath.besselj(1, x))
            assert abs(j1(x) - ref) <= 1e-12 * max(abs(ref), 1e-3)

    def test_erf(self):
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 30
        for x in [0.01, 0.3, 1.0, 2.0, 5.0]:
            ref = float(mpmath.erf(x))
            assert abs(erf(x) - ref) <= 1e-13 * abs(ref)

    def test_dawson(self):
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 30
        for x in [0.05, 0.5, 0.924, 2.0, 6.0, 15.0]:
            ref = float(0.5 * mpmath.sqrt(mpmath.pi) * mpmath.exp(-x**2) * mpmath.erfi(x))
            assert abs(dawsn(x) - ref) <= 1e-13 * abs(ref)


def _oracle_sin_integral(a, b, power):
    val, _ = quad(
        lambda g: math.sin(g) ** power * math.exp(-a * math.sin(g) ** 2 - b * math.cos(g) ** 2),
        0.0, math.pi, epsabs=1e-300, epsrel=1e-13, limit=400,
    )
    return val


class TestEmissionIntegrals:
    def test_base_at_origin(self):
        assert qe.emission_integral_base(0.0, 0.0) == 2.0

    @pytest.mark.parametrize("a", [1.0, 10.0, 100.0])
    def test_base_collapses_on_diagonal(self, a):
        assert math.isclose(qe.emission_integral_base(a, a), 2 * math.exp(-a), rel_tol=1e-14)
        assert math.isclose(qe.log_emission_integral_base(a, a), math.log(2) - a, rel_tol=1e-14)

    def test_base_against_quadrature(self):
        for a, b in [(1.0, 10.0), (10.0, 1.0), (2.5, 2.0), (0.0, 40.0), (40.0, 0.0)]:
            ref = _oracle_sin_integral(a, b, 1)
            assert math.isclose(qe.emission_integral_base(a, b), ref, rel_tol=1e-12)

    def test_full_at_origin(self):
        assert math.isclose(qe.emission_integral(0.0, 0.0), 4.0 / 3.0, rel_tol=1e-15)

    @pytest.mark.parametrize("a", [0.5, 3.0, 25.0, 200.0])
    def test_full_collapses_on_diagonal(self, a):
        assert math.isclose(
            qe.emission_integral(a, a), (4.0 / 3.0) * math.exp(-a), rel_tol=1e-13
        )

    @pytest.mark.parametrize(
        "a,b",
        [
            (1.0, 10.0),      # erf branch
            (10.0, 1.0),      # dawson branch
            (3.0, 5.0),       # series branch
            (5.0, 3.0),       # series branch
            (60.0, 10.0),     # asymptotic branch
            (0.5, 120.0),     # deep erf branch
            (300.0, 2.0),     # deep asymptotic branch
        ],
    )
    def test_full_against_quadrature(self, a, b):
        ref = _oracle_sin_integral(a, b, 3)
        assert math.isclose(qe.emission_integral(a, b), ref, rel_tol=1e-12)

    def test_branch_continuity(self):
        # Values must agree across the branch switch points.
        for a0, b0 in [(10.0, 6.0), (6.0, 10.0), (50.0, 10.0)]:
            eps = 1e-9
            lo = qe.log_emission_integral(a0 - eps, b0)
            hi = qe.log_emission_integral(a0 + eps, b0)
            assert abs(lo - hi) < 1e-7

    def test_log_form_survives_huge_arguments(self):
        val = qe.log_emission_integral(2.7e8, 1.9e8)
        assert math.isfinite(val)
        # leading behavior exp(-b)/c^2
        assert math.isclose(val, -1.9e8 - 2 * math.log(8e7), rel_tol=1e-12)
        assert qe.emission_integral(2.7e8, 1.9e8) == 0.0  # underflow is allowed here

    def test_asymptotic_limits(self):
        # b >> a: sqrt(pi/b) e^-a ; a >> b: e^-b / a^2
        a, b = 2.0, 4000.0
        assert math.isclose(
            qe.log_emission_integral(a, b),
            0.5 * math.log(math.pi / b) - a,
            rel_tol=1e-3,
        )
        a, b = 4000.0, 2.0
        assert math.isclose(
            qe.log_emission_integral(a, b), -b - 2 * math.log(a), rel_tol=1e-3
        )

    def test_strictly_positive_and_decreasing(self):
        grid = [0.0, 0.5, 1.5, 4.0, 11.0, 47.0, 130.0]
        logs = {(a, b): qe.log_emission_integral(a, b) for a in grid for b in grid}
        for a in grid:
            for b in grid:
                assert math.isfinite(logs[(a, b)])
                for a2 in grid:
                    if a2 > a:
                        assert logs[(a2, b)] < logs[(a, b)]
                for b2 in grid:
                    if b2 > b:
                        assert logs[(a, b2)] < logs[(a, b)]

    def test_rejects_negative_arguments(self):
        with pytest.raises(ValueError):
            qe.log_emission_integral(-1.0, 0.0)
        with pytest.raises(ValueError):
            qe.log_emission_integral_base(0.0, -2.0)


class TestMatrixElement:
    CFG_DL, P_DL = dimensionless_trap(0.08, 0.05)

    def freqs(self):
        return derive_frequencies(self.CFG_DL, self.P_DL)

    def test_symmetric_about_equator(self):
        f = self.freqs()
        for g in (0.3, 0.9, 1.4):
            a = qe.matrix_element_sq(f, self.P_DL, self.CFG_DL, g)
            b = qe.matrix_element_sq(f, self.P_DL, self.CFG_DL, math.pi - g)
            assert math.isclose(a, b, rel_tol=1e-12)

    def test_vanishes_toward_poles(self):
        f = self.freqs()
        mid = qe.matrix_element_sq(f, self.P_DL, self.CFG_DL, math.pi / 2)
        tiny = qe.matrix_element_sq(f, self.P_DL, self.CFG_DL, 1e-4)
        assert tiny < 1e-11 * mid

    def test_radial_overlap_identity_emerges_from_quadrature(self):
        # integral_0^inf r^2 J1(k r) e^{-alpha r^2} dr = k/(4 alpha^2) e^{-k^2/(4 alpha)}
        f = self.freqs()
        hb, m = self.P_DL.spin, self.P_DL.mass
        alpha = m * f.omega_r / (2 * hb)
        k0 = math.sqrt(2 * self.P_DL.mu * m * self.CFG_DL.B0) / hb
        r_max = math.sqrt(95.0 / alpha)
        for g in (0.4, 1.0, 1.5):
            k = k0 * math.sin(g)
            breaks = [z / k for z in jn_zeros(1, 80) if z / k < r_max]
            val, _ = quad(
                lambda r: r * r * j1(k * r) * math.exp(-alpha * r * r),
                0.0, r_max, points=breaks, epsabs=1e-300, epsrel=1e-13, limit=500,
            )
            closed = k / (4 * alpha**2) * math.exp(-k * k / (4 * alpha))
            assert math.isclose(val, closed, rel_tol=1e-10)


class TestEscapeRate:
    def test_isotropic_identity(self):
        for ratio in (10.0, 100.0):
            f = frequencies_from_ratios(1.0 / ratio, 1.0 / ratio, omega_p=1.0)
            exact = (
                math.log(8.0)
                + 0.5 * math.log(2 * math.pi)
                + 0.5 * math.log(f.omega_p * f.omega_r)
                - 2 * ratio
            )
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                got = qe.escape_rate(f).log_rate
            assert abs(got - exact) <= 1e-12 * abs(exact)

    def test_isotropic_spec_value(self):
        # omega_p/omega_i = 100: ln(rate/omega_i) = ln(80 sqrt(2 pi)) - 200
        f = frequencies_from_ratios(0.01, 0.01, omega_p=1.0)
        res = qe.escape_rate(f)
        assert math.isclose(
            res.log_rate - math.log(f.omega_r),
            math.log(80 * math.sqrt(2 * math.pi)) - 200.0,
            rel_tol=1e-12,
        )

    def test_benchmark_trap_lifetime_scale(self):
        f = derive_frequencies(CFG, TABLE1_PARTICLE)
        res = qe.escape_rate(f)
        assert 1e7 < res.log10_escape_time < 1e9

    def test_assembled_quadrature_matches_closed_form(self):
        for kr, kz in [(0.08, 0.05), (0.1, 0.1), (0.05, 0.09)]:
            cfg, p = dimensionless_trap(kr, kz)
            f = derive_frequencies(cfg, p)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                closed = qe.escape_rate(f).log_rate
            assembled = qe.escape_rate_assembled(f, p, cfg)
            assert abs(closed - assembled) < 1e-10

    def test_box_cancels_from_raw_assembly(self):
        cfg, p = dimensionless_trap(0.08, 0.05)
        f = derive_frequencies(cfg, p)
        g = 0.9
        combos = []
        for box in [(200.0, 100.0), (17.0, 350.0), (1.0, 1.0)]:
            raw = qe.matrix_element_sq_raw(f, p, cfg, g, box=box)
            rho = qe.density_of_states(p, cfg, box=box)
            combos.append(2 * math.pi / p.spin * raw * rho)
        ref = qe.coupling_density(f, p, cfg, g)
        for v in combos:
            assert math.isclose(v, ref, rel_tol=1e-12)

    def test_escape_rate_ignores_nominal_box(self, monkeypatch):
        f = frequencies_from_ratios(0.03, 0.07)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            before = qe.escape_rate(f)
            monkeypatch.setattr(qe, "_NOMINAL_BOX", (12345.0, 0.001))
            after = qe.escape_rate(f)
        assert before.log_rate == after.log_rate  # bit-identical

    def test_regime_tags(self):
        assert qe.escape_rate(frequencies_from_ratios(1e-4, 1.0001e-4)).regime == qe.REGIME_ISOTROPIC
        assert qe.escape_rate(frequencies_from_ratios(1e-3, 1e-5)).regime == qe.REGIME_RADIAL
        assert qe.escape_rate(frequencies_from_ratios(1e-5, 1e-3)).regime == qe.REGIME_AXIAL
        assert qe.escape_rate(frequencies_from_ratios(1e-4, 2e-4)).regime == qe.REGIME_GENERAL

    def test_warns_outside_perturbative_validity(self):
        with pytest.warns(UserWarning, match="dubious"):
            qe.escape_rate(frequencies_from_ratios(0.3, 0.3))

    def test_rejects_nonpositive_frequencies(self):
        with pytest.raises(ValueError):
            DerivedFrequencies(omega_p=1.0, omega_z=-1.0, omega_r=1.0)


class TestAsymptoticRate:
    def test_isotropic_line_equals_full_rate(self):
        f = frequencies_from_ratios(0.01, 0.01)
        full = qe.escape_rate(f).log_rate
        line = qe.asymptotic_rate(f, qe.REGIME_ISOTROPIC)
        assert abs(full - line) < 1e-12 * abs(full)

    def test_axial_line_formula(self):
        f = DerivedFrequencies(omega_p=50.0, omega_r=1e-3, omega_z=1.0)
        got = qe.asymptotic_rate(f, qe.REGIME_AXIAL)
        expected = math.log(math.sqrt(math.pi / 2) * 1e-3 * (1.0 / 50.0) ** 1.5) - 100.0
        assert math.isclose(got, expected, rel_tol=1e-12)

    def test_radial_line_formula(self):
        f = DerivedFrequencies(omega_p=50.0, omega_r=1.0, omega_z=1e-3)
        got = qe.asymptotic_rate(f, qe.REGIME_RADIAL)
        assert math.isclose(got, math.log(4 * math.pi) - 100.0, rel_tol=1e-12)

    def test_warns_on_regime_mismatch(self):
        f = frequencies_from_ratios(1e-3, 1e-5)   # radial-dominated
        with pytest.warns(UserWarning, match="look radial"):
            qe.asymptotic_rate(f, qe.REGIME_AXIAL)

    def test_rejects_general_regime(self):
        f = frequencies_from_ratios(1e-4, 2e-4)
        with pytest.raises(ValueError):
            qe.asymptotic_rate(f, qe.REGIME_GENERAL)
