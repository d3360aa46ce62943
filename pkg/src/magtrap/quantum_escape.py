"""Quantum spin-flip escape rate of the trapped spin-1 ground state.

In the frame that tracks the local field direction, the spin-down (M = -1)
component sees an attractive well mu*|B| and has a Gaussian ground state,
while the M = 0 component is free.  The residual coupling left over from
the frame rotation, i*(hbar^2*Bp/(m*B0)) * s_y * d/dr, connects the two, and
Fermi's golden rule turns the overlap with the outgoing cylindrical waves
into the escape rate

    rate = 2*sqrt(2*pi) * (2*omega_r^2 + omega_z^2) * sqrt(omega_p)
           / (omega_r * sqrt(omega_z)) * I(2*omega_p/omega_r, 2*omega_p/omega_z)

where I(a, b) = integral_0^pi sin^3(g) exp(-a sin^2 g - b cos^2 g) dg over
the emission angle g of the escaping wave.  For realistic traps a and b are
of order 1e8, so exp(-a) underflows catastrophically: the whole rate
pipeline works in natural logs and only exponentiates on demand.

The temporary quantization box (period Z, radius R) used to count continuum
states cancels between the matrix element and the density of states; it
appears only in the derivation-level helpers here and never in the rate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import dawsn, erf, j1

from .field_model import DerivedFrequencies, ParticleSpec, TrapConfig

__all__ = [
    "SX",
    "SY",
    "SZ",
    "SpinOneMatrices",
    "spin_one_matrices",
    "rotation_y",
    "rotation_z",
    "rotation_identity_check",
    "magnetic_hamiltonian",
    "diagonalization_check",
    "BoundState",
    "bound_state",
    "ContinuumState",
    "continuum_state",
    "matrix_element_sq",
    "matrix_element_sq_raw",
    "density_of_states",
    "coupling_density",
    "emission_integral_base",
    "log_emission_integral_base",
    "emission_integral",
    "log_emission_integral",
    "EscapeRateResult",
    "escape_rate",
    "escape_rate_assembled",
    "asymptotic_rate",
    "REGIME_ISOTROPIC",
    "REGIME_RADIAL",
    "REGIME_AXIAL",
    "REGIME_GENERAL",
]

_SQRT2 = math.sqrt(2.0)

SX = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / _SQRT2
SY = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / _SQRT2
SZ = np.diag([1.0, 0.0, -1.0]).astype(complex)
for _m in (SX, SY, SZ):
    _m.setflags(write=False)

REGIME_ISOTROPIC = "isotropic"
REGIME_RADIAL = "radial-dominated"
REGIME_AXIAL = "axial-dominated"
REGIME_GENERAL = "general"

# Nominal quantization box (Z, R) [cm] used only by the derivation-level
# helpers (continuum normalization, raw matrix element, density of states).
# The physical rate is box-free by construction and never reads this.
_NOMINAL_BOX = (200.0, 100.0)


@dataclass(frozen=True)
class SpinOneMatrices:
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray


def spin_one_matrices() -> SpinOneMatrices:
    """Fresh writable copies of the spin-1 matrices."""
    return SpinOneMatrices(sx=SX.copy(), sy=SY.copy(), sz=SZ.copy())


def rotation_y(theta: float) -> np.ndarray:
    """exp(i*theta*s_y) for spin 1, in closed form (s_y^3 = s_y)."""
    sy2 = SY @ SY
    return np.eye(3, dtype=complex) + 1j * math.sin(theta) * SY + (math.cos(theta) - 1.0) * sy2


def rotation_z(phi: float) -> np.ndarray:
    """exp(i*phi*s_z) for spin 1: diag(e^{i phi}, 1, e^{-i phi})."""
    return np.diag([np.exp(1j * phi), 1.0, np.exp(-1j * phi)])


def rotation_identity_check(theta: float) -> float:
    """Residual of the spin-1 conjugation identities under exp(i*theta*s_y).

    Checks exp(i th s_y) s_z exp(-i th s_y) = cos(th) s_z - sin(th) s_x and
    the same statement for s_z^2; returns the largest absolute entry of
    either residual matrix.
    """
    r = rotation_y(theta)
    rinv = rotation_y(-theta)
    rotated = math.cos(theta) * SZ - math.sin(theta) * SX
    res1 = r @ SZ @ rinv - rotated
    res2 = r @ SZ @ SZ @ rinv - rotated @ rotated
    return float(max(np.max(np.abs(res1)), np.max(np.abs(res2))))


def magnetic_hamiltonian(mu_b: float, theta: float, varphi: float) -> np.ndarray:
    """Magnetic part -mu*B (n_B . s) of the spin-1 Hamiltonian.

    ``mu_b`` is the local Zeeman energy scale mu*|B| [erg]; theta, varphi
    orient the field.
    """
    n = (
        math.sin(theta) * math.cos(varphi),
        math.sin(theta) * math.sin(varphi),
        math.cos(theta),
    )
    return -mu_b * (n[0] * SX + n[1] * SY + n[2] * SZ)


def diagonalization_check(theta: float, varphi: float, mu_b: float = 1.0) -> float:
    """Residual of R H_M R^{-1} = -mu*B*s_z with R = exp(i th s_y) exp(i ph s_z)."""
    h = magnetic_hamiltonian(mu_b, theta, varphi)
    r = rotation_y(theta) @ rotation_z(varphi)
    rinv = rotation_z(-varphi) @ rotation_y(-theta)
    return float(np.max(np.abs(r @ h @ rinv + mu_b * SZ)))


# ---------------------------------------------------------------------------
# Bound and continuum states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundState:
    """Gaussian ground state of the spin-down (M = -1) component.

    ``energy`` is mu*B0 + hbar*omega_z/2 + hbar*omega_r, the 3D harmonic
    ground level on top of the Zeeman offset.  ``nu`` is the azimuthal
    quantum number of the e^{i nu phi} factor, fixed to 1 (the lowest radial
    level given the rotation-induced centrifugal term).
    """

    freqs: DerivedFrequencies
    mass: float
    hbar: float
    mu_b0: float
    energy: float
    width_r: float
    width_z: float
    nu: int = 1

    def wavefunction(self, r, phi, z):
        """Normalized spatial profile times e^{i nu phi}."""
        m, wr, wz, hb = self.mass, self.freqs.omega_r, self.freqs.omega_z, self.hbar
        norm = math.sqrt(m * wr / (math.pi * hb)) * (m * wz / (math.pi * hb)) ** 0.25
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        return (
            norm
            * np.exp(1j * self.nu * np.asarray(phi, dtype=float))
            * np.exp(-m * wr * r * r / (2.0 * hb))
            * np.exp(-m * wz * z * z / (2.0 * hb))
        )


def bound_state(freqs: DerivedFrequencies, p: ParticleSpec, cfg: TrapConfig) -> BoundState:
    """Harmonic ground state of the counter-aligned well.

    Valid for K_z, K_r << 1 (the state must be much narrower than the scale
    over which mu*|B| varies); warns above 0.1.  The particle's spin
    magnitude doubles as the action quantum (spin-1 convention).
    """
    if not (freqs.omega_p > 0 and freqs.omega_r > 0 and freqs.omega_z > 0):
        raise ValueError("all frequencies must be positive")
    if max(freqs.K_r, freqs.K_z) > 0.1:
        warnings.warn(
            f"harmonic bound state is dubious at K_r = {freqs.K_r:.3g}, "
            f"K_z = {freqs.K_z:.3g} (need K << 1)",
            stacklevel=2,
        )
    hb = p.spin
    mu_b0 = p.mu * cfg.B0
    energy = mu_b0 + 0.5 * hb * freqs.omega_z + hb * freqs.omega_r
    return BoundState(
        freqs=freqs,
        mass=p.mass,
        hbar=hb,
        mu_b0=mu_b0,
        energy=energy,
        width_r=math.sqrt(hb / (p.mass * freqs.omega_r)),
        width_z=math.sqrt(hb / (p.mass * freqs.omega_z)),
    )


@dataclass(frozen=True)
class ContinuumState:
    """Outgoing M = 0 wave at emission angle gamma, box-normalized.

    k0 is fixed by energy conservation with the bound state,
    k0^2 = 2*mu*mass*B0/hbar^2, and splits into k_r = k0*sin(gamma),
    k_z = k0*cos(gamma).  ``c_gamma_sq`` is the squared normalization on the
    finite box (period Z, radius R); it scales as 1/(Z*R) and cancels from
    every physical quantity.
    """

    gamma: float
    k0: float
    k_r: float
    k_z: float
    c_gamma_sq: float
    box: tuple
    beta: int = 1

    def wavefunction(self, r, phi, z):
        r = np.asarray(r, dtype=float)
        return (
            math.sqrt(self.c_gamma_sq)
            * j1(self.k_r * r)
            * np.exp(1j * (self.beta * np.asarray(phi, dtype=float) + self.k_z * np.asarray(z, dtype=float)))
        )


def continuum_state(p: ParticleSpec, cfg: TrapConfig, gamma: float, box=None) -> ContinuumState:
    if not 0.0 < gamma < math.pi:
        raise ValueError("gamma must lie in (0, pi)")
    if box is None:
        box = _NOMINAL_BOX
    z_len, r_len = box
    k0 = math.sqrt(2.0 * p.mu * p.mass * cfg.B0) / p.spin
    return ContinuumState(
        gamma=gamma,
        k0=k0,
        k_r=k0 * math.sin(gamma),
        k_z=k0 * math.cos(gamma),
        c_gamma_sq=k0 * math.sin(gamma) / (2.0 * z_len * r_len),
        box=(float(z_len), float(r_len)),
    )


# ---------------------------------------------------------------------------
# Golden-rule matrix element and density of states
# ---------------------------------------------------------------------------

def matrix_element_sq(freqs: DerivedFrequencies, p: ParticleSpec, cfg: TrapConfig,
                      gamma: float) -> float:
    """|<continuum, gamma| H_int |bound>|^2 * (Z*R)  [erg^2 cm^2], box-free.

    Closed form: the radial overlap integral_0^inf r^2 J_1(k r) e^{-alpha r^2} dr
    = (k/(4 alpha^2)) e^{-k^2/(4 alpha)} and the axial Gaussian-Fourier
    integral give a Gaussian envelope in the emission angle.  Underflows for
    very large omega_p/omega ratios; use the log-space rate for those.
    """
    hb = p.spin
    m = p.mass
    wr, wz = freqs.omega_r, freqs.omega_z
    k0 = math.sqrt(2.0 * p.mu * m * cfg.B0) / hb
    sing, cosg = math.sin(gamma), math.cos(gamma)
    k_r, k_z = k0 * sing, k0 * cosg

    norm_r_sq = m * wr / (math.pi * hb)
    norm_z_sq = math.sqrt(m * wz / (math.pi * hb))
    coupling_sq = (hb * hb * cfg.Bp / (_SQRT2 * m * cfg.B0)) ** 2
    dpsi_sq = (m * wr / hb) ** 2

    alpha = m * wr / (2.0 * hb)
    beta = m * wz / (2.0 * hb)
    radial_sq = (k_r / (4.0 * alpha * alpha)) ** 2 * math.exp(-k_r * k_r / (2.0 * alpha))
    axial_sq = (math.pi / beta) * math.exp(-k_z * k_z / (2.0 * beta))

    c_gamma_sq_times_zr = 0.5 * k0 * sing
    return (
        4.0 * math.pi**2
        * norm_r_sq
        * norm_z_sq
        * coupling_sq
        * dpsi_sq
        * c_gamma_sq_times_zr
        * radial_sq
        * axial_sq
    )


def matrix_element_sq_raw(freqs: DerivedFrequencies, p: ParticleSpec, cfg: TrapConfig,
                          gamma: float, box=None) -> float:
    """|H_i|^2 with the box normalization materialized  [erg^2]."""
    if box is None:
        box = _NOMINAL_BOX
    z_len, r_len = box
    return matrix_element_sq(freqs, p, cfg, gamma) / (z_len * r_len)


def density_of_states(p: ParticleSpec, cfg: TrapConfig, box=None) -> float:
    """Continuum density dN/dE per unit emission angle on the box  [1/erg].

    mass*Z*R/(2 pi^2 hbar^2), independent of gamma and energy at the scales
    of interest.
    """
    if box is None:
        box = _NOMINAL_BOX
    z_len, r_len = box
    return p.mass * z_len * r_len / (2.0 * math.pi**2 * p.spin**2)


def coupling_density(freqs: DerivedFrequencies, p: ParticleSpec, cfg: TrapConfig,
                     gamma: float) -> float:
    """Golden-rule integrand d(rate)/d(gamma)  [1/(s rad)], box-free.

    (2 pi/hbar) |H_i|^2 rho combined analytically so the box cancels exactly:
    equal to mass * matrix_element_sq / (pi hbar^3).
    """
    return p.mass * matrix_element_sq(freqs, p, cfg, gamma) / (math.pi * p.spin**3)


# ---------------------------------------------------------------------------
# Emission-angle integrals
# ---------------------------------------------------------------------------
#
#   base(a, b) = integral_0^pi sin(g)   exp(-a sin^2 g - b cos^2 g) dg
#   full(a, b) = integral_0^pi sin(g)^3 exp(-a sin^2 g - b cos^2 g) dg
#              = -d base / d a
#
# Substituting u = cos(g) maps both onto Gaussians on [-1, 1], which is why
# they reduce to Dawson/erf forms depending on the sign of c = a - b.

# Branch switch points for the sin^3 integral.
_SERIES_MAX = 4.0        # |c| below this: Taylor series in c, no cancellation
_DAWSON_MAX = 40.0       # c below this: Dawson form (rounding loss ~ c*eps)


def log_emission_integral_base(a: float, b: float) -> float:
    """log of the sin-weighted emission-angle integral; safe for huge a, b."""
    if a < 0 or b < 0:
        raise ValueError("a and b must be nonnegative")
    c = a - b
    if c == 0.0:
        return math.log(2.0) - a
    if c > 0.0:
        x = math.sqrt(c)
        return -b + math.log(2.0 * dawsn(x) / x)
    x = math.sqrt(-c)
    return -a + math.log(math.sqrt(math.pi) * erf(x) / x)


def emission_integral_base(a: float, b: float) -> float:
    """sin-weighted emission-angle integral (may underflow to 0 for huge a, b)."""
    return math.exp(log_emission_integral_base(a, b))


def _series_factor(c: float) -> float:
    """4 * sum_m c^m / (m! (2m+1)(2m+3)); exact -d/da route near a = b."""
    term = 1.0 / 3.0
    total = term
    m = 0
    while True:
        term *= c * (2 * m + 1) / ((m + 1) * (2 * m + 5))
        total += term
        m += 1
        if abs(term) <= 1e-17 * abs(total) or m > 500:
            break
    return 4.0 * total


def _dawson_factor(c: float) -> float:
    """2 D(sqrt c)/sqrt c + D(sqrt c)/c^1.5 - 1/c for moderate c > 0."""
    x = math.sqrt(c)
    d = dawsn(x)
    return 2.0 * d / x + d / (c * x) - 1.0 / c


def _asymptotic_factor(c: float) -> tuple[float, float]:
    """Large-c expansion of the same factor: (1/c^2) * sum_k T_k.

    T_{k+1}/T_k = (2k+1)(k+2)/((2k+2) c); the series is asymptotic, so stop
    at the smallest term.  Returns (value, relative truncation estimate).
    """
    term = 1.0
    total = term
    k = 0
    while k < 60:
        nxt = term * (2 * k + 1) * (k + 2) / ((2 * k + 2) * c)
        if abs(nxt) >= abs(term):
            break
        term = nxt
        total += term
        k += 1
        if abs(term) <= 1e-17 * abs(total):
            break
    return total / (c * c), abs(term) / abs(total)


def _erf_factor(d: float) -> float:
    """sqrt(pi) erf(sqrt d)(1/sqrt d - 1/(2 d^1.5)) + e^{-d}/d for d > 0."""
    x = math.sqrt(d)
    return math.sqrt(math.pi) * erf(x) * (1.0 / x - 0.5 / (d * x)) + math.exp(-d) / d


def _log_emission_integral(a: float, b: float) -> tuple[float, float]:
    """(log value, relative-error estimate) of the sin^3 integral."""
    if a < 0 or b < 0:
        raise ValueError("a and b must be nonnegative")
    c = a - b
    if abs(c) <= _SERIES_MAX:
        return -a + math.log(_series_factor(c)), 3e-16
    if c > 0.0:
        if c <= _DAWSON_MAX:
            # The 1/c and 1/c^2 pieces cancel to leading order; the rounding
            # loss grows like c * eps, still < 1e-14 at the branch edge.
            return -b + math.log(_dawson_factor(c)), c * 2.3e-16
        val, trunc = _asymptotic_factor(c)
        return -b + math.log(val), max(trunc, 3e-16)
    return -a + math.log(_erf_factor(-c)), 5e-16


def log_emission_integral(a: float, b: float) -> float:
    """log of the sin^3-weighted emission-angle integral; safe for huge a, b."""
    return _log_emission_integral(a, b)[0]


def emission_integral(a: float, b: float) -> float:
    """sin^3-weighted emission-angle integral (underflows to 0 for huge a, b)."""
    return math.exp(log_emission_integral(a, b))


# ---------------------------------------------------------------------------
# Escape rate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EscapeRateResult:
    """Spin-flip escape rate in log space plus regime metadata.

    ``log_rate`` is the natural log of 1/T_esc in the inverse time unit of
    the input frequencies; ``quadrature_error`` estimates the relative error
    of the emission-angle integral evaluation.
    """

    log_rate: float
    regime: str
    quadrature_error: float

    @property
    def log10_escape_time(self) -> float:
        """log10 of T_esc (same time unit as the input frequencies)."""
        return -self.log_rate / math.log(10.0)


def _classify_regime(omega_r: float, omega_z: float) -> str:
    ratio = omega_r / omega_z
    if abs(ratio - 1.0) < 0.01:
        return REGIME_ISOTROPIC
    if ratio > 10.0:
        return REGIME_RADIAL
    if ratio < 0.1:
        return REGIME_AXIAL
    return REGIME_GENERAL


def escape_rate(freqs: DerivedFrequencies) -> EscapeRateResult:
    """Golden-rule spin-flip escape rate of the trapped ground state.

    Computed entirely in log space from the closed-form prefactor and the
    emission-angle integral; no quantization box enters anywhere.  The
    result is formal for K that are not small (warned), but always finite.
    """
    wp, wr, wz = freqs.omega_p, freqs.omega_r, freqs.omega_z
    if not (wp > 0 and wr > 0 and wz > 0):
        raise ValueError("all frequencies must be positive")
    if max(freqs.K_r, freqs.K_z) > 0.1:
        warnings.warn(
            f"perturbative rate is dubious at K_r = {freqs.K_r:.3g}, "
            f"K_z = {freqs.K_z:.3g} (need K << 1)",
            stacklevel=2,
        )
    log_i, rel_err = _log_emission_integral(2.0 * wp / wr, 2.0 * wp / wz)
    log_rate = (
        math.log(2.0)
        + 0.5 * math.log(2.0 * math.pi)
        + math.log(2.0 * wr * wr + wz * wz)
        + 0.5 * math.log(wp)
        - math.log(wr)
        - 0.5 * math.log(wz)
        + log_i
    )
    return EscapeRateResult(
        log_rate=log_rate,
        regime=_classify_regime(wr, wz),
        quadrature_error=rel_err,
    )


def escape_rate_assembled(freqs: DerivedFrequencies, p: ParticleSpec, cfg: TrapConfig,
                          epsrel: float = 1e-12) -> float:
    """log of the rate assembled by direct emission-angle quadrature.

    Integrates the golden-rule density (matrix element times density of
    states) with an adaptive rule.  This is the independent verification
    path for the closed-form prefactor; it works in linear space and so is
    limited to parameter ranges where exp(-2*omega_p/omega) is representable.
    """
    val, _ = quad(
        lambda g: coupling_density(freqs, p, cfg, g),
        0.0, math.pi, epsabs=0.0, epsrel=epsrel, limit=200,
    )
    if val <= 0.0:
        raise ValueError("assembled rate underflowed; use escape_rate (log space) instead")
    return math.log(val)


def asymptotic_rate(freqs: DerivedFrequencies, regime: str) -> float:
    """log of the closed-form limiting rate for the requested regime.

    radial-dominated (omega_p >> omega_r >> omega_z):
        4 pi omega_r exp(-2 omega_p/omega_r)
    isotropic (omega_r = omega_z = omega_i):
        8 sqrt(2 pi) sqrt(omega_p omega_i) exp(-2 omega_p/omega_i)
    axial-dominated (omega_p >> omega_z >> omega_r):
        sqrt(pi/2) omega_r (omega_z/omega_p)^{3/2} exp(-2 omega_p/omega_z)

    Warns when the actual frequency ratios do not support the requested
    regime.
    """
    wp, wr, wz = freqs.omega_p, freqs.omega_r, freqs.omega_z
    actual = _classify_regime(wr, wz)
    if regime not in (REGIME_RADIAL, REGIME_ISOTROPIC, REGIME_AXIAL):
        raise ValueError(f"no asymptotic form for regime {regime!r}")
    if actual != regime:
        warnings.warn(
            f"requested {regime} asymptotics but frequency ratios look {actual}",
            stacklevel=2,
        )
    if regime == REGIME_RADIAL:
        return math.log(4.0 * math.pi * wr) - 2.0 * wp / wr
    if regime == REGIME_ISOTROPIC:
        wi = math.sqrt(wr * wz)   # equal up to the regime tolerance
        return math.log(8.0) + 0.5 * math.log(2.0 * math.pi) + 0.5 * math.log(wp * wi) - 2.0 * wp / wi
    return (
        0.5 * math.log(math.pi / 2.0)
        + math.log(wr)
        + 1.5 * (math.log(wz) - math.log(wp))
        - 2.0 * wp / wz
    )
