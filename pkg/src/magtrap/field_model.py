"""Trap field geometry, particle data, and characteristic frequencies.

Everything is CGS-Gaussian: fields in Oe, lengths in cm, masses in g, moments
in emu, angular momenta in erg*s.  The static trap field carries a bias B0
along z, a lateral gradient Bp and an axial curvature Bpp:

    Bx = (Bp - Bpp*z/2) * x
    By = (-Bp - Bpp*z/2) * y
    Bz = B0 + Bpp*z**2/2 - Bpp*(x**2 + y**2)/4

This field is divergence- and curl-free and its amplitude has a strict
nonzero minimum B0 at the origin, which is what makes it a trap for a
magnetic moment that counter-aligns with the local field.  The derived
frequencies (precession omega_p, axial/lateral vibration omega_z, omega_r)
and their ratios K_z = omega_z/omega_p, K_r = omega_r/omega_p measure how
adiabatically the spin follows the field; every stability and lifetime
result downstream is a function of (K_r, K_z) alone.

A dimensionless working mode is provided by :func:`dimensionless_trap`,
which synthesizes a unit-system trap (B0 = mass = moment = spin = 1, so
omega_p = 1) realizing prescribed ratios; lengths then come out in units of
sqrt(B0/Bpp) equivalents and times in 1/omega_p.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import HBAR

__all__ = [
    "TrapConfig",
    "ParticleSpec",
    "DerivedFrequencies",
    "FieldSample",
    "field_at",
    "field_approx_at",
    "derive_frequencies",
    "frequencies_from_ratios",
    "check_maxwell",
    "dimensionless_trap",
    "trap_particle_from_dict",
    "load_trap_particle",
]

# JSON schema for CGS configs; "spin_erg_s" may be omitted (defaults to hbar).
_CONFIG_KEYS = {
    "B0_oe": "B0",
    "Bprime_oe_per_cm": "Bp",
    "Bpp_oe_per_cm2": "Bpp",
    "mass_g": "mass",
    "mu_emu": "mu",
    "spin_erg_s": "spin",
}


@dataclass(frozen=True)
class TrapConfig:
    """Static trap field parameters.

    Attributes
    ----------
    B0 : float
        Bias field at the origin [Oe], > 0 so the amplitude minimum is
        nonvanishing and precession never stalls.
    Bp : float
        Lateral gradient [Oe/cm].
    Bpp : float
        Axial curvature [Oe/cm^2], > 0 (axial confinement of the
        counter-aligned moment).
    """

    B0: float
    Bp: float
    Bpp: float

    def __post_init__(self):
        if not self.B0 > 0:
            raise ValueError(f"bias field B0 must be positive, got {self.B0}")
        if not self.Bpp > 0:
            raise ValueError(f"axial curvature Bpp must be positive, got {self.Bpp}")
        # Lateral curvature of |B| is (Bp^2 - B0*Bpp/2)/B0; it must be
        # positive or omega_r comes out imaginary and there is no trap.
        if not self.lateral_curvature > 0:
            raise ValueError(
                "Bp**2 - B0*Bpp/2 must be positive for lateral confinement "
                f"(got {self.lateral_curvature:g} Oe^2/cm^2)"
            )

    @property
    def lateral_curvature(self) -> float:
        """Bp**2 - B0*Bpp/2 [Oe^2/cm^2], the combination entering omega_r."""
        return self.Bp * self.Bp - 0.5 * self.B0 * self.Bpp


@dataclass(frozen=True)
class ParticleSpec:
    """Trapped particle: mass [g], magnetic moment mu [emu], spin [erg*s].

    The quantum treatment assumes spin 1 with spin magnitude equal to the
    action quantum, so ``spin`` doubles as hbar there; the default is the
    physical hbar and the dimensionless mode uses 1.
    """

    mass: float
    mu: float
    spin: float = HBAR

    def __post_init__(self):
        if not (self.mass > 0 and self.mu > 0 and self.spin > 0):
            raise ValueError("mass, mu and spin must all be positive")


@dataclass(frozen=True)
class DerivedFrequencies:
    """Characteristic frequencies [1/s] and adiabaticity ratios of a trap.

    omega_p = mu*B0/spin   (spin precession at the trap center)
    omega_z = sqrt(mu*Bpp/mass)
    omega_r = sqrt(mu*(Bp^2 - B0*Bpp/2)/(mass*B0))
    K_z = omega_z/omega_p, K_r = omega_r/omega_p
    """

    omega_p: float
    omega_z: float
    omega_r: float
    K_z: float = field(default=0.0)
    K_r: float = field(default=0.0)

    def __post_init__(self):
        if not (self.omega_p > 0 and self.omega_z > 0 and self.omega_r > 0):
            raise ValueError("all frequencies must be positive")
        # Ratios are derived when not supplied explicitly.
        if self.K_z == 0.0:
            object.__setattr__(self, "K_z", self.omega_z / self.omega_p)
        if self.K_r == 0.0:
            object.__setattr__(self, "K_r", self.omega_r / self.omega_p)


@dataclass(frozen=True)
class FieldSample:
    """Field vector at a point plus its amplitude and orientation angles.

    theta is the polar angle of B with respect to z, varphi the azimuth of
    its transverse projection; both come from atan2 of the exact components,
    so there is no branch ambiguity.
    """

    b_vec: np.ndarray
    amplitude: float
    theta: float
    varphi: float


def field_at(cfg: TrapConfig, pos) -> FieldSample:
    """Evaluate the exact trap field at a Cartesian position [cm]."""
    x, y, z = (float(c) for c in pos)
    bx = (cfg.Bp - 0.5 * cfg.Bpp * z) * x
    by = (-cfg.Bp - 0.5 * cfg.Bpp * z) * y
    bz = cfg.B0 + 0.5 * cfg.Bpp * z * z - 0.25 * cfg.Bpp * (x * x + y * y)
    b_perp = math.hypot(bx, by)
    return FieldSample(
        b_vec=np.array([bx, by, bz]),
        amplitude=math.hypot(b_perp, bz),
        theta=math.atan2(b_perp, bz),
        varphi=math.atan2(by, bx),
    )


def field_approx_at(cfg: TrapConfig, r: float, phi: float, z: float):
    """Near-origin amplitude/orientation expansion in cylindrical coordinates.

    Returns ``(B, theta, varphi)`` with the quadratic amplitude expansion,
    theta ~ Bp*r/B0 and varphi ~ -phi.  The O(z*sin(2*phi)) piece of varphi
    is dropped.  Validity (r << B0/Bp, |z| << sqrt(B0/Bpp)) is the caller's
    responsibility.
    """
    amp = cfg.B0 * (
        1.0
        + cfg.Bpp * z * z / (2.0 * cfg.B0)
        + cfg.lateral_curvature * r * r / (2.0 * cfg.B0 * cfg.B0)
    )
    return amp, cfg.Bp * r / cfg.B0, -phi


def derive_frequencies(cfg: TrapConfig, p: ParticleSpec) -> DerivedFrequencies:
    """Characteristic frequencies and adiabaticity ratios for a trap/particle pair."""
    if cfg.lateral_curvature <= 0:
        raise ValueError("Bp**2 - B0*Bpp/2 <= 0: omega_r would be imaginary")
    omega_p = p.mu * cfg.B0 / p.spin
    omega_z = math.sqrt(p.mu * cfg.Bpp / p.mass)
    omega_r = math.sqrt(p.mu * cfg.lateral_curvature / (p.mass * cfg.B0))
    return DerivedFrequencies(omega_p=omega_p, omega_z=omega_z, omega_r=omega_r)


def frequencies_from_ratios(K_r: float, K_z: float, omega_p: float = 1.0) -> DerivedFrequencies:
    """Frequencies with prescribed adiabaticity ratios (dimensionless mode)."""
    if not (K_r > 0 and K_z > 0):
        raise ValueError("K_r and K_z must be positive")
    return DerivedFrequencies(
        omega_p=omega_p, omega_z=K_z * omega_p, omega_r=K_r * omega_p, K_z=K_z, K_r=K_r
    )


def dimensionless_trap(K_r: float, K_z: float) -> tuple[TrapConfig, ParticleSpec]:
    """Unit-system trap (B0 = mass = mu = spin = 1) with the given ratios.

    omega_p = 1, so times are in 1/omega_p; Bpp = K_z**2 and
    Bp = sqrt(K_r**2 + K_z**2/2) reproduce omega_z = K_z, omega_r = K_r.
    """
    if not (K_r > 0 and K_z > 0):
        raise ValueError("K_r and K_z must be positive")
    cfg = TrapConfig(B0=1.0, Bp=math.sqrt(K_r * K_r + 0.5 * K_z * K_z), Bpp=K_z * K_z)
    return cfg, ParticleSpec(mass=1.0, mu=1.0, spin=1.0)


def check_maxwell(cfg: TrapConfig, pos, h: float = 1e-4):
    """Central-difference divergence and curl of the trap field at ``pos``.

    Both vanish identically for this field; the finite-difference stencils
    are in fact exact here (every component is a polynomial of degree <= 2
    in each coordinate), so the returned residuals are pure rounding noise,
    well below any O(h^2) truncation envelope.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    pos = np.asarray(pos, dtype=float)

    def b(q):
        return field_at(cfg, q).b_vec

    dB = np.empty((3, 3))  # dB[i, j] = dB_i/dx_j
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        dB[:, j] = (b(pos + e) - b(pos - e)) / (2.0 * h)
    div = dB[0, 0] + dB[1, 1] + dB[2, 2]
    curl = np.array([
        dB[2, 1] - dB[1, 2],
        dB[0, 2] - dB[2, 0],
        dB[1, 0] - dB[0, 1],
    ])
    return div, curl


def trap_particle_from_dict(cfg_dict: dict) -> tuple[TrapConfig, ParticleSpec]:
    """Build (TrapConfig, ParticleSpec) from the CGS JSON schema.

    Required keys: B0_oe, Bprime_oe_per_cm, Bpp_oe_per_cm2, mass_g, mu_emu.
    Optional: spin_erg_s (defaults to hbar).  Unknown keys are rejected so
    typos surface as config errors instead of silently using defaults.
    """
    unknown = set(cfg_dict) - set(_CONFIG_KEYS) - {"units"}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    missing = set(_CONFIG_KEYS) - {"spin_erg_s"} - set(cfg_dict)
    if missing:
        raise ValueError(f"missing config keys: {sorted(missing)}")
    vals = {}
    for key, attr in _CONFIG_KEYS.items():
        if key in cfg_dict:
            try:
                vals[attr] = float(cfg_dict[key])
            except (TypeError, ValueError) as exc:
                raise ValueError(f"config key {key!r} is not a number: {cfg_dict[key]!r}") from exc
    trap = TrapConfig(B0=vals["B0"], Bp=vals["Bp"], Bpp=vals["Bpp"])
    particle = ParticleSpec(mass=vals["mass"], mu=vals["mu"], spin=vals.get("spin", HBAR))
    return trap, particle


def load_trap_particle(path) -> tuple[TrapConfig, ParticleSpec]:
    """Read a CGS config JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must contain a JSON object")
    return trap_particle_from_dict(data)
