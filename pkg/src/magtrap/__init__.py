"""Magnetic trap for a spin-1 particle: classical stability and spin-flip lifetime.

The package models a biased magnetostatic trap whose field amplitude has a
nonzero minimum.  It simulates the coupled classical translation/spin
dynamics, maps the classical stability region in the adiabaticity-ratio
plane, and evaluates the quantum-mechanical spin-flip escape rate of the
trapped ground state via Fermi's golden rule, in log space so astronomically
long lifetimes stay representable.
"""

from .constants import HBAR
from .field_model import (
    DerivedFrequencies,
    FieldSample,
    ParticleSpec,
    TrapConfig,
    check_maxwell,
    derive_frequencies,
    dimensionless_trap,
    field_approx_at,
    field_at,
    frequencies_from_ratios,
    load_trap_particle,
    trap_particle_from_dict,
)
from .classical_dynamics import (
    ClassicalState,
    StiffnessError,
    Trajectory,
    energy,
    eom_rhs,
    equilibrium_state,
    integrate,
    perturbed_equilibrium,
)
from .stability import (
    AdiabaticityPoint,
    BoundaryCurve,
    ModeSpectrum,
    StabilityMap,
    boundary_curve,
    boundary_kr2_of_kz2,
    is_stable,
    linearized_jacobian_spectrum,
    secular_roots,
    stability_map,
)
from .quantum_escape import (
    BoundState,
    ContinuumState,
    EscapeRateResult,
    asymptotic_rate,
    bound_state,
    continuum_state,
    diagonalization_check,
    emission_integral,
    emission_integral_base,
    escape_rate,
    escape_rate_assembled,
    log_emission_integral,
    log_emission_integral_base,
    matrix_element_sq,
    rotation_identity_check,
    spin_one_matrices,
)

__version__ = "0.1.0"
