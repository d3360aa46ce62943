"""Coupled classical translation and spin-direction dynamics in the trap.

State: center-of-mass position and velocity plus the unit vector n along the
magnetic moment.  The equations of motion are

    mass * d2x/dt2 = mu * grad(n . B)        (force on the moment)
    spin * dn/dt   = mu * n x B              (precession torque)

with B the exact trap field, so the force is an exact polynomial gradient.
The two stationary solutions are a motionless particle at the origin with n
along -z (counter-aligned, the trapped case) or +z (aligned, axially
unstable).  Integration uses an adaptive explicit Runge-Kutta pair with n
renormalized to unit length after every accepted step; the renormalization
correction is recorded so the constraint drift stays measurable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import DOP853, RK45

from .field_model import ParticleSpec, TrapConfig

__all__ = [
    "ClassicalState",
    "Trajectory",
    "StiffnessError",
    "eom_rhs",
    "energy",
    "integrate",
    "equilibrium_state",
    "perturbed_equilibrium",
    "numerical_lateral_jacobian",
    "TRAJECTORY_COLUMNS",
]

TRAJECTORY_COLUMNS = ("t", "x", "y", "z", "vx", "vy", "vz", "nx", "ny", "nz", "E")

_METHODS = {"dop853": DOP853, "rk45": RK45}

# |n| may drift from 1 by at most this much per step before renormalization
# is considered broken (it is also the post-renormalization guarantee).
_UNIT_TOL = 1e-12


class StiffnessError(RuntimeError):
    """Integration failed: step size underflow or step budget exhausted."""


@dataclass
class ClassicalState:
    """Center-of-mass position/velocity [cm, cm/s] and unit moment direction."""

    pos: np.ndarray
    vel: np.ndarray
    n_hat: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.pos = np.asarray(self.pos, dtype=float).reshape(3)
        self.vel = np.asarray(self.vel, dtype=float).reshape(3)
        self.n_hat = np.asarray(self.n_hat, dtype=float).reshape(3)
        norm = np.linalg.norm(self.n_hat)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"n_hat must be a unit vector, |n| = {norm:.3e}")
        self.n_hat = self.n_hat / norm


@dataclass
class Trajectory:
    """Integrator output sampled at every accepted step."""

    t: np.ndarray
    pos: np.ndarray          # (n, 3)
    vel: np.ndarray          # (n, 3)
    n_hat: np.ndarray        # (n, 3)
    energy: np.ndarray       # (n,)
    n_steps: int = 0
    max_renorm_correction: float = 0.0   # largest | |n|-1 | seen before renormalizing

    @property
    def energy_drift(self) -> float:
        """max |E(t) - E(0)| / |E(0)| along the trajectory."""
        e0 = self.energy[0]
        return float(np.max(np.abs(self.energy - e0)) / abs(e0))

    @property
    def max_excursion(self) -> float:
        """Largest |pos| reached [cm]."""
        return float(np.max(np.linalg.norm(self.pos, axis=1)))

    def write_csv(self, path, header_lines=()) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
            for i in range(len(self.t)):
                row = [self.t[i], *self.pos[i], *self.vel[i], *self.n_hat[i], self.energy[i]]
                fh.write(",".join(f"{v:.12g}" for v in row) + "\n")


def _rhs_flat(y, B0, Bp, Bpp, mu_over_m, mu_over_s):
    x, yy, z, vx, vy, vz, nx, ny, nz = y
    gx = Bp - 0.5 * Bpp * z          # dBx/dx
    gy = -Bp - 0.5 * Bpp * z         # dBy/dy
    bx = gx * x
    by = gy * yy
    bz = B0 + 0.5 * Bpp * z * z - 0.25 * Bpp * (x * x + yy * yy)
    # Force/mass = (mu/m) grad(n . B); the field is polynomial so this is exact.
    fx = mu_over_m * (nx * gx - 0.5 * nz * Bpp * x)
    fy = mu_over_m * (ny * gy - 0.5 * nz * Bpp * yy)
    fz = mu_over_m * (-0.5 * Bpp * (nx * x + ny * yy) + nz * Bpp * z)
    # dn/dt = (mu/spin) n x B
    tx = mu_over_s * (ny * bz - nz * by)
    ty = mu_over_s * (nz * bx - nx * bz)
    tz = mu_over_s * (nx * by - ny * bx)
    return np.array([vx, vy, vz, fx, fy, fz, tx, ty, tz])


def eom_rhs(cfg: TrapConfig, p: ParticleSpec, state: ClassicalState):
    """Time derivatives (dpos, dvel, dn) of the coupled equations of motion."""
    y = np.concatenate([state.pos, state.vel, state.n_hat])
    dy = _rhs_flat(y, cfg.B0, cfg.Bp, cfg.Bpp, p.mu / p.mass, p.mu / p.spin)
    return dy[0:3], dy[3:6], dy[6:9]


def energy(cfg: TrapConfig, p: ParticleSpec, state: ClassicalState) -> float:
    """Total energy (1/2) m v^2 - mu n.B  [erg]."""
    return _energy_flat(
        np.concatenate([state.pos, state.vel, state.n_hat]), cfg, p
    )


def _energy_flat(y, cfg, p):
    x, yy, z, vx, vy, vz, nx, ny, nz = y
    bx = (cfg.Bp - 0.5 * cfg.Bpp * z) * x
    by = (-cfg.Bp - 0.5 * cfg.Bpp * z) * yy
    bz = cfg.B0 + 0.5 * cfg.Bpp * z * z - 0.25 * cfg.Bpp * (x * x + yy * yy)
    return 0.5 * p.mass * (vx * vx + vy * vy + vz * vz) - p.mu * (nx * bx + ny * by + nz * bz)


def _default_atol(y0, freqs_scale, tol):
    """Per-component absolute tolerances keyed to the initial state's scales.

    Positions and velocities oscillate through zero, so a pure relative
    control would collapse the step there; the floor is tied to the initial
    amplitudes (or to each other through the precession frequency when one
    group starts at zero).  The unit spin components get scale 1.
    """
    pos_scale = float(np.max(np.abs(y0[0:3])))
    vel_scale = float(np.max(np.abs(y0[3:6])))
    if pos_scale == 0.0 and vel_scale == 0.0:
        pos_scale = vel_scale = 1.0
    elif pos_scale == 0.0:
        pos_scale = vel_scale / freqs_scale
    elif vel_scale == 0.0:
        vel_scale = pos_scale * freqs_scale
    atol = np.empty(9)
    atol[0:3] = tol * pos_scale
    atol[3:6] = tol * vel_scale
    atol[6:9] = tol
    return atol


def integrate(cfg: TrapConfig, p: ParticleSpec, s0: ClassicalState, t_end: float,
              tol: float = 1e-10, method: str = "dop853", atol=None,
              max_steps: int | None = None) -> Trajectory:
    """Integrate from ``s0`` to ``s0.t + t_end`` with relative tolerance ``tol``.

    The spin direction is renormalized after every accepted step and the
    largest correction is reported on the returned trajectory.  Raises
    :class:`StiffnessError` on step-size underflow or when ``max_steps``
    accepted steps are exhausted before reaching ``t_end``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    try:
        stepper_cls = _METHODS[method.lower()]
    except KeyError:
        raise ValueError(f"method must be one of {sorted(_METHODS)}") from None

    b0, bp, bpp = cfg.B0, cfg.Bp, cfg.Bpp
    mu_over_m, mu_over_s = p.mu / p.mass, p.mu / p.spin

    def rhs(t, y):
        return _rhs_flat(y, b0, bp, bpp, mu_over_m, mu_over_s)

    y0 = np.concatenate([s0.pos, s0.vel, s0.n_hat])
    omega_p = p.mu * cfg.B0 / p.spin
    if atol is None:
        atol = _default_atol(y0, omega_p, tol)

    solver = stepper_cls(rhs, s0.t, y0, s0.t + t_end, rtol=tol, atol=atol)

    ts = [s0.t]
    ys = [y0.copy()]
    es = [_energy_flat(y0, cfg, p)]
    n_steps = 0
    max_corr = 0.0
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise StiffnessError(f"integrator step failed at t = {solver.t:g}: {msg}")
        n_steps += 1
        y = solver.y
        norm = math.sqrt(y[6] ** 2 + y[7] ** 2 + y[8] ** 2)
        corr = abs(norm - 1.0)
        if corr > 0.0:
            y[6:9] /= norm
            if corr > max_corr:
                max_corr = corr
            # The stored end-of-step derivative predates the renormalization;
            # refresh it if the correction was large enough to matter.
            if corr > 1e-9:
                solver.f = rhs(solver.t, y)
        ts.append(solver.t)
        ys.append(y.copy())
        es.append(_energy_flat(y, cfg, p))
        if max_steps is not None and n_steps >= max_steps and solver.status == "running":
            raise StiffnessError(
                f"step budget exhausted ({max_steps} steps, reached t = {solver.t:g} "
                f"of {s0.t + t_end:g}); the problem is stiffer than expected"
            )

    ys = np.asarray(ys)
    return Trajectory(
        t=np.asarray(ts),
        pos=ys[:, 0:3],
        vel=ys[:, 3:6],
        n_hat=ys[:, 6:9],
        energy=np.asarray(es),
        n_steps=n_steps,
        max_renorm_correction=max_corr,
    )


def equilibrium_state(antiparallel: bool = True) -> ClassicalState:
    """Motionless particle at the origin, moment along -z (True) or +z."""
    n = np.array([0.0, 0.0, -1.0 if antiparallel else 1.0])
    return ClassicalState(pos=np.zeros(3), vel=np.zeros(3), n_hat=n)


def perturbed_equilibrium(cfg: TrapConfig, p: ParticleSpec, amplitude: float = 1e-4,
                          antiparallel: bool = True, rng=None) -> ClassicalState:
    """Equilibrium state displaced and spin-tilted by a small relative amplitude.

    The displacement scale is sqrt(spin/(mass*omega_r)), the classical
    analogue of the quantum ground-state width; the spin tilt is
    ``amplitude`` radians.  With ``rng`` the perturbation direction is
    random, otherwise deterministic along fixed axes.
    """
    from .field_model import derive_frequencies

    freqs = derive_frequencies(cfg, p)
    length = math.sqrt(p.spin / (p.mass * freqs.omega_r))
    if rng is None:
        direction = np.array([1.0, 0.0, 1.0]) / math.sqrt(2.0)
        tilt_axis = np.array([1.0, 0.0])
    else:
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        tilt_axis = rng.normal(size=2)
        tilt_axis /= np.linalg.norm(tilt_axis)
    nz = -1.0 if antiparallel else 1.0
    tilt = amplitude
    n = np.array([
        math.sin(tilt) * tilt_axis[0],
        math.sin(tilt) * tilt_axis[1],
        nz * math.cos(tilt),
    ])
    return ClassicalState(pos=amplitude * length * direction, vel=np.zeros(3), n_hat=n)


def numerical_lateral_jacobian(cfg: TrapConfig, p: ParticleSpec, h: float = 1e-7) -> np.ndarray:
    """Central-difference Jacobian of the equations of motion at the
    counter-aligned equilibrium, restricted to (x, y, vx, vy, nx, ny).

    The right-hand side is polynomial of degree <= 2 in the state, so the
    central differences are exact up to rounding; this is the independent
    check against :func:`magtrap.stability.lateral_system_matrix_physical`.
    """
    y_star = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0])
    idx = [0, 1, 3, 4, 6, 7]   # x, y, vx, vy, nx, ny in the flat state
    jac = np.zeros((6, 6))
    args = (cfg.B0, cfg.Bp, cfg.Bpp, p.mu / p.mass, p.mu / p.spin)
    for col, j in enumerate(idx):
        yp = y_star.copy()
        ym = y_star.copy()
        yp[j] += h
        ym[j] -= h
        df = (_rhs_flat(yp, *args) - _rhs_flat(ym, *args)) / (2.0 * h)
        jac[:, col] = df[idx]
    return jac
