"""Linear stability of the counter-aligned trapped state.

Small deviations of the particle from rest at the trap center split into a
decoupled axial oscillation at omega_z and a 6-dimensional lateral system
coupling circular center-of-mass motion to spin precession.  The lateral
normal modes come in two chirality families, named here by the sense of the
circular vibration: "ccw" modes vibrate counter-clockwise with the spin
precessing in the opposite (clockwise) sense, "cw" modes the reverse.  Each
family's dimensionless frequencies u = omega/omega_p solve a cubic,

    ccw:  u**3 + u**2 + (K_z**2/2) u - K_r**2 = 0
    cw:   u**3 - u**2 + (K_z**2/2) u + K_r**2 = 0

with the two root sets related by u -> -u.  The trapped state is stable
exactly when all three roots are real, which carves out a finite region of
the (K_r^2, K_z^2) plane.  Its edge is where the cw cubic has a double
root; parametrized by the double root t it reads

    K_r^2 = 2 t**3 - t**2,   K_z^2 = 4 t - 6 t**2,   1/2 <= t <= 2/3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field_model import DerivedFrequencies

__all__ = [
    "BRANCH_CCW",
    "BRANCH_CW",
    "AdiabaticityPoint",
    "ModeSpectrum",
    "BoundaryCurve",
    "StabilityMap",
    "cubic_coefficients",
    "secular_roots",
    "normalized_discriminant",
    "is_stable",
    "boundary_curve",
    "boundary_kr2_of_kz2",
    "lateral_system_matrix",
    "lateral_system_matrix_physical",
    "axial_eigenvalues",
    "linearized_jacobian_spectrum",
    "stability_map",
    "write_stability_map_csv",
    "write_boundary_csv",
    "write_plot_script",
]

BRANCH_CCW = "ccw"  # counter-clockwise vibration, spin precessing against its natural sense
BRANCH_CW = "cw"    # clockwise vibration, spin precessing with its natural sense

# Imaginary parts below this (relative to root magnitude) count as real.
_REALITY_TOL = 1e-10
# Normalized-discriminant band treated as marginal by is_stable.
_DISCRIMINANT_TOL = 1e-12

STABLE, UNSTABLE, MARGINAL = 1, 0, 2


@dataclass(frozen=True)
class AdiabaticityPoint:
    """A point in the (K_r^2, K_z^2) plane."""

    K_r2: float
    K_z2: float

    def __post_init__(self):
        if self.K_r2 < 0 or self.K_z2 < 0:
            raise ValueError("K_r2 and K_z2 must be nonnegative")


@dataclass(frozen=True)
class ModeSpectrum:
    """Roots u = omega/omega_p of one chirality family's secular cubic.

    Roots are sorted by real part descending; ``stable`` means all three
    imaginary parts vanish within tolerance.
    """

    branch: str
    roots: tuple
    stable: bool


@dataclass(frozen=True)
class BoundaryCurve:
    """Samples of the marginal-stability locus, ordered by the parameter t."""

    t: np.ndarray
    K_r2: np.ndarray
    K_z2: np.ndarray

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True)
class StabilityMap:
    """Cell-centered raster of stability flags over a (K_r^2, K_z^2) window."""

    K_r2: np.ndarray        # cell-center coordinates, shape (n,)
    K_z2: np.ndarray        # cell-center coordinates, shape (m,)
    flags: np.ndarray       # shape (n, m), values STABLE/UNSTABLE/MARGINAL


def cubic_coefficients(point: AdiabaticityPoint, branch: str):
    """Monic cubic coefficients (1, c2, c1, c0) for the given chirality family."""
    if branch == BRANCH_CW:
        return 1.0, -1.0, 0.5 * point.K_z2, point.K_r2
    if branch == BRANCH_CCW:
        return 1.0, 1.0, 0.5 * point.K_z2, -point.K_r2
    raise ValueError(f"branch must be {BRANCH_CCW!r} or {BRANCH_CW!r}, got {branch!r}")


def _cubic_roots_trig(b: float, c: float, d: float):
    """Closed-form roots of u^3 + b u^2 + c u + d via the trigonometric method.

    Fast path; loses accuracy near double roots, where the companion-matrix
    route should be preferred.
    """
    # Depress: u = w - b/3.
    shift = b / 3.0
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    if p == 0.0 and q == 0.0:
        return [-shift, -shift, -shift]
    disc = -4.0 * p**3 - 27.0 * q * q
    if disc >= 0.0:
        # Three real roots (p < 0 here unless degenerate).
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * m)
        arg = min(1.0, max(-1.0, arg))
        phase = math.acos(arg) / 3.0
        return [m * math.cos(phase - 2.0 * math.pi * k / 3.0) - shift for k in range(3)]
    # One real root plus a conjugate pair.
    if p < 0.0:
        m = 2.0 * math.sqrt(-p / 3.0)
        w0 = -math.copysign(m, q) * math.cosh(
            math.acosh(-3.0 * abs(q) / (p * m)) / 3.0
        )
    else:
        m = 2.0 * math.sqrt(p / 3.0)
        w0 = -m * math.sinh(math.asinh(3.0 * q / (p * m)) / 3.0)
    # Remaining quadratic factor w^2 + w0*w + (w0^2 + p) has complex roots.
    im = math.sqrt(max(3.0 * w0 * w0 + 4.0 * p, 0.0)) / 2.0
    re = -w0 / 2.0
    return [w0 - shift, complex(re - shift, im), complex(re - shift, -im)]


def secular_roots(point: AdiabaticityPoint, branch: str = BRANCH_CW,
                  method: str = "companion") -> ModeSpectrum:
    """Roots of the secular cubic for one chirality family.

    ``method="companion"`` (default) uses companion-matrix eigenvalues and is
    reliable near double roots; ``method="trig"`` is the closed-form fast
    path.
    """
    _, c2, c1, c0 = cubic_coefficients(point, branch)
    if method == "companion":
        roots = list(np.roots([1.0, c2, c1, c0]))
    elif method == "trig":
        roots = _cubic_roots_trig(c2, c1, c0)
    else:
        raise ValueError(f"unknown method {method!r}")
    roots = sorted((complex(r) for r in roots), key=lambda r: (-r.real, -r.imag))
    scale = max(1.0, max(abs(r) for r in roots))
    stable = all(abs(r.imag) <= _REALITY_TOL * scale for r in roots)
    return ModeSpectrum(branch=branch, roots=tuple(roots), stable=stable)


def normalized_discriminant(K_r2, K_z2):
    """Discriminant of the cw cubic, normalized by the cubed coefficient scale.

    Positive means three distinct real roots (stable), negative a complex
    pair (unstable); values within ``_DISCRIMINANT_TOL`` of zero are the
    marginal band.  Accepts arrays.
    """
    c = 0.5 * np.asarray(K_z2, dtype=float)
    d = np.asarray(K_r2, dtype=float)
    b = -1.0
    disc = (
        18.0 * b * c * d
        - 4.0 * b**3 * d
        + b * b * c * c
        - 4.0 * c**3
        - 27.0 * d * d
    )
    scale = np.maximum(1.0, np.maximum(np.abs(c), np.abs(d)))
    return disc / scale**3


def is_stable(point: AdiabaticityPoint) -> bool:
    """True iff all three cw-family eigenfrequencies are real (tolerance-aware).

    Points inside the marginal band count as stable, since there the cubic
    has a real double root.
    """
    return bool(normalized_discriminant(point.K_r2, point.K_z2) >= -_DISCRIMINANT_TOL)


def boundary_curve(n: int) -> BoundaryCurve:
    """n samples of the marginal-stability locus, uniform in t on [1/2, 2/3].

    At every sample the cw cubic has an exact double root at u = t; the
    endpoints are (K_r^2, K_z^2) = (0, 1/2) at t = 1/2 and (4/27, 0) at
    t = 2/3.
    """
    if n < 2:
        raise ValueError("need at least 2 samples")
    t = np.linspace(0.5, 2.0 / 3.0, n)
    return BoundaryCurve(t=t, K_r2=2.0 * t**3 - t**2, K_z2=4.0 * t - 6.0 * t**2)


def boundary_kr2_of_kz2(K_z2):
    """Explicit boundary K_r^2 as a function of K_z^2 on [0, 1/2].

    Derived by eliminating t from the parametric form (the t in [1/2, 2/3]
    branch).  Returns NaN outside [0, 1/2], where the boundary does not
    exist.  Accepts arrays.
    """
    kz2 = np.asarray(K_z2, dtype=float)
    valid = (kz2 >= 0.0) & (kz2 <= 0.5)
    t = np.where(valid, (2.0 + np.sqrt(np.clip(4.0 - 6.0 * kz2, 0.0, None))) / 6.0, np.nan)
    out = 2.0 * t**3 - t**2
    if out.ndim == 0:
        return float(out)
    return out


def lateral_system_matrix(freqs: DerivedFrequencies) -> np.ndarray:
    """First-order 6x6 matrix for (dx, dy, vx, vy, ex, ey), canonical scaling.

    (dx, dy) are the lateral displacements, (vx, vy) their velocities and
    (ex, ey) the transverse spin-direction components about the
    counter-aligned state.  Only the product of the force and torque
    couplings is fixed by the frequencies, so both are set to the geometric
    mean g = sqrt(omega_p*(omega_r^2 + omega_z^2/2)); this rescales dx, dy
    without moving any eigenvalue.
    """
    wp, wz2, wr2 = freqs.omega_p, freqs.omega_z**2, freqs.omega_r**2
    g = math.sqrt(wp * (wr2 + 0.5 * wz2))
    a = np.zeros((6, 6))
    a[0, 2] = 1.0
    a[1, 3] = 1.0
    a[2, 0] = 0.5 * wz2
    a[2, 4] = g
    a[3, 1] = 0.5 * wz2
    a[3, 5] = -g
    a[4, 1] = -g
    a[4, 5] = wp
    a[5, 0] = -g
    a[5, 4] = -wp
    return a


def lateral_system_matrix_physical(cfg, p) -> np.ndarray:
    """Same system with physical coefficients from the trap and particle.

    Matches the Jacobian of the full equations of motion at the
    counter-aligned equilibrium, restricted to (x, y, vx, vy, nx, ny).
    """
    f = p.mu * cfg.Bp / p.mass       # force per unit spin tilt
    t = p.mu * cfg.Bp / p.spin       # precession drive per unit displacement
    wz2 = p.mu * cfg.Bpp / p.mass
    wp = p.mu * cfg.B0 / p.spin
    a = np.zeros((6, 6))
    a[0, 2] = 1.0
    a[1, 3] = 1.0
    a[2, 0] = 0.5 * wz2
    a[2, 4] = f
    a[3, 1] = 0.5 * wz2
    a[3, 5] = -f
    a[4, 1] = -t
    a[4, 5] = wp
    a[5, 0] = -t
    a[5, 4] = -wp
    return a


def axial_eigenvalues(freqs: DerivedFrequencies) -> np.ndarray:
    """Eigenvalues of the decoupled axial block: exactly +/- i*omega_z."""
    return np.array([1j * freqs.omega_z, -1j * freqs.omega_z])


def linearized_jacobian_spectrum(freqs: DerivedFrequencies) -> np.ndarray:
    """Eigenvalues of the 6-dimensional lateral system.

    These equal -i*omega for omega = omega_p*u with u running over the
    union of the ccw and cw cubic roots, which is the cross-check against
    :func:`secular_roots`.
    """
    return np.linalg.eigvals(lateral_system_matrix(freqs))


def stability_map(kr2_range=(0.0, 0.2), kz2_range=(0.0, 0.6), resolution: int = 200) -> StabilityMap:
    """Cell-centered stability raster over a (K_r^2, K_z^2) window.

    Cells that the marginal-stability curve passes through (within one cell
    width) are flagged MARGINAL; the rest are STABLE/UNSTABLE by the
    discriminant sign at the cell center.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    kr2_lo, kr2_hi = map(float, kr2_range)
    kz2_lo, kz2_hi = map(float, kz2_range)
    if not (kr2_hi > kr2_lo >= 0.0 and kz2_hi > kz2_lo >= 0.0):
        raise ValueError("ranges must be nonnegative and increasing")
    dr = (kr2_hi - kr2_lo) / resolution
    dz = (kz2_hi - kz2_lo) / resolution
    kr2 = kr2_lo + dr * (np.arange(resolution) + 0.5)
    kz2 = kz2_lo + dz * (np.arange(resolution) + 0.5)

    disc = normalized_discriminant(kr2[:, None], kz2[None, :])
    flags = np.where(disc >= -_DISCRIMINANT_TOL, STABLE, UNSTABLE).astype(np.int8)

    # Marginal: the boundary curve crosses the cell. The curve K_r^2 = b(K_z^2)
    # is monotone decreasing on K_z^2 in [0, 1/2], so its K_r^2 range over a
    # cell's K_z^2 extent is [b(high), b(low)].
    z_lo = np.clip(kz2 - 0.5 * dz, 0.0, 0.5)
    z_hi = np.clip(kz2 + 0.5 * dz, 0.0, 0.5)
    has_curve = z_hi > z_lo
    b_hi = np.where(has_curve, boundary_kr2_of_kz2(np.where(has_curve, z_lo, 0.0)), -np.inf)
    b_lo = np.where(has_curve, boundary_kr2_of_kz2(np.where(has_curve, z_hi, 0.0)), -np.inf)
    cell_lo = (kr2 - 0.5 * dr)[:, None]
    cell_hi = (kr2 + 0.5 * dr)[:, None]
    marginal = (b_hi[None, :] >= cell_lo) & (b_lo[None, :] <= cell_hi) & has_curve[None, :]
    flags[marginal] = MARGINAL
    return StabilityMap(K_r2=kr2, K_z2=kz2, flags=flags)


def write_stability_map_csv(smap: StabilityMap, path, header_lines=()) -> None:
    """Raster CSV with columns K_r2, K_z2, stable in {0,1,2=marginal}."""
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("K_r2,K_z2,stable\n")
        for i, kr2 in enumerate(smap.K_r2):
            for j, kz2 in enumerate(smap.K_z2):
                fh.write(f"{kr2:.12g},{kz2:.12g},{int(smap.flags[i, j])}\n")


def write_boundary_csv(curve: BoundaryCurve, path, header_lines=()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("t,K_r2,K_z2\n")
        for t, kr2, kz2 in zip(curve.t, curve.K_r2, curve.K_z2):
            fh.write(f"{t:.12g},{kr2:.12g},{kz2:.12g}\n")


_PLOT_TEMPLATE = '''"""Render the stability region from the exported CSVs (requires matplotlib)."""
import csv

import matplotlib.pyplot as plt
import numpy as np


def load_raster(path):
    kr2, kz2, flag = [], [], []
    with open(path) as fh:
        for row in csv.reader(r for r in fh if not r.startswith("#")):
            if row[0] == "K_r2":
                continue
            kr2.append(float(row[0])); kz2.append(float(row[1])); flag.append(int(row[2]))
    kr2 = np.array(kr2); kz2 = np.array(kz2); flag = np.array(flag)
    nr, nz = len(np.unique(kr2)), len(np.unique(kz2))
    return kr2.reshape(nr, nz), kz2.reshape(nr, nz), flag.reshape(nr, nz)


def load_boundary(path):
    kr2, kz2 = [], []
    with open(path) as fh:
        for row in csv.reader(r for r in fh if not r.startswith("#")):
            if row[0] == "t":
                continue
            kr2.append(float(row[1])); kz2.append(float(row[2]))
    return np.array(kr2), np.array(kz2)


KR2, KZ2, FLAG = load_raster({raster_path!r})
bkr2, bkz2 = load_boundary({boundary_path!r})

fig, ax = plt.subplots(figsize=(5, 6))
ax.pcolormesh(KR2, KZ2, FLAG, cmap="viridis", shading="nearest")
ax.plot(bkr2, bkz2, "r-", lw=2, label="marginal-stability curve")
ax.set_xlabel(r"$K_r^2$")
ax.set_ylabel(r"$K_z^2$")
ax.set_title("Stable region of the counter-aligned trapped state")
ax.legend()
fig.tight_layout()
fig.savefig({png_path!r}, dpi=160)
print("wrote", {png_path!r})
'''


def write_plot_script(path, raster_path, boundary_path, png_path="stability_map.png") -> None:
    """Emit a standalone matplotlib script next to the exported CSVs."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_PLOT_TEMPLATE.format(
            raster_path=str(raster_path),
            boundary_path=str(boundary_path),
            png_path=str(png_path),
        ))
