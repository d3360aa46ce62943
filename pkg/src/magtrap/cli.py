"""Command-line front end.

Four subcommands: ``stability-map`` (raster + boundary CSV + plot script),
``trajectory`` (integrate a preset state, CSV export), ``escape-rate``
(single-point JSON report or a sweep CSV over the adiabaticity ratios) and
``table1`` (benchmark time-scale table for the default CGS trap).

Configs are JSON.  In CGS units:

    {"B0_oe": 100, "Bprime_oe_per_cm": 10, "Bpp_oe_per_cm2": 1,
     "mass_g": 1e-22, "mu_emu": 1e-20, "spin_erg_s": 1.05e-27}

with spin optional (defaults to hbar).  In dimensionless mode (times in
1/omega_p, lengths absorbed into the unit trap):

    {"units": "dimensionless", "K_r": 0.1, "K_z": 0.1}

Exit codes: 0 ok, 2 config error, 3 I/O failure, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .classical_dynamics import (
    ClassicalState,
    StiffnessError,
    equilibrium_state,
    integrate,
    perturbed_equilibrium,
)
from .field_model import (
    DerivedFrequencies,
    ParticleSpec,
    TrapConfig,
    derive_frequencies,
    dimensionless_trap,
    frequencies_from_ratios,
    trap_particle_from_dict,
)
from .quantum_escape import escape_rate
from .stability import (
    boundary_curve,
    stability_map,
    write_boundary_csv,
    write_plot_script,
    write_stability_map_csv,
)

# Benchmark CGS trap: B0 = 100 Oe with B0/Bp and sqrt(B0/Bpp) of order 10 cm,
# and a spin-1 atom of mass ~1e-22 g, moment ~1e-20 emu.
TABLE1_DEFAULTS = {
    "B0_oe": 100.0,
    "Bprime_oe_per_cm": 10.0,
    "Bpp_oe_per_cm2": 1.0,
    "mass_g": 1e-22,
    "mu_emu": 1e-20,
}

# Paper-benchmark orders of magnitude for the table rows.
_TABLE1_ORDERS = {
    "mass_g": 1e-22,
    "mu_emu": 1e-20,
    "K_z": 1e-8,
    "K_r": 1e-8,
    "inv_omega_p_s": 1e-9,
    "inv_omega_r_s": 1e-1,
    "inv_omega_z_s": 1e-1,
    "log10_Tesc_s": 1e8,
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    trap: TrapConfig
    particle: ParticleSpec
    freqs: DerivedFrequencies
    units: str          # "cgs" or "dimensionless"
    sha256: str
    raw: dict


def _canonical_sha(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def load_run_config(path=None) -> RunConfig:
    """Read and validate a config file; None means the benchmark defaults."""
    if path is None:
        raw = dict(TABLE1_DEFAULTS)
    else:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")

    units = raw.get("units", "cgs")
    try:
        if units == "cgs":
            trap, particle = trap_particle_from_dict(raw)
        elif units == "dimensionless":
            extra = set(raw) - {"units", "K_r", "K_z"}
            if extra:
                raise ValueError(f"unknown dimensionless config keys: {sorted(extra)}")
            trap, particle = dimensionless_trap(float(raw["K_r"]), float(raw["K_z"]))
        else:
            raise ValueError(f"units must be 'cgs' or 'dimensionless', got {units!r}")
        freqs = derive_frequencies(trap, particle)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    return RunConfig(
        trap=trap, particle=particle, freqs=freqs,
        units=units, sha256=_canonical_sha(raw), raw=raw,
    )


def _header(rc: RunConfig, command: str, seed=None):
    lines = [
        f"magtrap {__version__}",
        f"command: {command}",
        f"units: {rc.units}",
        f"config sha256: {rc.sha256}",
    ]
    if seed is not None:
        lines.append(f"seed: {seed}")
    return lines


def _time_unit(rc: RunConfig) -> str:
    return "s" if rc.units == "cgs" else "1/omega_p"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_stability_map(args) -> int:
    rc = load_run_config(args.config)
    smap = stability_map(
        kr2_range=(0.0, args.kr2_max),
        kz2_range=(0.0, args.kz2_max),
        resolution=args.resolution,
    )
    curve = boundary_curve(max(args.resolution, 64))
    base = args.output or "stability_map"
    raster_path = f"{base}.csv"
    boundary_path = f"{base}_boundary.csv"
    script_path = f"{base}_plot.py"
    header = _header(rc, "stability-map")
    write_stability_map_csv(smap, raster_path, header)
    write_boundary_csv(curve, boundary_path, header)
    write_plot_script(script_path, raster_path, boundary_path, f"{base}.png")
    print(f"wrote {raster_path} ({args.resolution ** 2} cells), {boundary_path}, {script_path}")
    return 0


def cmd_trajectory(args) -> int:
    rc = load_run_config(args.config)
    antiparallel = args.preset == "antiparallel"
    rng = np.random.default_rng(args.seed) if args.seed is not None else None
    if args.perturbation == 0.0:
        s0 = equilibrium_state(antiparallel=antiparallel)
    elif not antiparallel:
        # Axial-only perturbation: the aligned state's instability lives in
        # the decoupled z-block, and keeping the spin exactly on +z avoids
        # resolving the (possibly enormous) precession frequency.
        length = math.sqrt(rc.particle.spin / (rc.particle.mass * rc.freqs.omega_r))
        s0 = ClassicalState(
            pos=[0.0, 0.0, args.perturbation * length],
            vel=[0.0, 0.0, 0.0],
            n_hat=[0.0, 0.0, 1.0],
        )
    else:
        s0 = perturbed_equilibrium(
            rc.trap, rc.particle, amplitude=args.perturbation,
            antiparallel=True, rng=rng,
        )
    if args.t_end is not None:
        t_end = args.t_end
    else:
        t_end = args.periods * 2.0 * math.pi / rc.freqs.omega_r
    traj = integrate(rc.trap, rc.particle, s0, t_end, tol=args.tol,
                     max_steps=args.max_steps)

    out = args.output or "trajectory.csv"
    header = _header(rc, "trajectory", seed=args.seed)
    header.append(f"time unit: {_time_unit(rc)}")
    traj.write_csv(out, header)

    r0 = float(np.linalg.norm(s0.pos))
    ratio = traj.max_excursion / r0 if r0 > 0 else 0.0
    z0 = abs(s0.pos[2])
    z_growth = abs(traj.pos[-1, 2]) / z0 if z0 > 0 else 0.0
    unbounded = (not antiparallel) and z_growth > 10.0
    print(
        f"wrote {out}: steps={traj.n_steps} energy_drift={traj.energy_drift:.3e} "
        f"max_excursion={traj.max_excursion:.6g} excursion_ratio={ratio:.3g} "
        f"unbounded_growth={'yes' if unbounded else 'no'}"
    )
    return 0


def cmd_escape_rate(args) -> int:
    rc = load_run_config(args.config)
    unit = _time_unit(rc)
    if not args.sweep:
        res = escape_rate(rc.freqs)
        report = {
            "version": __version__,
            "config_sha256": rc.sha256,
            "units": rc.units,
            "time_unit": unit,
            "omega_p": rc.freqs.omega_p,
            "omega_r": rc.freqs.omega_r,
            "omega_z": rc.freqs.omega_z,
            "K_r": rc.freqs.K_r,
            "K_z": rc.freqs.K_z,
            "regime": res.regime,
            "log_rate": res.log_rate,
            "log10_Tesc": res.log10_escape_time,
            "quadrature_error": res.quadrature_error,
        }
        if args.format == "csv":
            text = "\n".join(
                [f"# {line}" for line in _header(rc, "escape-rate")]
                + ["K_r,K_z,omega_p,log10_Tesc,regime",
                   f"{rc.freqs.K_r:.10g},{rc.freqs.K_z:.10g},{rc.freqs.omega_p:.10g},"
                   f"{res.log10_escape_time:.10g},{res.regime}"]
            )
        else:
            text = json.dumps(report, indent=2)
        if args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
            print(f"wrote {args.output}")
        else:
            print(text)
        return 0

    # Sweep mode: log-spaced grid over (K_r, K_z) at the config's omega_p.
    ks = np.geomspace(args.k_min, args.k_max, args.resolution)
    out = args.output or "escape_rate_sweep.csv"
    header = _header(rc, "escape-rate --sweep")
    header.append(f"time unit: {unit}")
    with open(out, "w", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("K_r,K_z,omega_p,log10_Tesc,regime\n")
        import warnings as _w
        with _w.catch_warnings():
            _w.simplefilter("ignore")   # large-K rows are formal, still emitted
            for k_r in ks:
                for k_z in ks:
                    freqs = frequencies_from_ratios(k_r, k_z, rc.freqs.omega_p)
                    res = escape_rate(freqs)
                    fh.write(
                        f"{k_r:.10g},{k_z:.10g},{rc.freqs.omega_p:.10g},"
                        f"{res.log10_escape_time:.10g},{res.regime}\n"
                    )
    print(f"wrote {out} ({args.resolution ** 2} rows)")
    return 0


def _decade_match(value: float, order: float) -> str:
    return "ok" if abs(math.log10(abs(value)) - math.log10(order)) <= 1.0 else "OFF"


def cmd_table1(args) -> int:
    rc = load_run_config(args.config)
    if rc.units != "cgs":
        raise ConfigError("table1 needs CGS units (it reports dimensionful time scales)")
    f = rc.freqs
    res = escape_rate(f)
    rows = [
        ("mass [g]", rc.particle.mass, _TABLE1_ORDERS["mass_g"]),
        ("mu [emu]", rc.particle.mu, _TABLE1_ORDERS["mu_emu"]),
        ("K_z", f.K_z, _TABLE1_ORDERS["K_z"]),
        ("K_r", f.K_r, _TABLE1_ORDERS["K_r"]),
        ("1/omega_p [s]", 1.0 / f.omega_p, _TABLE1_ORDERS["inv_omega_p_s"]),
        ("1/omega_r [s]", 1.0 / f.omega_r, _TABLE1_ORDERS["inv_omega_r_s"]),
        ("1/omega_z [s]", 1.0 / f.omega_z, _TABLE1_ORDERS["inv_omega_z_s"]),
        ("log10(T_esc [s])", res.log10_escape_time, _TABLE1_ORDERS["log10_Tesc_s"]),
    ]
    lines = [
        f"# magtrap {__version__}  table1  config sha256: {rc.sha256}",
        f"{'quantity':<18} {'computed':>14} {'benchmark':>12} {'match':>6}",
    ]
    for name, value, order in rows:
        lines.append(f"{name:<18} {value:>14.6g} {order:>12.0e} {_decade_match(value, order):>6}")
    text = "\n".join(lines)
    print(text)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return 0


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magtrap",
        description="Magnetic trap for a spin-1 particle: stability and spin-flip lifetime.",
    )
    parser.add_argument("--version", action="version", version=f"magtrap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stability-map", help="raster of the stable region plus boundary curve")
    p.add_argument("--config", default=None)
    p.add_argument("--output", default=None, help="output base path (default stability_map)")
    p.add_argument("--resolution", type=int, default=200)
    p.add_argument("--kr2-max", type=float, default=0.2)
    p.add_argument("--kz2-max", type=float, default=0.6)
    p.set_defaults(func=cmd_stability_map)

    p = sub.add_parser("trajectory", help="integrate a preset state and export CSV")
    p.add_argument("--config", default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--preset", choices=("antiparallel", "parallel"), default="antiparallel")
    p.add_argument("--perturbation", type=float, default=1e-4,
                   help="relative perturbation amplitude (0 for the exact equilibrium)")
    p.add_argument("--periods", type=float, default=5.0,
                   help="duration in lateral vibration periods (ignored with --t-end)")
    p.add_argument("--t-end", type=float, default=None, help="duration in config time units")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--seed", type=int, default=None,
                   help="randomize the perturbation direction with this seed")
    p.add_argument("--max-steps", type=int, default=1_000_000,
                   help="integrator step budget; a spin-tilted state must resolve "
                        "the precession, ~omega_p*t/(2 pi) steps, so realistic CGS "
                        "ratios K~1e-8 want a dimensionless config instead")
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("escape-rate", help="spin-flip escape rate report or sweep")
    p.add_argument("--config", default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="json",
                   help="single-point reports are json; sweeps are csv")
    p.add_argument("--sweep", action="store_true", help="sweep a (K_r, K_z) grid")
    p.add_argument("--k-min", type=float, default=1e-3)
    p.add_argument("--k-max", type=float, default=1e-1)
    p.add_argument("--resolution", type=int, default=20)
    p.set_defaults(func=cmd_escape_rate)

    p = sub.add_parser("table1", help="benchmark time scales for the default CGS trap")
    p.add_argument("--config", default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_table1)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StiffnessError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
