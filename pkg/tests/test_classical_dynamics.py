import math

import numpy as np
import pytest

from magtrap import (
    ClassicalState,
    ParticleSpec,
    StiffnessError,
    TrapConfig,
    derive_frequencies,
    dimensionless_trap,
    energy,
    eom_rhs,
    equilibrium_state,
    integrate,
    perturbed_equilibrium,
)
from magtrap.classical_dynamics import TRAJECTORY_COLUMNS, numerical_lateral_jacobian
from magtrap.stability import lateral_system_matrix_physical

CFG = TrapConfig(B0=100.0, Bp=10.0, Bpp=1.0)
P = ParticleSpec(mass=1e-22, mu=1e-20)


class TestRhs:
    @pytest.mark.parametrize("antiparallel", [True, False])
    def test_equilibria_are_fixed_points(self, antiparallel):
        s = equilibrium_state(antiparallel=antiparallel)
        dpos, dvel, dn = eom_rhs(CFG, P, s)
        assert np.all(dpos == 0.0)
        assert np.all(dvel == 0.0)
        assert np.all(dn == 0.0)

    def test_transverse_spin_precesses(self):
        # n along x at the origin: dn/dt = (mu B0/spin) (x cross z-hat) = -(mu B0/spin) y-hat
        s = ClassicalState(pos=np.zeros(3), vel=np.zeros(3), n_hat=[1.0, 0.0, 0.0])
        _, _, dn = eom_rhs(CFG, P, s)
        omega_p = P.mu * CFG.B0 / P.spin
        np.testing.assert_allclose(dn, [0.0, -omega_p, 0.0], rtol=1e-14)

    def test_energy_at_equilibria(self):
        mu_b0 = P.mu * CFG.B0
        assert math.isclose(energy(CFG, P, equilibrium_state(True)), mu_b0, rel_tol=1e-15)
        assert math.isclose(energy(CFG, P, equilibrium_state(False)), -mu_b0, rel_tol=1e-15)

    def test_non_unit_spin_rejected(self):
        with pytest.raises(ValueError):
            ClassicalState(pos=np.zeros(3), vel=np.zeros(3), n_hat=[0.0, 0.0, 0.5])


class TestLinearization:
    def test_numerical_jacobian_matches_linearized_system(self):
        jac = numerical_lateral_jacobian(CFG, P)
        ref = lateral_system_matrix_physical(CFG, P)
        scale = np.max(np.abs(ref))
        assert np.max(np.abs(jac - ref)) < 1e-8 * scale

    def test_axial_block(self):
        # d(dvz)/dz at the counter-aligned equilibrium is -mu*Bpp/m.
        h = 1e-6
        up = ClassicalState(pos=[0, 0, h], vel=np.zeros(3), n_hat=[0, 0, -1])
        dn_ = ClassicalState(pos=[0, 0, -h], vel=np.zeros(3), n_hat=[0, 0, -1])
        dvz = (eom_rhs(CFG, P, up)[1][2] - eom_rhs(CFG, P, dn_)[1][2]) / (2 * h)
        assert math.isclose(dvz, -P.mu * CFG.Bpp / P.mass, rel_tol=1e-9)


class TestIntegrate:
    def test_equilibrium_stays_put(self):
        cfg, p = dimensionless_trap(0.1, 0.1)
        traj = integrate(cfg, p, equilibrium_state(True), t_end=50.0, tol=1e-10)
        assert traj.max_excursion == 0.0
        assert np.all(traj.vel == 0.0)

    def test_energy_conservation_generic_trajectory(self):
        cfg, p = dimensionless_trap(0.2, 0.15)
        tilt = 0.3
        s0 = ClassicalState(
            pos=[0.4, -0.2, 0.3],
            vel=[0.02, 0.01, -0.015],
            n_hat=[math.sin(tilt), 0.0, -math.cos(tilt)],
        )
        tol = 1e-9
        traj = integrate(cfg, p, s0, t_end=20 * 2 * math.pi, tol=tol)
        assert traj.energy_drift <= 10 * tol

    def test_spin_norm_preserved(self):
        cfg, p = dimensionless_trap(0.1, 0.1)
        s0 = perturbed_equilibrium(cfg, p, amplitude=1e-3)
        traj = integrate(cfg, p, s0, t_end=100.0, tol=1e-10)
        norms = np.linalg.norm(traj.n_hat, axis=1)
        assert np.max(np.abs(norms - 1.0)) < 1e-12
        assert traj.max_renorm_correction < 1e-9

    def test_bounded_oscillation_inside_stable_region(self):
        cfg, p = dimensionless_trap(0.1, 0.1)
        f = derive_frequencies(cfg, p)
        s0 = perturbed_equilibrium(cfg, p, amplitude=1e-4)
        r0 = float(np.linalg.norm(s0.pos))
        traj = integrate(cfg, p, s0, t_end=10 * 2 * math.pi / f.omega_r, tol=1e-10)
        assert traj.max_excursion < 10 * r0

    def test_aligned_state_axial_growth(self):
        cfg, p = dimensionless_trap(0.1, 0.1)
        f = derive_frequencies(cfg, p)
        z0 = 1e-4
        s0 = ClassicalState(pos=[0, 0, z0], vel=np.zeros(3), n_hat=[0, 0, 1.0])
        traj = integrate(cfg, p, s0, t_end=5.0 / f.omega_z, tol=1e-10)
        dz = np.abs(traj.pos[:, 2])
        # cosh growth: monotone, ~74x after five e-folding times
        assert np.all(np.diff(dz) > -1e-15)
        assert dz[-1] / z0 > 10.0

    def test_step_budget_exhaustion_reports_stiffness(self):
        cfg, p = dimensionless_trap(0.1, 0.1)
        s0 = perturbed_equilibrium(cfg, p, amplitude=1e-3)
        with pytest.raises(StiffnessError, match="budget"):
            integrate(cfg, p, s0, t_end=1000.0, tol=1e-10, max_steps=10)

    def test_rejects_bad_arguments(self):
        cfg, p = dimensionless_trap(0.1, 0.1)
        s0 = equilibrium_state()
        with pytest.raises(ValueError):
            integrate(cfg, p, s0, t_end=-1.0)
        with pytest.raises(ValueError):
            integrate(cfg, p, s0, t_end=1.0, tol=0.0)
        with pytest.raises(ValueError):
            integrate(cfg, p, s0, t_end=1.0, method="euler")

    def test_random_perturbation_direction(self):
        cfg, p = dimensionless_trap(0.1, 0.1)
        rng = np.random.default_rng(7)
        s0 = perturbed_equilibrium(cfg, p, amplitude=1e-4, rng=rng)
        s1 = perturbed_equilibrium(cfg, p, amplitude=1e-4, rng=np.random.default_rng(7))
        np.testing.assert_array_equal(s0.pos, s1.pos)
        assert abs(np.linalg.norm(s0.n_hat) - 1.0) < 1e-12


class TestCsvExport:
    def test_columns_and_rows(self, tmp_path):
        cfg, p = dimensionless_trap(0.1, 0.1)
        s0 = perturbed_equilibrium(cfg, p, amplitude=1e-3)
        traj = integrate(cfg, p, s0, t_end=10.0, tol=1e-8)
        out = tmp_path / "traj.csv"
        traj.write_csv(out, header_lines=["units: dimensionless"])
        lines = out.read_text().splitlines()
        assert lines[0] == "# units: dimensionless"
        assert lines[1] == ",".join(TRAJECTORY_COLUMNS)
        assert len(lines) == 2 + len(traj.t)
