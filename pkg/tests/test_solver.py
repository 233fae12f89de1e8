import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_field
from dragflow.diagnostics import field_norm
from dragflow.initial_data import DataSpec, generic_gaussian, single_mode
from dragflow.kernel import apply_propagator
from dragflow.solver import (BlowUpError, Integrator, StepperConfig, exp_minus_one, load_checkpoint,
                             nonlinear_rhs, reconstruct_physical, recover_pressure, save_checkpoint,
                             self_convergence, simulate, step, v_equation_rhs)
from dragflow.spectral import (ConfigurationError, State, build_grid, divergence, gradient,
                               leray_project, to_spectral)


@pytest.fixture(scope="module")
def g2pi():
    return build_grid(16, 2 * np.pi)


@pytest.fixture(scope="module")
def small_state():
    g = build_grid(16, 8 * np.pi)
    return generic_gaussian(DataSpec(amplitude=0.05, width=2.0, seed=3), g)


def state_from_physical(grid, phi, u, v, c=1.0):
    return State(grid, to_spectral(phi), to_spectral(u), to_spectral(v), c=c)


class TestConfig:
    @pytest.mark.parametrize("kw", [{"dt": 0.0}, {"t_end": -1.0}, {"cadence": 0}, {"exp_order": 2}])
    def test_rejects(self, kw):
        base = {"dt": 0.1, "t_end": 1.0}
        base.update(kw)
        with pytest.raises(ConfigurationError):
            StepperConfig(**base)

    def test_step_count_lands_on_t_end(self):
        cfg = StepperConfig(dt=0.3, t_end=1.0)
        assert cfg.n_steps == 4 and cfg.dt_effective == 0.25

    def test_stability_guard(self, small_state):
        with pytest.raises(ConfigurationError, match="dt"):
            step(small_state, StepperConfig(dt=5.0, t_end=5.0))


class TestNonlinearTerms:
    def test_zero_velocities(self, g2pi):
        x = g2pi.x
        s = state_from_physical(g2pi, 0.1 * np.cos(x[0]), np.zeros((3, *g2pi.shape)), np.zeros((3, *g2pi.shape)))
        F = nonlinear_rhs(s)
        assert not np.any(F.f1) and not np.any(F.f2) and not np.any(F.f3)

    def test_advection_product(self, g2pi):
        x = g2pi.x
        z = np.zeros_like(x[0])
        s = state_from_physical(g2pi, np.cos(x[1]), np.array([z, np.cos(x[0]), z]), np.zeros((3, *g2pi.shape)))
        f1 = nonlinear_rhs(s).f1
        assert np.max(np.abs(f1 - to_spectral(np.cos(x[0]) * np.sin(x[1])))) <= 1e-13

    def test_phi_zero_gives_projected_convection(self, g2pi):
        x = g2pi.x
        z = np.zeros_like(x[0])
        v = np.array([np.sin(x[1]), np.sin(x[0]), z])
        s = state_from_physical(g2pi, z, np.zeros_like(v), v)
        conv = np.array([np.sin(x[0]) * np.cos(x[1]), np.sin(x[1]) * np.cos(x[0]), z])
        expect = -leray_project(g2pi, to_spectral(conv))
        assert np.max(np.abs(nonlinear_rhs(s).f3 - expect)) <= 1e-13

    def test_f3_solenoidal_and_real(self, small_state):
        F = nonlinear_rhs(small_state)
        g = small_state.grid
        assert np.max(np.abs(divergence(g, F.f3))) <= 1e-13 * np.max(np.abs(F.f3)) * g.xi_mag.max()
        assert np.all(np.isfinite(F.stacked()))

    def test_exp_minus_one_accuracy(self):
        phi = np.array([1e-12, -3e-9, 1e-4, -0.01])
        assert np.allclose(exp_minus_one(phi) / np.expm1(phi), 1.0, rtol=1e-14, atol=0)
        assert np.allclose(exp_minus_one(phi, 12) / np.expm1(phi), 1.0, rtol=1e-14, atol=0)
        err3 = abs(exp_minus_one(np.array(0.01), 3) - np.expm1(0.01))
        assert err3 == pytest.approx(0.01**4 / 24, rel=0.01)


class TestPressure:
    def test_vanishes_when_sources_do(self, g2pi):
        x = g2pi.x
        z = np.zeros_like(x[0])
        v = np.array([np.sin(x[1]), z, z])  # v . grad v = 0
        s = state_from_physical(g2pi, 0.1 * np.cos(x[2]), v, v)
        assert np.max(np.abs(recover_pressure(s))) < 1e-15

    def test_gradient_relative_velocity(self, g2pi):
        rng = np.random.default_rng(0)
        q = random_field(g2pi, rng, smooth=0.1)
        s = State.zeros(g2pi, c=2.0)
        s.u = gradient(g2pi, q)
        P = recover_pressure(s, dealiased=False)
        g = g2pi
        expect = np.zeros_like(P)
        nz = g.xi_mag_sq > 0
        expect[nz] = (-2.0 * np.sum(1j * g.xi_sym * s.u, axis=0))[nz] / g.xi_mag_sq[nz]
        assert np.max(np.abs(P - expect)) <= 1e-14 * np.max(np.abs(expect))
        assert P[0, 0, 0] == 0

    @given(st.integers(0, 10**6))
    def test_divergence_consistency(self, seed):
        g = build_grid(12, 6.0)
        rng = np.random.default_rng(seed)
        s = State(g, 0.01 * random_field(g, rng, smooth=0.1), 0.01 * random_field(g, rng, True, smooth=0.1),
                  0.01 * leray_project(g, random_field(g, rng, True, smooth=0.1)))
        rhs = v_equation_rhs(s, recover_pressure(s))
        resid = np.max(np.abs(divergence(g, rhs)))
        assert resid <= 1e-11 * np.max(np.abs(rhs)) * g.xi_mag.max()


class TestStep:
    def test_linear_only_is_propagator(self, small_state):
        cfg = StepperConfig(dt=0.2, t_end=0.2, linear_only=True)
        out = step(small_state, cfg)
        ref = apply_propagator(small_state, 0.2)
        assert np.max(np.abs(out.stacked() - ref.stacked())) <= 1e-15 and out.t == pytest.approx(0.2)

    def test_constant_density_has_no_forcing(self, g2pi):
        s = State.zeros(g2pi)
        s.phi[0, 0, 0] = 0.3
        out = step(s, StepperConfig(dt=0.02, t_end=0.02))
        assert np.array_equal(out.stacked(), apply_propagator(s, 0.02).stacked())

    def test_nonlinear_correction_is_quadratic(self, g2pi):
        diffs = []
        for amp in (1e-3, 2e-3):
            s = single_mode(g2pi, "phi", (1, 0, 0), amp)
            out = step(s, StepperConfig(dt=0.02, t_end=0.02))
            diffs.append(np.max(np.abs(out.stacked() - apply_propagator(s, 0.02).stacked())))
        assert diffs[1] / diffs[0] == pytest.approx(4.0, rel=1e-3)

    def test_v_stays_solenoidal(self, small_state):
        res = simulate(small_state, StepperConfig(dt=0.1, t_end=1.0, cadence=5))
        assert res.monitors["max_div_defect"] <= 1e-12

    def test_blow_up_reported_with_time(self, g2pi):
        s = single_mode(g2pi, "phi", (1, 0, 0), 2.0)
        with pytest.raises(BlowUpError) as err:
            step(s, StepperConfig(dt=0.01, t_end=0.01))
        assert err.value.t == pytest.approx(0.01)

    def test_blow_up_in_simulate_keeps_partial_series(self, g2pi):
        s = single_mode(g2pi, "phi", (1, 0, 0), 2.0)
        with pytest.raises(BlowUpError) as err:
            simulate(s, StepperConfig(dt=0.01, t_end=0.1))
        assert err.value.series is not None and err.value.series.times == [0.0]

    def test_non_finite_detected(self, g2pi):
        s = State.zeros(g2pi)
        s.u[0, 1, 0, 0] = np.nan
        with pytest.raises(BlowUpError, match="non-finite"):
            Integrator(g2pi, StepperConfig(dt=0.1, t_end=0.1), 1.0).step(s)

    def test_second_order(self, small_state):
        rep = self_convergence(small_state, 1.0, [0.2, 0.1])
        assert rep["ratios"][0] == pytest.approx(4.0, rel=0.2)


class TestSimulate:
    def test_zero_data(self, g2pi):
        res = simulate(State.zeros(g2pi), StepperConfig(dt=0.02, t_end=0.2))
        assert all(np.all(np.asarray(v) == 0) for k, v in res.series.values.items() if k[0] != "relax_ratio")

    def test_linear_only_matches_propagator_at_samples(self, small_state):
        res = simulate(small_state, StepperConfig(dt=0.1, t_end=2.0, cadence=5, linear_only=True),
                       hooks=(lambda st: {("phi", 0): field_norm(st.grid, st.phi), ("u", 1): field_norm(st.grid, st.u, 1)},))
        for t, a, b in zip(res.series.times, res.series.get("phi", 0), res.series.get("u", 1)):
            ref = apply_propagator(small_state, t)
            assert a == pytest.approx(field_norm(ref.grid, ref.phi), rel=1e-10)
            assert b == pytest.approx(field_norm(ref.grid, ref.u, 1), rel=1e-10)
        assert res.series.times[-1] == pytest.approx(2.0)
        final = apply_propagator(small_state, 2.0).stacked()
        assert np.max(np.abs(res.state.stacked() - final)) <= 1e-10 * np.max(np.abs(final))

    def test_monitors_on_small_data(self, small_state):
        res = simulate(small_state, StepperConfig(dt=0.05, t_end=2.0, cadence=10))
        m = res.monitors
        assert m["max_energy_increase"] <= 1e-10
        assert m["max_momentum_drift"] <= 1e-7
        # nonlinear share of the energy balance is small compared with the dissipation
        assert m["max_dissipation_margin"] < 0.05
        assert len(res.series.times) == 5


class TestReconstruction:
    def test_zero_perturbation(self, g2pi):
        rho, u, v = reconstruct_physical(State.zeros(g2pi, c=2.5))
        assert np.all(rho == 2.5) and not np.any(u) and not np.any(v)

    def test_max_density(self, g2pi):
        s = single_mode(g2pi, "phi", (1, 0, 0), 0.01)
        rho, _, _ = reconstruct_physical(s)
        assert rho.max() == pytest.approx(np.exp(0.01), rel=1e-15)
        assert np.all(rho > 0)

    def test_degenerate_density(self, g2pi):
        with pytest.raises(BlowUpError):
            reconstruct_physical(single_mode(g2pi, "phi", (1, 0, 0), 1.5))


class TestCheckpoint:
    def test_round_trip_and_mode_order(self, small_state, tmp_path):
        path = tmp_path / "ck.npz"
        save_checkpoint(small_state.copy(t=1.25), path)
        back = load_checkpoint(path)
        assert np.array_equal(back.stacked(), small_state.stacked()) and back.t == 1.25
        n = small_state.grid.n
        with np.load(path) as z:
            assert z["coeffs"][0, n // 2 + 1, n // 2, n // 2 - 2] == small_state.phi[1, 0, -2]

    def test_version_checked(self, small_state, tmp_path):
        path = tmp_path / "ck.npz"
        save_checkpoint(small_state, path)
        with np.load(path) as z:
            data = dict(z)
        data["version"] = 99
        np.savez(path, **data)
        with pytest.raises(ConfigurationError, match="version"):
            load_checkpoint(path)
