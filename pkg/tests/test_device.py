"""Single-cell device law and the two programming schemes."""

import numpy as np
import pytest

from rram_baseband.device import (
    DEPRESSION,
    POTENTIATION,
    DeviceParams,
    DeviceState,
    apply_pulse,
    default_max_pulses,
    device_statistics,
    program_cells,
    program_with_verify,
    program_without_verify,
    read_conductance,
    retention,
)
from rram_baseband.errors import NotConvergedError

QUIET = DeviceParams(n_states=100).noiseless()


class TestParams:
    def test_default_step(self):
        p = DeviceParams(g_min=1e-6, g_max=101e-6, n_states=100)
        assert p.step == pytest.approx(1e-6)

    def test_mean_step_override(self):
        assert DeviceParams(mean_step=3e-7).step == 3e-7

    def test_noiseless_zeroes_sigmas(self):
        p = DeviceParams(sigma_c2c=0.1, sigma_prog=0.1, sigma_read=0.1).noiseless()
        assert (p.sigma_c2c, p.sigma_prog, p.sigma_read) == (0.0, 0.0, 0.0)

    @pytest.mark.parametrize("kw", [dict(g_min=2e-4), dict(n_states=1), dict(sigma_read=-0.1),
                                    dict(read_width=0.0), dict(mean_step=-1.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            DeviceParams(**kw)


class TestPulse:
    def test_noiseless_step(self):
        s = apply_pulse(DeviceState(5e-5), POTENTIATION, QUIET)
        assert s.conductance == pytest.approx(5e-5 + QUIET.step, rel=1e-15)
        s = apply_pulse(s, DEPRESSION, QUIET)
        assert s.conductance == pytest.approx(5e-5, rel=1e-12)

    def test_clipping(self):
        assert apply_pulse(DeviceState(QUIET.g_max), POTENTIATION, QUIET).conductance == QUIET.g_max
        assert apply_pulse(DeviceState(QUIET.g_min), DEPRESSION, QUIET).conductance == QUIET.g_min

    def test_bad_polarity(self):
        with pytest.raises(ValueError, match="polarity"):
            apply_pulse(DeviceState(5e-5), "sideways", QUIET)

    def test_rng_required_when_noisy(self):
        with pytest.raises(ValueError, match="random generator"):
            apply_pulse(DeviceState(5e-5), POTENTIATION, DeviceParams())

    def test_step_statistics(self, rng):
        p = DeviceParams(n_states=100, sigma_c2c=0.1)
        steps = np.array([apply_pulse(DeviceState(5e-5), POTENTIATION, p, rng).conductance - 5e-5
                          for _ in range(10_000)])
        assert abs(steps.mean() - p.step) <= 3 * p.sigma_c2c * p.step / 100
        assert steps.std(ddof=1) == pytest.approx(0.1 * p.step, rel=0.05)

    def test_read_noise_statistics(self, rng):
        p = DeviceParams(sigma_read=0.02)
        state = DeviceState(4e-5)
        reads = np.array([read_conductance(state, p, rng) for _ in range(10_000)])
        assert reads.mean() == pytest.approx(4e-5, rel=1e-3)
        assert reads.std(ddof=1) / 4e-5 == pytest.approx(0.02, rel=0.1)
        assert state.conductance == 4e-5

    def test_noiseless_read_is_exact(self):
        assert read_conductance(DeviceState(3e-5), QUIET) == 3e-5


class TestOpenLoop:
    def test_already_at_target(self):
        state, rep = program_without_verify(DeviceState(4e-5), 4e-5, QUIET)
        assert rep.pulses_applied == 0 and rep.final_error == 0.0 and rep.converged

    def test_three_steps(self):
        g = QUIET.g_min + 10 * QUIET.step
        state, rep = program_without_verify(DeviceState(g), g + 3 * QUIET.step, QUIET)
        assert rep.pulses_applied == 3
        assert state.conductance == pytest.approx(g + 3 * QUIET.step, rel=1e-12)

    def test_residual_grows_with_pulse_count(self):
        p = DeviceParams(n_states=100, sigma_c2c=0.05)
        r = np.random.default_rng(8)
        spread = []
        for k in (5, 20, 80):
            g = np.full(5000, p.g_min)
            program_cells(g, p.g_min + k * p.step, "no_verify", p, r)
            spread.append(g.std())
        assert spread[0] < spread[1] < spread[2]
        # independent steps: std ~ sigma * step * sqrt(k)
        assert spread[2] / spread[0] == pytest.approx(4.0, rel=0.1)

    def test_pulse_count_rounds_to_nearest(self):
        target = QUIET.g_min + 7.4 * QUIET.step
        state, rep = program_without_verify(DeviceState(QUIET.g_min), target, QUIET)
        assert rep.pulses_applied == 7
        assert rep.verify_reads == 0
        assert state.conductance == pytest.approx(QUIET.g_min + 7 * QUIET.step, rel=1e-12)

    def test_depression_direction(self):
        start = QUIET.g_min + 30 * QUIET.step
        state, rep = program_without_verify(DeviceState(start), QUIET.g_min + 20 * QUIET.step, QUIET)
        assert rep.pulses_applied == 10
        assert state.conductance == pytest.approx(QUIET.g_min + 20 * QUIET.step, rel=1e-12)

    def test_uses_believed_state(self):
        g = np.array([QUIET.g_min + 10 * QUIET.step])
        res = program_cells(g, QUIET.g_min + 15 * QUIET.step, "no_verify", QUIET,
                            believed=QUIET.g_min + 12 * QUIET.step)
        assert res.pulses[0] == 3
        assert g[0] == pytest.approx(QUIET.g_min + 13 * QUIET.step, rel=1e-12)

    def test_target_out_of_range(self):
        with pytest.raises(ValueError, match="outside"):
            program_without_verify(DeviceState(QUIET.g_min), 2 * QUIET.g_max, QUIET)

    def test_energy_and_duration(self):
        target = QUIET.g_min + 3 * QUIET.step
        _, rep = program_without_verify(DeviceState(QUIET.g_min), target, QUIET)
        assert rep.duration_s == pytest.approx(3 * QUIET.pot_width)
        # energy per pulse is V^2 * width * mean conductance over the pulse
        g = QUIET.g_min + QUIET.step * np.arange(4)
        expected = QUIET.pot_amplitude**2 * QUIET.pot_width * np.sum(0.5 * (g[:-1] + g[1:]))
        assert rep.energy_j == pytest.approx(expected, rel=1e-12)


class TestVerify:
    @pytest.mark.parametrize("frac", [0.3, 5.0, 17.999, 40.5])
    def test_noiseless_pulse_count_is_ceiling(self, frac):
        g0 = QUIET.g_min + 2 * QUIET.step
        target = g0 + frac * QUIET.step
        _, rep = program_with_verify(DeviceState(g0), target, 1e-12, 200, QUIET)
        assert rep.pulses_applied == np.ceil(frac)

    def test_converged_cells_meet_tolerance(self, rng):
        # exact reads: the acceptance test sees the true conductance
        p = DeviceParams(sigma_c2c=0.3, sigma_read=0.0)
        targets = p.g_min + p.g_range * rng.uniform(0.05, 1.0, 5000)
        g = p.g_min + p.g_range * rng.uniform(0.0, 1.0, 5000)
        res = program_cells(g, targets, "verify", p, rng, tol_abs=0.01 * targets)
        assert res.converged.all()
        assert np.all(np.abs(g - targets) <= 0.01 * targets)

    def test_noiseless_lands_exactly(self):
        target = QUIET.g_min + 12.37 * QUIET.step
        state, rep = program_with_verify(DeviceState(QUIET.g_min), target, 1e-12, 100, QUIET)
        assert rep.converged
        assert abs(state.conductance - target) <= 1e-12 * target
        assert rep.pulses_applied == 13  # 12 full steps plus one trimmed pulse
        assert rep.verify_reads == 14

    def test_already_within_tolerance(self):
        state, rep = program_with_verify(DeviceState(5e-5), 5e-5 * 1.001, 0.01, 10, QUIET)
        assert rep.pulses_applied == 0 and rep.verify_reads == 1
        assert state.conductance == 5e-5

    def test_noisy_meets_tolerance(self, rng):
        p = DeviceParams(sigma_c2c=0.3, sigma_read=0.001)
        targets = p.g_min + p.g_range * rng.uniform(0.1, 1.0, 2000)
        g = np.full(targets.shape, p.g_min)
        res = program_cells(g, targets, "verify", p, rng, tol_abs=0.01 * targets)
        assert res.converged.all()
        # the loop accepts on a noisy read, so allow a few read sigmas on top of the tolerance
        assert np.max(np.abs(g - targets) / targets) < 0.01 + 5 * 0.001

    def test_budget_exhausted(self, rng):
        with pytest.raises(NotConvergedError) as info:
            program_with_verify(DeviceState(QUIET.g_min), QUIET.g_max, 1e-6, 5, QUIET)
        assert info.value.report.pulses_applied == 5
        assert not info.value.report.converged
        assert info.value.state.conductance == pytest.approx(QUIET.g_min + 5 * QUIET.step)

    @pytest.mark.parametrize("tol,budget", [(0.0, 10), (0.01, 0)])
    def test_invalid_arguments(self, tol, budget):
        with pytest.raises(ValueError):
            program_with_verify(DeviceState(QUIET.g_min), 5e-5, tol, budget, QUIET)

    def test_unknown_scheme(self):
        with pytest.raises(ValueError, match="scheme"):
            program_cells(np.array([1e-5]), 2e-5, "guess", QUIET)

    def test_rejects_non_contiguous(self):
        g = np.full((4, 4), 1e-5)[:, ::2]
        with pytest.raises(TypeError):
            program_cells(g, 2e-5, "no_verify", QUIET)

    def test_default_budget(self):
        assert default_max_pulses(DeviceParams(n_states=64)) == 320


class TestInvariants:
    @pytest.mark.parametrize("scheme", ["verify", "no_verify"])
    def test_conductance_stays_in_range(self, rng, scheme):
        p = DeviceParams(n_states=16, sigma_c2c=1.0, sigma_read=0.05, sigma_prog=0.3)
        g = p.g_min + p.g_range * rng.uniform(0, 1, 4000)
        t = np.where(rng.uniform(size=4000) < 0.5, p.g_min, p.g_max)
        program_cells(g, t, scheme, p, rng, tol_abs=1e-3 * t, max_pulses=50)
        assert np.all((g >= p.g_min) & (g <= p.g_max))

    def test_open_loop_variance_nondecreasing_in_c2c(self):
        var, bias = [], []
        for s in (0.0, 0.02, 0.05, 0.1):
            r = np.random.default_rng(2)
            p = DeviceParams(sigma_c2c=s)
            t = p.g_min + p.g_range * r.uniform(0.1, 1.0, 5000)
            g = np.full(t.shape, p.g_min)
            program_cells(g, t, "no_verify", p, r)
            var.append(np.var((g - t) / t))
            bias.append(np.mean(g - t))
        assert all(a <= b for a, b in zip(var, var[1:]))
        # at zero noise only the half-step rounding is left, symmetric about the target
        assert abs(bias[0]) < 0.02 * DeviceParams().step


class TestProgrammingNoise:
    def test_sigma_prog_only_touches_pulsed_cells(self, rng):
        p = QUIET.replace(sigma_prog=0.05)
        g = np.array([2e-5, 2e-5])
        program_cells(g, np.array([2e-5, 2e-5 + 5 * p.step]), "no_verify", p, rng)
        assert g[0] == 2e-5
        assert g[1] != pytest.approx(2e-5 + 5 * p.step, rel=1e-9)

    def test_open_loop_error_grows_with_sigma_prog(self):
        errs = []
        for sp in (0.0, 0.02, 0.08):
            r = np.random.default_rng(5)
            p = DeviceParams(sigma_c2c=0.05, sigma_prog=sp)
            t = p.g_min + p.g_range * r.uniform(0.1, 1.0, 5000)
            g = np.full(t.shape, p.g_min)
            program_cells(g, t, "no_verify", p, r)
            errs.append(np.sqrt(np.mean(((g - t) / t) ** 2)))
        assert errs[0] < errs[1] < errs[2]


class TestMisc:
    def test_retention_is_identity(self):
        assert retention(3e-5, 1e6, QUIET) == 3e-5

    def test_statistics_keys_and_values(self, rng):
        p = DeviceParams(n_states=64, sigma_c2c=0.3, sigma_read=0.006)
        s = device_statistics(p, rng, trials=3000)
        assert s["step_std_rel"] == pytest.approx(0.3, rel=0.1)
        assert s["read_std_rel"] == pytest.approx(0.006, rel=0.1)
        assert s["verify_converged_frac"] == 1.0
        assert s["verify_error_rms"] < s["no_verify_error_rms"]
