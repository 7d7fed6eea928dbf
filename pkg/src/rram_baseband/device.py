"""Behavioural model of an analog HfO2 RRAM cell.

Conductance moves linearly with pulse count: each programming pulse shifts it
by ``step * (1 + N(0, sigma_c2c))`` toward the chosen polarity, clipped to
``[g_min, g_max]``.  Reads are non-destructive and carry multiplicative
Gaussian noise.  Two programming schemes are provided: open loop (a
precomputed pulse train) and closed loop (read after every pulse until the
conductance is within tolerance).  In the closed loop the final corrective
pulse is amplitude-trimmed, so a noiseless cell lands exactly on target.

The single-cell functions are thin wrappers over :func:`program_cells`, which
drives the vectorised kernels used by the crossbar.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NotConvergedError

POTENTIATION = "potentiation"
DEPRESSION = "depression"


@dataclass(frozen=True)
class DeviceParams:
    """Device constants.  Conductances in siemens, voltages in volts, times in seconds."""

    g_min: float = 1e-6
    g_max: float = 1e-4
    n_states: int = 256
    pot_amplitude: float = 0.8
    pot_width: float = 10e-9
    dep_amplitude: float = 0.9  # magnitude of the negative depression pulse
    dep_width: float = 10e-9
    read_voltage: float = 0.15
    read_width: float = 10e-9
    sigma_c2c: float = 0.02
    sigma_prog: float = 0.0
    sigma_read: float = 0.005
    mean_step: float | None = None  # None -> (g_max - g_min) / n_states

    def __post_init__(self):
        if not 0 < self.g_min < self.g_max:
            raise ValueError(f"need 0 < g_min < g_max, got {self.g_min}, {self.g_max}")
        if self.n_states < 2:
            raise ValueError("n_states must be >= 2")
        for name in ("sigma_c2c", "sigma_prog", "sigma_read"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("pot_width", "dep_width", "read_width", "pot_amplitude", "dep_amplitude", "read_voltage"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.mean_step is not None and self.mean_step <= 0:
            raise ValueError("mean_step must be > 0")

    @property
    def g_range(self):
        return self.g_max - self.g_min

    @property
    def step(self):
        return self.mean_step if self.mean_step is not None else self.g_range / self.n_states

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def noiseless(self):
        """Same device with every stochastic term switched off."""
        return self.replace(sigma_c2c=0.0, sigma_prog=0.0, sigma_read=0.0)


@dataclass(frozen=True)
class DeviceState:
    conductance: float


@dataclass(frozen=True)
class ProgramReport:
    pulses_applied: int
    verify_reads: int
    converged: bool
    final_error: float  # (g - target) / target, from the true conductance
    energy_j: float = 0.0
    duration_s: float = 0.0


@dataclass
class CellProgramResult:
    """Per-cell outcome of programming an array of devices."""

    pulses: np.ndarray
    reads: np.ndarray
    busy: np.ndarray  # seconds each cell spent being pulsed or read
    write_energy: np.ndarray
    read_energy: np.ndarray
    converged: np.ndarray

    @property
    def total_pulses(self):
        return int(self.pulses.sum())

    @property
    def total_reads(self):
        return int(self.reads.sum())


def _check_rng(rng, *sigmas):
    if rng is None and any(s > 0 for s in sigmas):
        raise ValueError("a random generator is required when device noise is enabled")


def default_max_pulses(params):
    return 4 * params.n_states + 64


def program_cells(g, target, scheme, params, rng=None, *, tol_abs=None, believed=None, max_pulses=None):
    """Program an array of cells in place.

    ``g`` must be a C-contiguous float64 array; it holds the true conductances
    and is updated.  ``scheme`` is ``"verify"`` (closed loop against
    ``tol_abs``, absolute siemens per cell) or ``"no_verify"`` (open loop,
    pulse count computed from ``believed``, defaulting to the true state).
    """
    if g.dtype != np.float64 or not g.flags.c_contiguous:
        raise TypeError("conductance array must be C-contiguous float64")
    if scheme == "verify":
        _check_rng(rng, params.sigma_c2c, params.sigma_read, params.sigma_prog)
    else:
        _check_rng(rng, params.sigma_c2c, params.sigma_prog)
    flat = g.reshape(-1)
    tgt = np.ascontiguousarray(np.broadcast_to(target, g.shape), dtype=float).reshape(-1)
    pot_cost = params.pot_amplitude * params.pot_amplitude * params.pot_width
    dep_cost = params.dep_amplitude * params.dep_amplitude * params.dep_width
    read_cost = params.read_voltage * params.read_voltage * params.read_width
    if rng is None:
        rng = np.random.default_rng(0)  # never drawn from; _check_rng guarantees a noiseless device
    if scheme == "verify":
        if tol_abs is None:
            raise ValueError("verify scheme needs per-cell tolerances")
        tol = np.ascontiguousarray(np.broadcast_to(tol_abs, g.shape), dtype=float).reshape(-1)
        budget = default_max_pulses(params) if max_pulses is None else int(max_pulses)
        pulses, reads, busy, ew, er, conv = kernels.program_verify(
            flat, tgt, tol, budget, params.g_min, params.g_max, params.step,
            params.sigma_c2c, params.sigma_read, pot_cost, params.pot_width,
            dep_cost, params.dep_width, read_cost, params.read_width, rng)
    elif scheme == "no_verify":
        start = flat.copy() if believed is None else np.ascontiguousarray(
            np.broadcast_to(believed, g.shape), dtype=float).reshape(-1)
        pulses, busy, ew = kernels.program_open_loop(
            flat, start, tgt, params.g_min, params.g_max, params.step, params.sigma_c2c,
            pot_cost, params.pot_width, dep_cost, params.dep_width, rng)
        reads = np.zeros_like(pulses)
        er = np.zeros_like(ew)
        conv = np.ones(flat.shape, dtype=bool)
    else:
        raise ValueError(f"unknown programming scheme {scheme!r}")
    if params.sigma_prog > 0:
        hit = np.flatnonzero(pulses)
        if hit.size:
            noise = rng.standard_normal(hit.size)
            flat[hit] = np.clip(flat[hit] * (1.0 + params.sigma_prog * noise), params.g_min, params.g_max)
    shape = g.shape
    return CellProgramResult(
        pulses=np.asarray(pulses).reshape(shape),
        reads=np.asarray(reads).reshape(shape),
        busy=np.asarray(busy).reshape(shape),
        write_energy=np.asarray(ew).reshape(shape),
        read_energy=np.asarray(er).reshape(shape),
        converged=np.asarray(conv, dtype=bool).reshape(shape),
    )


def apply_pulse(state, polarity, params, rng=None):
    _check_rng(rng, params.sigma_c2c)
    factor = 1.0
    if params.sigma_c2c > 0:
        factor = max(1.0 + params.sigma_c2c * rng.standard_normal(), 0.0)
    size = params.step * factor
    if polarity == POTENTIATION:
        g = state.conductance + size
    elif polarity == DEPRESSION:
        g = state.conductance - size
    else:
        raise ValueError(f"unknown polarity {polarity!r}")
    return DeviceState(float(min(max(g, params.g_min), params.g_max)))


def read_conductance(state, params, rng=None):
    if params.sigma_read == 0:
        return state.conductance
    _check_rng(rng, params.sigma_read)
    return state.conductance * (1.0 + params.sigma_read * rng.standard_normal())


def _check_target(target, params):
    if not params.g_min <= target <= params.g_max:
        raise ValueError(f"target {target} outside [{params.g_min}, {params.g_max}]")


def _report(res, g, target, converged):
    return ProgramReport(
        pulses_applied=int(res.pulses[0]),
        verify_reads=int(res.reads[0]),
        converged=bool(converged),
        final_error=float((g - target) / target),
        energy_j=float(res.write_energy[0] + res.read_energy[0]),
        duration_s=float(res.busy[0]),
    )


def program_without_verify(state, target, params, rng=None):
    _check_target(target, params)
    g = np.array([state.conductance], dtype=float)
    res = program_cells(g, target, "no_verify", params, rng)
    return DeviceState(float(g[0])), _report(res, g[0], target, True)


def program_with_verify(state, target, tolerance, max_pulses, params, rng=None):
    """Closed-loop write.  Raises :class:`NotConvergedError` when the budget runs out."""
    _check_target(target, params)
    if tolerance <= 0:
        raise ValueError("tolerance must be > 0")
    if max_pulses < 1:
        raise ValueError("max_pulses must be >= 1")
    g = np.array([state.conductance], dtype=float)
    res = program_cells(g, target, "verify", params, rng, tol_abs=tolerance * target, max_pulses=max_pulses)
    new_state = DeviceState(float(g[0]))
    report = _report(res, g[0], target, res.converged[0])
    if not report.converged:
        raise NotConvergedError(
            f"cell did not reach {target:.4g} S within {max_pulses} pulses", state=new_state, report=report)
    return new_state, report


def retention(conductance, elapsed_s, params):
    """Retention drift hook; the modelled device holds its state."""
    return conductance


def device_statistics(params, rng, trials=10_000, tolerance=0.01):
    """Monte Carlo summary of the device law, used by ``calibrate-device``."""
    mid = params.g_min + 0.5 * params.g_range
    g = np.full(trials, mid)
    steps = np.empty(trials)
    for i in range(trials):
        steps[i] = apply_pulse(DeviceState(mid), POTENTIATION, params, rng).conductance - mid
    reads = mid * (1.0 + params.sigma_read * rng.standard_normal(trials))
    targets = params.g_min + params.g_range * rng.uniform(0.05, 1.0, trials)
    g = np.full(trials, params.g_min)
    verify = program_cells(g, targets, "verify", params, rng, tol_abs=tolerance * targets)
    verify_err = (g - targets) / targets
    g2 = np.full(trials, params.g_min)
    program_cells(g2, targets, "no_verify", params, rng)
    open_err = (g2 - targets) / targets
    return {
        "step_mean_s": float(steps.mean()),
        "step_std_rel": float(steps.std(ddof=1) / params.step),
        "read_std_rel": float(reads.std(ddof=1) / mid),
        "verify_pulses_mean": float(verify.pulses.mean()),
        "verify_reads_mean": float(verify.reads.mean()),
        "verify_converged_frac": float(verify.converged.mean()),
        "verify_error_rms": float(np.sqrt(np.mean(verify_err**2))),
        "no_verify_error_rms": float(np.sqrt(np.mean(open_err**2))),
    }
