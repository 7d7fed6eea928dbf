"""Energy and latency accounting for analog events, and the write-latency study.

Every analog operation is recorded as an :class:`Event`: write pulses, verify
reads during programming, and MVM reads.  Latency is the sum of event
latencies (operations are sequential at the system level; parallelism inside
one operation is folded into that event's latency).  Throughput counts the
dense-equivalent arithmetic the analog step replaces, with one complex MAC
worth 8 real operations and one real MAC worth 2.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .crossbar import program_matrix
from .errors import EmptyLedgerError, InsufficientDataError

WRITE = "write_pulse"
VERIFY = "verify_read"
MVM = "mvm_read"
KINDS = (WRITE, VERIFY, MVM)

OPS_PER_COMPLEX_MAC = 8
OPS_PER_REAL_MAC = 2


@dataclass(frozen=True)
class Event:
    module: str
    kind: str
    count: int  # device pulses or cell reads
    energy_j: float
    latency_s: float
    ops: int = 0
    invocations: int = 0  # analog MVM / circuit evaluations, for structural checks

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.count < 0 or self.energy_j < 0 or self.latency_s < 0 or self.ops < 0:
            raise ValueError("event quantities must be non-negative")


@dataclass
class EnergyLatencyLedger:
    events: list = field(default_factory=list)

    def _sum(self, attr, kind=None, modules=None):
        return sum(getattr(e, attr) for e in self.events
                   if (kind is None or e.kind == kind) and (modules is None or e.module in modules))

    @property
    def write_pulses(self):
        return self._sum("count", WRITE)

    @property
    def write_energy(self):
        return self._sum("energy_j", WRITE)

    @property
    def verify_reads(self):
        return self._sum("count", VERIFY)

    @property
    def verify_energy(self):
        return self._sum("energy_j", VERIFY)

    @property
    def mvm_reads(self):
        return self._sum("count", MVM)

    @property
    def mvm_energy(self):
        return self._sum("energy_j", MVM)

    @property
    def energy(self):
        return self._sum("energy_j")

    @property
    def latency(self):
        return self._sum("latency_s")

    @property
    def ops(self):
        return self._sum("ops")

    def invocations(self, module):
        return self._sum("invocations", MVM, (module,))

    def modules(self):
        return sorted({e.module for e in self.events})


def record_event(ledger, event):
    ledger.events.append(event)
    return ledger


def record_programming(ledger, module, delta):
    """Add the pulses and verify reads of one ``program_matrix`` call.

    The whole programming time (pulses and interleaved reads) is carried by
    the write event so that latency is not double counted.
    """
    record_event(ledger, Event(module, WRITE, delta.write_pulses, delta.write_energy, delta.latency))
    if delta.verify_reads:
        record_event(ledger, Event(module, VERIFY, delta.verify_reads, delta.read_energy, 0.0))
    return ledger


def record_mvm(ledger, module, pair, params, invocations=1, *, ops=None, steps=None):
    """Add ``invocations`` reads of every array in ``pair``.

    ``steps`` is the number of sequential read slots (default: one per
    invocation).  ``ops`` defaults to a dense real MVM per array read.
    """
    rows, cols = pair.shape
    arrays = int(np.prod(pair.batch_shape, dtype=np.int64))
    if ops is None:
        ops = OPS_PER_REAL_MAC * rows * cols * arrays * invocations
    energy = params.read_voltage**2 * params.read_width * float(pair.cells.sum()) * invocations
    steps = invocations if steps is None else steps
    return record_event(ledger, Event(module, MVM, int(pair.cells.size) * invocations, energy,
                                      steps * params.read_width, int(ops), invocations))


def merge(*ledgers):
    out = EnergyLatencyLedger()
    for led in ledgers:
        out.events.extend(led.events)
    return out


@dataclass(frozen=True)
class PerfSummary:
    total_ops: int
    latency_s: float
    energy_j: float
    tops: float
    tops_per_watt: float


def summarize(ledger, modules=None):
    """Throughput and efficiency over the whole ledger or a subset of modules."""
    events = [e for e in ledger.events if modules is None or e.module in modules]
    if not events:
        raise EmptyLedgerError("no analog events recorded")
    ops = sum(e.ops for e in events)
    latency = sum(e.latency_s for e in events)
    energy = sum(e.energy_j for e in events)
    if latency <= 0 or energy <= 0:
        raise EmptyLedgerError("ledger has no latency or energy to divide by")
    return PerfSummary(ops, latency, energy, ops / latency / 1e12, ops / energy / 1e12)


def dft_macs(n_c):
    return n_c * n_c


def estimation_macs(n_t, n_r):
    return n_r * n_t * n_t


def detection_macs(n_t, n_r):
    """Complex MACs of (H^H H + I/snr)^-1 H^H y evaluated densely.

    Gram matrix, matched filter, Gauss-Jordan inversion (n^3 multiplications
    in place) and the final matrix-vector product.
    """
    return n_t * n_t * n_r + n_t * n_r + n_t**3 + n_t * n_t


# write-latency scaling study

@dataclass
class ScalingReport:
    sizes: np.ndarray
    scheme: str
    trials: int
    mean_latency: np.ndarray
    std_latency: np.ndarray
    mean_pulses: np.ndarray
    fits: dict  # model name -> {"coef": ..., "rel_rms_residual": ...}

    def normalized(self, model):
        return self.mean_latency / _basis(model, self.sizes)

    def bound_ratio(self, model):
        r = self.normalized(model)
        return float(r.max() / r.min())

    def rows(self):
        out = []
        for i, n in enumerate(self.sizes):
            out.append({
                "n": int(n),
                "scheme": self.scheme,
                "trials": self.trials,
                "mean_latency_s": float(self.mean_latency[i]),
                "std_latency_s": float(self.std_latency[i]),
                "mean_pulses_per_cell": float(self.mean_pulses[i]),
                "latency_over_n_sqrt_ln_n": float(self.normalized("n_sqrt_ln_n")[i]),
                "latency_over_n_ln_n": float(self.normalized("n_ln_n")[i]),
            })
        return out


def _basis(model, n):
    n = np.asarray(n, dtype=float)
    if model == "n_sqrt_ln_n":
        return n * np.sqrt(np.log(n))
    if model == "n_ln_n":
        return n * np.log(n)
    if model == "n":
        return n
    raise ValueError(f"unknown scaling model {model!r}")


def _fit_through_origin(x, y):
    c = float(x @ y / (x @ x))
    resid = y - c * x
    return {"coef": c, "rel_rms_residual": float(np.sqrt(np.mean((resid / y) ** 2)))}


def latency_scan(sizes, scheme, params, trials, rng, *, full_scale=4.0, tolerance=0.01):
    """Program random N x N arrays row by row and measure the write latency.

    Targets are standard Gaussian entries mapped with a fixed scale (``full_scale``
    matrix units span the conductance window), so the per-cell pulse count
    distribution does not depend on N.  Latency of one array is the sum over
    rows of the slowest cell in the row.
    """
    sizes = np.asarray(sorted(set(int(n) for n in sizes)))
    if sizes.size < 2:
        raise InsufficientDataError("need at least two array sizes")
    if trials < 30:
        raise InsufficientDataError("need at least 30 trials per size")
    if np.any(sizes < 2):
        raise ValueError("array sizes must be >= 2")
    alpha = params.g_range / full_scale
    mean, std, pulses = [], [], []
    for n in sizes:
        m = rng.standard_normal((trials, n, n))
        _, _, delta = program_matrix(m, scheme, tolerance, params, rng, alpha=alpha)
        lat = delta.array_latency
        mean.append(lat.mean())
        std.append(lat.std(ddof=1))
        pulses.append(delta.write_pulses / (trials * n * n))
    mean = np.array(mean)
    fits = {model: _fit_through_origin(_basis(model, sizes), mean) for model in ("n_sqrt_ln_n", "n_ln_n")}
    design = np.column_stack([sizes, sizes * np.log(sizes)]).astype(float)
    coef, *_ = np.linalg.lstsq(design, mean, rcond=None)
    fits["a_n_plus_b_n_ln_n"] = {"coef": coef.tolist(),
                                 "rel_rms_residual": float(np.sqrt(np.mean(((mean - design @ coef) / mean) ** 2)))}
    return ScalingReport(sizes, scheme, trials, mean, np.array(std), np.array(pulses), fits)
