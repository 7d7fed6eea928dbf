"""One-step L-MMSE / ZF detection with a crossbar feedback circuit.

The circuit holds ``alpha * R(H)`` in a left differential pair and its
transpose in a right pair.  Two banks of transimpedance amplifiers close the
loop; their feedback conductances ``g1`` and ``g2`` set the regulariser
``g1 * g2 / alpha**2``, which equals ``1 / snr`` for L-MMSE and zero for ZF
(second-stage feedback open).  With input currents ``alpha * J(y)`` the loop
settles at

    v = (R_R R_L + (g1 g2 / alpha**2) I)^-1 R_R J(y),

where ``R_L`` and ``R_R`` are the matrices actually realised by the two pairs
(both ``R(H)`` up to transposition when programming is perfect).

Circuits may be batched, e.g. one per sub-carrier, with ``H`` of shape
``(*batch, n_r, n_t)``.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import kernels
from .complex_map import inverse_vector_mapping, real_mapping, vector_mapping
from .crossbar import CrossbarPair, program_matrix, stored_matrix
from .errors import NoConvergenceError, ShapeMismatchError, SingularSystemError
from .perf import MVM, OPS_PER_COMPLEX_MAC, VERIFY, WRITE, Event, detection_macs, record_event

LMMSE = "lmmse"
ZF = "zf"
SINGULAR_COND = 1e13


@dataclass(frozen=True)
class DetectorCircuit:
    left_pair: CrossbarPair  # R(H), driven by the output voltages
    right_pair: CrossbarPair  # R(H).T, programmed separately
    alpha: np.ndarray  # (*batch,)
    g1: np.ndarray
    g2: np.ndarray
    snr: float | None
    mode: str
    n_t: int
    n_r: int

    @property
    def batch_shape(self):
        return self.left_pair.batch_shape

    @property
    def regularizer(self):
        return self.g1 * self.g2 / self.alpha**2


@dataclass
class DetectionResult:
    x_hat: np.ndarray
    converged: bool = True
    iterations: int = 0
    residual: float = 0.0


def _gains(alpha, snr, mode):
    if mode not in (LMMSE, ZF):
        raise ValueError(f"unknown detector mode {mode!r}")
    if mode == LMMSE:
        if snr is None or not snr > 0:
            raise ValueError("L-MMSE needs a positive linear snr")
        g = alpha / np.sqrt(snr)
        return g, g.copy()
    g1 = alpha / np.sqrt(snr) if snr is not None and snr > 0 else alpha.copy()
    return g1, np.zeros_like(alpha)


def build_detector(h_hat, snr, mode, scheme, params, rng=None, *, tolerance=0.01, floor=0.05,
                   max_pulses=None, ledger=None, module="detection", circuit=None):
    """Program ``R(h_hat)`` into both pairs and set the feedback gains.

    Both pairs are written in parallel, so the recorded latency is the slower
    of the two.  ``snr`` is linear.  Passing an existing ``circuit``
    reprograms its devices from their current state.
    """
    h_hat = np.asarray(h_hat, dtype=complex)
    if h_hat.ndim < 2:
        raise ShapeMismatchError("channel estimate must be a matrix")
    n_r, n_t = h_hat.shape[-2:]
    r = real_mapping(h_hat)
    kw = dict(floor=floor, max_pulses=max_pulses)
    old_l = old_r = None
    if circuit is not None:
        old_l, old_r = circuit.left_pair, circuit.right_pair
    left, _, dl = program_matrix(r, scheme, tolerance, params, rng, pair=old_l, **kw)
    right, _, dr = program_matrix(np.swapaxes(r, -1, -2), scheme, tolerance, params, rng, alpha=left.alpha,
                                  pair=old_r, **kw)
    g1, g2 = _gains(left.alpha, snr, mode)
    if ledger is not None:
        latency = float(np.max(np.maximum(dl.array_latency, dr.array_latency)))
        record_event(ledger, Event(module, WRITE, dl.write_pulses + dr.write_pulses,
                                   dl.write_energy + dr.write_energy, latency))
        if dl.verify_reads + dr.verify_reads:
            record_event(ledger, Event(module, VERIFY, dl.verify_reads + dr.verify_reads,
                                       dl.read_energy + dr.read_energy, 0.0))
    return DetectorCircuit(left, right, left.alpha, g1, g2, snr, mode, n_t, n_r)


def set_mode(circuit, mode, snr=None):
    """Switch between L-MMSE and ZF by changing ``g2`` only."""
    snr = circuit.snr if snr is None else snr
    if mode == LMMSE:
        if snr is None or not snr > 0:
            raise ValueError("L-MMSE needs a positive linear snr")
        g2 = circuit.alpha**2 / (snr * circuit.g1)
    elif mode == ZF:
        g2 = np.zeros_like(circuit.alpha)
    else:
        raise ValueError(f"unknown detector mode {mode!r}")
    return dataclasses.replace(circuit, g2=g2, mode=mode, snr=snr)


def _record_detection(ledger, module, circuit, params, n):
    cells = circuit.left_pair.cells.size + circuit.right_pair.cells.size
    g_sum = float(circuit.left_pair.cells.sum() + circuit.right_pair.cells.sum())
    per_symbol = n // max(int(np.prod(circuit.batch_shape, dtype=np.int64)), 1)
    ops = OPS_PER_COMPLEX_MAC * detection_macs(circuit.n_t, circuit.n_r) * n
    record_event(ledger, Event(module, MVM, cells * per_symbol,
                               params.read_voltage**2 * params.read_width * g_sum * per_symbol,
                               per_symbol * params.read_width, ops, n))


def _check_y(circuit, y):
    y = np.asarray(y, dtype=complex)
    if y.shape[-1] != circuit.n_r:
        raise ShapeMismatchError(f"received vector length {y.shape[-1]} != n_r = {circuit.n_r}")
    return y


def detect_algebraic(circuit, y, params=None, rng=None, *, ledger=None, module="detection"):
    """Settled circuit output for received vector(s) ``y``.

    ``y`` has shape ``(*extra, *batch, n_r)``.  Each leading ``extra`` index
    is a separate detection with its own read-noise draw on every cell.
    """
    y = _check_y(circuit, y)
    batch = circuit.batch_shape
    extra = y.shape[: y.ndim - 1 - len(batch)]
    if y.shape[len(extra):-1] != batch:
        raise ShapeMismatchError(f"received block shape {y.shape} does not match detector bank {batch}")
    y2 = y.reshape((-1,) + batch + (circuit.n_r,))
    reg = circuit.regularizer
    eye = np.eye(2 * circuit.n_t)
    noisy = params is not None and params.sigma_read > 0
    out = np.empty(y2.shape[:-1] + (circuit.n_t,), dtype=complex)
    if not noisy:
        gl, gr = stored_matrix(circuit.left_pair), stored_matrix(circuit.right_pair)
        a = gr @ gl + reg[..., None, None] * eye
        _check_singular(a, circuit)
    for s in range(y2.shape[0]):
        if noisy:
            gl = stored_matrix(circuit.left_pair, params, rng)
            gr = stored_matrix(circuit.right_pair, params, rng)
            a = gr @ gl + reg[..., None, None] * eye
            _check_singular(a, circuit)
        b = np.matmul(gr, vector_mapping(y2[s])[..., None])
        out[s] = inverse_vector_mapping(np.linalg.solve(a, b)[..., 0])
    if ledger is not None:
        _record_detection(ledger, module, circuit, params, y2.shape[0] * int(np.prod(batch, dtype=np.int64)))
    return DetectionResult(out.reshape(extra + batch + (circuit.n_t,)))


def _check_singular(a, circuit):
    if circuit.mode != ZF:
        return
    if np.any(np.linalg.cond(a) > SINGULAR_COND):
        raise SingularSystemError("R(H)^T R(H) is rank deficient; ZF has no unique solution")


def relaxation_step(gl, gr, a, b):
    """Largest forward-Euler step that keeps every mode monotone."""
    return 1.0 / (a + b * np.linalg.norm(gr, 2) * np.linalg.norm(gl, 2))


def detect_dynamical(circuit, y, time_step=None, tolerance=1e-9, max_steps=200_000, params=None, rng=None,
                     *, kappa=1.0, v0=None):
    """Integrate the loop dynamics of a single (unbatched) circuit to rest.

    In normalised units the output voltages obey

        dv/dt = kappa * (-(g2/alpha) v - (alpha/g1) R_R (R_L v - J(y))),

    whose rest point is the algebraic solution.  ``time_step`` defaults to
    ``1 / (a + b ||R_R|| ||R_L||)``.  Raises :class:`NoConvergenceError` when
    the update norm is still above ``tolerance`` after ``max_steps``.
    """
    if circuit.batch_shape:
        raise ShapeMismatchError("dynamical mode runs one circuit at a time")
    y = _check_y(circuit, y)
    if y.ndim != 1:
        raise ShapeMismatchError("dynamical mode takes a single received vector")
    gl = np.ascontiguousarray(stored_matrix(circuit.left_pair, params, rng))
    gr = np.ascontiguousarray(stored_matrix(circuit.right_pair, params, rng))
    alpha = float(circuit.alpha)
    a = float(circuit.g2) / alpha
    b = alpha / float(circuit.g1)
    h = relaxation_step(gl, gr, a, b) if time_step is None else float(time_step)
    if h <= 0:
        raise ValueError("time_step must be > 0")
    start = np.zeros(2 * circuit.n_t) if v0 is None else vector_mapping(v0)
    v, it, rate, ok = kernels.relax(gl, gr, np.ascontiguousarray(vector_mapping(y)), a, b, float(kappa), h,
                                    float(tolerance), int(max_steps), np.ascontiguousarray(start))
    if not ok:
        raise NoConvergenceError(f"loop did not settle after {it} steps (update norm {rate:.3g})", it, rate)
    return DetectionResult(inverse_vector_mapping(v), True, int(it), float(rate))


def detect_exact(h, y, snr=None, mode=LMMSE):
    """Complex-domain closed forms, used by the ideal processor."""
    h = np.asarray(h, dtype=complex)
    y = np.asarray(y, dtype=complex)
    hh = np.conj(np.swapaxes(h, -1, -2))
    gram = hh @ h
    if mode == LMMSE:
        gram = gram + np.eye(h.shape[-1]) / snr
    elif mode != ZF:
        raise ValueError(f"unknown detector mode {mode!r}")
    rhs = np.matmul(hh, y[..., None])
    try:
        return np.linalg.solve(gram, rhs)[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc


def write_constellation_csv(path, symbols, reference=None):
    symbols = np.asarray(symbols, dtype=complex).ravel()
    cols = [np.arange(symbols.size), symbols.real, symbols.imag]
    header = "index,re,im"
    if reference is not None:
        reference = np.asarray(reference, dtype=complex).ravel()
        cols += [reference.real, reference.imag]
        header += ",ref_re,ref_im"
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in zip(*cols):
            fh.write(f"{int(row[0])}," + ",".join(f"{v:.10e}" for v in row[1:]) + "\n")
