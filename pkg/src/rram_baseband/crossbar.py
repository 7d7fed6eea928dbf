"""Differential-pair crossbars holding signed real matrices.

A signed matrix ``M`` is stored as ``(G+ - G-) / alpha`` with
``alpha = (g_max - g_min) / max|M|``.  Each entry is realised by raising
exactly one device of its pair above the ``g_min`` baseline; the other stays
at ``g_min`` so the baselines cancel in the difference.

Pairs may carry leading batch dimensions (a bank of independent arrays, e.g.
one detector per sub-carrier).  Cells are kept in one array of shape
``(*batch, 2, rows, cols)``: index 0 is ``G+``, index 1 is ``G-``.
"""

from dataclasses import dataclass

import numpy as np

from .device import program_cells
from .errors import ProgrammingFailure, ShapeMismatchError

ZERO_SNAP = 1e-12


@dataclass
class CrossbarPair:
    cells: np.ndarray  # (*batch, 2, rows, cols) true conductances
    alpha: np.ndarray  # (*batch,) siemens per matrix unit
    target: np.ndarray  # (*batch, rows, cols) matrix the pair was asked to hold
    believed: np.ndarray  # conductances the programmer assumes, same shape as cells
    g_min: float

    @property
    def g_plus(self):
        return self.cells[..., 0, :, :]

    @property
    def g_minus(self):
        return self.cells[..., 1, :, :]

    @property
    def shape(self):
        return self.cells.shape[-2:]

    @property
    def batch_shape(self):
        return self.cells.shape[:-3]


@dataclass
class ProgramLedgerDelta:
    """Cost of one ``program_matrix`` call.

    ``array_latency`` is the row-by-row write time of each array in the batch
    (rows sequential, the cells of a row across both arrays of the pair in
    parallel); ``latency`` is its maximum, i.e. all arrays written in parallel.
    """

    write_pulses: int
    verify_reads: int
    write_energy: float
    read_energy: float
    array_latency: np.ndarray
    latency: float
    failed_cells: int
    cells: int


def _targets(m, alpha, g_min, g_range):
    a = alpha[..., None, None]
    full_scale = g_range / a
    mc = np.clip(m, -full_scale, full_scale)
    scale = np.max(np.abs(m), axis=(-2, -1), keepdims=True)
    mc = np.where(np.abs(mc) <= ZERO_SNAP * scale, 0.0, mc)
    t = np.stack([g_min + a * np.maximum(mc, 0.0), g_min + a * np.maximum(-mc, 0.0)], axis=-3)
    return mc, t


def program_matrix(m, scheme, tolerance, params, rng=None, *, pair=None, alpha=None,
                   floor=0.05, max_pulses=None):
    """Program ``m`` into a (possibly existing) differential pair.

    ``tolerance`` is the relative error allowed on each matrix entry under the
    verify scheme; entries smaller than ``floor * max|m|`` are held to the
    absolute tolerance ``tolerance * floor * max|m|``.  The budget is split
    evenly between the two devices of a pair.  Returns the pair, the error
    matrix (stored minus requested, noiseless readout) and the cost delta.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim < 2:
        raise ShapeMismatchError(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    batch = m.shape[:-2]
    scale = np.max(np.abs(m), axis=(-2, -1))
    if alpha is None:
        alpha = np.where(scale > 0, params.g_range / np.where(scale > 0, scale, 1.0), params.g_range)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), batch).copy()
    mc, t = _targets(m, alpha, params.g_min, params.g_range)
    if pair is None:
        cells = np.full(t.shape, params.g_min)
        believed = cells.copy()
    else:
        if pair.cells.shape != t.shape:
            raise ShapeMismatchError(f"pair holds {pair.cells.shape}, matrix needs {t.shape}")
        cells, believed = pair.cells, pair.believed
    ref = np.maximum(np.abs(mc), floor * np.max(np.abs(mc), axis=(-2, -1), keepdims=True))
    tol_cells = 0.5 * tolerance * alpha[..., None, None] * ref
    tol_cells = np.broadcast_to(tol_cells[..., None, :, :], t.shape)
    res = program_cells(cells, t, scheme, params, rng, tol_abs=tol_cells, believed=believed,
                        max_pulses=max_pulses)
    believed[...] = t
    if pair is None:
        pair = CrossbarPair(cells=cells, alpha=alpha, target=m.copy(), believed=believed, g_min=params.g_min)
    else:
        pair.alpha = alpha
        pair.target = m.copy()
    row_time = res.busy.max(axis=(-3, -1))  # (*batch, rows)
    array_latency = row_time.sum(axis=-1)
    failed = int((~res.converged).sum())
    delta = ProgramLedgerDelta(
        write_pulses=res.total_pulses,
        verify_reads=res.total_reads,
        write_energy=float(res.write_energy.sum()),
        read_energy=float(res.read_energy.sum()),
        array_latency=array_latency,
        latency=float(np.max(array_latency)) if array_latency.size else 0.0,
        failed_cells=failed,
        cells=int(res.pulses.size),
    )
    if failed and scheme == "verify":
        raise ProgrammingFailure(f"{failed} cell(s) did not converge under write-with-verify", failed)
    return pair, error_matrix(pair), delta


def effective_matrix(pair):
    """Matrix currently realised by the devices, read without noise."""
    return (pair.g_plus - pair.g_minus) / pair.alpha[..., None, None]


def error_matrix(pair):
    return effective_matrix(pair) - pair.target


def stored_matrix(pair, params=None, rng=None):
    """Matrix read back through noisy single-cell reads, in matrix units."""
    if params is None or params.sigma_read == 0:
        return effective_matrix(pair)
    noisy = pair.cells * (1.0 + params.sigma_read * rng.standard_normal(pair.cells.shape))
    return (noisy[..., 0, :, :] - noisy[..., 1, :, :]) / pair.alpha[..., None, None]


def mvm(pair, v, params=None, rng=None, *, transpose=False):
    """One-step analog matrix-vector product, returned in matrix units.

    Every cell carries fresh multiplicative read noise per invocation.  The
    column current is a sum of independent Gaussian terms, so it is sampled
    exactly as one Gaussian per output line with variance
    ``sigma_read**2 * sum_j (G+_ij**2 + G-_ij**2) v_j**2``.

    ``v`` has shape ``(*extra, *batch, cols)``.  ``transpose=True`` drives the
    same devices from the other side, computing ``M.T @ v``.
    """
    v = np.asarray(v, dtype=float)
    diff = pair.g_plus - pair.g_minus
    if transpose:
        diff = np.swapaxes(diff, -1, -2)
    if v.shape[-1] != diff.shape[-1]:
        raise ShapeMismatchError(f"input length {v.shape[-1]} does not match {diff.shape[-1]} columns")
    noisy = params is not None and params.sigma_read > 0
    if noisy:
        sq = pair.g_plus**2 + pair.g_minus**2
        if transpose:
            sq = np.swapaxes(sq, -1, -2)
    if diff.ndim == 2:
        out = v @ diff.T
        if noisy:
            out = out + params.sigma_read * np.sqrt((v * v) @ sq.T) * rng.standard_normal(out.shape)
    else:
        out = np.matmul(diff, v[..., None])[..., 0]
        if noisy:
            var = np.matmul(sq, (v * v)[..., None])[..., 0]
            out = out + params.sigma_read * np.sqrt(var) * rng.standard_normal(out.shape)
    return out / pair.alpha[..., None]


def read_energy_per_invocation(pair, params):
    """Energy of one read of every cell in every array of the pair (joules)."""
    return params.read_voltage**2 * params.read_width * float(pair.cells.sum())


def write_error_csv(path, err):
    err = np.asarray(err, dtype=float)
    if err.ndim != 2:
        raise ValueError("error matrix export expects a single 2-D matrix")
    np.savetxt(path, err, delimiter=",", fmt="%.12e")
