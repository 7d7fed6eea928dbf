"""Unitary DFT/IDFT in exact or crossbar mode, plus cyclic prefix handling.

The crossbar mode stores ``R(W)`` once.  The DFT drives it from the input
side; the IDFT drives the same devices from the output side, which computes
``R(W).T == R(W^H)`` without reprogramming.
"""

from dataclasses import dataclass

import numpy as np

from .complex_map import inverse_vector_mapping, real_mapping, vector_mapping
from .crossbar import CrossbarPair, mvm, program_matrix
from .errors import BadLengthError, ModeMismatchError
from .perf import OPS_PER_COMPLEX_MAC, dft_macs, record_mvm, record_programming


@dataclass
class DftOperator:
    n_c: int
    w: np.ndarray  # unitary DFT matrix, W[k, l] = exp(-2j pi k l / n_c) / sqrt(n_c)
    pair: CrossbarPair | None = None

    @property
    def mode(self):
        return "exact" if self.pair is None else "crossbar"


def dft_matrix(n_c):
    if n_c < 2:
        raise ValueError("n_c must be >= 2")
    k = np.arange(n_c)
    return DftOperator(n_c, np.exp(-2j * np.pi * np.outer(k, k) / n_c) / np.sqrt(n_c))


def program_dft(op, scheme, tolerance, params, rng=None, ledger=None, module="dft", **kwargs):
    """Write ``R(W)`` into a differential pair; returns the crossbar-mode operator."""
    pair, err, delta = program_matrix(real_mapping(op.w), scheme, tolerance, params, rng, **kwargs)
    if ledger is not None:
        record_programming(ledger, module, delta)
    return DftOperator(op.n_c, op.w, pair), err, delta


def _apply(x, op, params, rng, ledger, module, transpose, lanes, count_ops):
    x = np.asarray(x, dtype=complex)
    if x.shape[-1] != op.n_c:
        raise BadLengthError(f"block length {x.shape[-1]} does not match n_c = {op.n_c}")
    if op.pair is None:
        if transpose:
            return np.fft.ifft(x, axis=-1, norm="ortho")
        return np.fft.fft(x, axis=-1, norm="ortho")
    if op.pair.shape != (2 * op.n_c, 2 * op.n_c) or op.pair.batch_shape:
        raise ModeMismatchError(f"crossbar pair of shape {op.pair.cells.shape} cannot hold a {op.n_c}-point DFT")
    out = inverse_vector_mapping(mvm(op.pair, vector_mapping(x), params, rng, transpose=transpose))
    if ledger is not None:
        n = int(np.prod(x.shape[:-1], dtype=np.int64))
        ops = OPS_PER_COMPLEX_MAC * dft_macs(op.n_c) * n if count_ops else 0
        record_mvm(ledger, module, op.pair, params, n, ops=ops, steps=-(-n // lanes))
    return out


def dft(x, op, params=None, rng=None, *, ledger=None, module="dft", lanes=1, count_ops=True):
    """Frequency-domain symbols of time-domain block(s) ``x`` (CP removed).

    ``x`` may carry leading dimensions; each length-``n_c`` block is one
    analog invocation.  ``lanes`` identical arrays run in parallel for the
    latency model.
    """
    return _apply(x, op, params, rng, ledger, module, False, lanes, count_ops)


def idft(x, op, params=None, rng=None, *, ledger=None, module="idft", lanes=1, count_ops=True):
    return _apply(x, op, params, rng, ledger, module, True, lanes, count_ops)


def add_cyclic_prefix(samples, cp_len):
    samples = np.asarray(samples)
    n = samples.shape[-1]
    if not 0 <= cp_len < n:
        raise BadLengthError(f"cp_len must be in [0, {n}), got {cp_len}")
    if cp_len == 0:
        return samples.copy()
    return np.concatenate([samples[..., n - cp_len:], samples], axis=-1)


def remove_cyclic_prefix(samples, cp_len, n_c=None):
    samples = np.asarray(samples)
    n = samples.shape[-1]
    if cp_len < 0 or n <= cp_len or (n_c is not None and n != n_c + cp_len):
        raise BadLengthError(f"length {n} is not n_c + cp_len with cp_len = {cp_len}")
    return samples[..., cp_len:].copy()
