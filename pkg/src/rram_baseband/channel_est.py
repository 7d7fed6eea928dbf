"""Least-squares channel estimation with unitary pilots.

With a unitary training matrix ``P`` (n_t x n_t) and received block
``S = H P + Z`` the estimate is ``S P^H``.  In crossbar mode ``R(P)`` is stored
once and each of the ``2 n_r`` rows of ``R(S)`` is applied as an input
vector; since ``R(S) R(P)^T = R(S P^H)``, each read returns one row of the
block form of the estimate.
"""

from dataclasses import dataclass

import numpy as np

from .complex_map import inverse_real_mapping, real_mapping
from .crossbar import mvm, program_matrix
from .errors import ShapeMismatchError, UnsupportedSizeError
from .perf import record_mvm, record_programming

IDENTITY = "identity"
DFT = "dft"
HADAMARD = "hadamard"


@dataclass
class PilotBlock:
    p: np.ndarray  # (n_t, n_t) transmitted training, unitary
    s: np.ndarray  # (*batch, n_r, n_t) received training

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=complex)
        self.s = np.asarray(self.s, dtype=complex)
        n_t = self.p.shape[-1]
        if self.p.shape != (n_t, n_t) or self.s.shape[-1] != n_t:
            raise ShapeMismatchError(f"pilot {self.p.shape} and received block {self.s.shape} are inconsistent")


def make_unitary_pilot(n_t, kind=IDENTITY):
    if n_t < 1:
        raise UnsupportedSizeError("n_t must be >= 1")
    if kind == IDENTITY:
        return np.eye(n_t, dtype=complex)
    if kind == DFT:
        k = np.arange(n_t)
        return np.exp(-2j * np.pi * np.outer(k, k) / n_t) / np.sqrt(n_t)
    if kind == HADAMARD:
        if n_t & (n_t - 1):
            raise UnsupportedSizeError(f"Hadamard pilots need a power-of-two n_t, got {n_t}")
        h = np.ones((1, 1))
        while h.shape[0] < n_t:
            h = np.block([[h, h], [h, -h]])
        return h.astype(complex) / np.sqrt(n_t)
    raise UnsupportedSizeError(f"unknown pilot family {kind!r}")


def is_identity_pilot(p):
    return np.array_equal(p, np.eye(p.shape[0]))


def program_pilot(p, scheme, tolerance, params, rng=None, *, ledger=None, module="estimation"):
    """Store ``R(P)`` in a differential pair for crossbar-mode estimation."""
    pair, _, delta = program_matrix(real_mapping(p), scheme, tolerance, params, rng)
    if ledger is not None:
        record_programming(ledger, module, delta)
    return pair


def estimate_channel(pilot, mode="exact", params=None, rng=None, *, pair=None, ledger=None,
                     module="estimation", lanes=1):
    """Estimate ``H`` from ``pilot``.

    Crossbar mode needs ``pair`` holding ``R(P)`` (see ``program_pilot``).
    Each sub-carrier's block costs ``2 n_r`` analog reads; ``lanes``
    estimators run in parallel for the latency model.  An identity pilot
    takes the zero-computation path in both modes: the received block is the
    estimate.
    """
    if is_identity_pilot(pilot.p):
        return pilot.s.copy()
    if mode == "exact":
        return pilot.s @ np.conj(pilot.p.T)
    if mode != "crossbar":
        raise ValueError(f"unknown estimation mode {mode!r}")
    n_t = pilot.p.shape[0]
    if pair is None or pair.shape != (2 * n_t, 2 * n_t):
        raise ShapeMismatchError("crossbar estimation needs a pair holding R(P)")
    rows = real_mapping(pilot.s)  # (*batch, 2 n_r, 2 n_t)
    est = mvm(pair, rows, params, rng)
    if ledger is not None:
        n = int(np.prod(rows.shape[:-1], dtype=np.int64))
        record_mvm(ledger, module, pair, params, n, ops=0, steps=-(-n // lanes))
    return inverse_real_mapping(est)
