"""Complex-to-real isomorphisms used to store complex operators in real crossbars.

A complex matrix ``A`` (K x L) is stored as the real block matrix

    [[Re A, -Im A],
     [Im A,  Re A]]      (2K x 2L)

and a complex vector ``x`` as the stacked real vector ``[Re x; Im x]``.  With
this layout ``real_mapping(A) @ vector_mapping(x) == vector_mapping(A @ x)``.
All functions accept leading batch dimensions.
"""

import numpy as np

from .errors import OddLengthError


def real_mapping(a):
    a = np.asarray(a, dtype=complex)
    if a.ndim < 2:
        raise ValueError(f"expected a matrix, got shape {a.shape}")
    re, im = a.real, a.imag
    top = np.concatenate([re, -im], axis=-1)
    bottom = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def inverse_real_mapping(m):
    """Recover the complex matrix from a (possibly noisy) real block matrix.

    The two redundant copies of each block are averaged, which is the
    least-squares projection onto block-structured matrices.
    """
    m = np.asarray(m, dtype=float)
    rows, cols = m.shape[-2:]
    if rows % 2 or cols % 2:
        raise OddLengthError(f"block matrix must have even dimensions, got {m.shape[-2:]}")
    k, l = rows // 2, cols // 2
    re = 0.5 * (m[..., :k, :l] + m[..., k:, l:])
    im = 0.5 * (m[..., k:, :l] - m[..., :k, l:])
    return re + 1j * im


def vector_mapping(x):
    x = np.asarray(x, dtype=complex)
    return np.concatenate([x.real, x.imag], axis=-1)


def inverse_vector_mapping(v):
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    if n % 2:
        raise OddLengthError(f"stacked vector length must be even, got {n}")
    k = n // 2
    return v[..., :k] + 1j * v[..., k:]
