"""One-period transfer products, vectorised over energies.

Kept apart from :mod:`spectral` so that :mod:`floquet` can locate the
critical points of the discriminant without an import cycle.
"""

from __future__ import annotations

import numpy as np


def transfer_product(a: np.ndarray, b: np.ndarray, z, with_derivative: bool = False):
    """Ordered product ``T_n ... T_1`` for energies ``z`` (any shape).

    ``T_k = (1/a_k) [[z - b_k, -1], [a_k^2, 0]]``. Returns an array of shape
    ``z.shape + (2, 2)``; with ``with_derivative`` also the ``z``-derivative.
    """
    z = np.asarray(z)
    dtype = np.result_type(z.dtype, float)
    m = np.zeros(z.shape + (2, 2), dtype)
    m[..., 0, 0] = 1
    m[..., 1, 1] = 1
    dm = np.zeros_like(m)
    for ak, bk in zip(a, b):
        step = np.zeros_like(m)
        step[..., 0, 0] = (z - bk) / ak
        step[..., 0, 1] = -1.0 / ak
        step[..., 1, 0] = ak
        if with_derivative:
            dstep = np.zeros_like(m)
            dstep[..., 0, 0] = 1.0 / ak
            dm = step @ dm + dstep @ m
        m = step @ m
    if with_derivative:
        return m, dm
    return m


def discriminant(a, b, E, with_derivative: bool = False):
    """``Delta(E) = tr T_E(q)``; equals ``2 cos(theta)`` on the spectrum."""
    if with_derivative:
        m, dm = transfer_product(a, b, E, True)
        return np.trace(m, axis1=-2, axis2=-1), np.trace(dm, axis1=-2, axis2=-1)
    return np.trace(transfer_product(a, b, E), axis1=-2, axis2=-1)
