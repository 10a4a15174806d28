"""Hot convolution kernels: numba-jitted loops with a pure-numpy fallback.

Set TWINSYNC_NO_NUMBA=1 to force the numpy path (also taken automatically if
numba is unavailable). Both paths implement cross-correlation with 'same'
output length and asymmetric zero padding: pad_left = (k-1)//2,
pad_right = k - 1 - pad_left, so kernel size 4 pads 1 left / 2 right.

See benchmarks/bench_kernels.py for a speed comparison of the two paths.
"""

from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("TWINSYNC_NO_NUMBA", "0") not in ("1", "true", "yes")
if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False


def _pads(k: int) -> tuple[int, int]:
    pl = (k - 1) // 2
    return pl, k - 1 - pl


def _conv1d_forward_np(x, w, b):
    batch, _c_in, length = x.shape
    c_out, _, k = w.shape
    pl, pr = _pads(k)
    xp = np.pad(x, ((0, 0), (0, 0), (pl, pr)))
    y = np.broadcast_to(b[None, :, None], (batch, c_out, length)).copy()
    for j in range(k):
        y += np.einsum("oc,bcl->bol", w[:, :, j], xp[:, :, j : j + length])
    return y


def _conv1d_backward_np(x, w, gy):
    batch, c_in, length = x.shape
    _c_out, _, k = w.shape
    pl, pr = _pads(k)
    xp = np.pad(x, ((0, 0), (0, 0), (pl, pr)))
    gw = np.empty_like(w)
    gxp = np.zeros_like(xp)
    for j in range(k):
        gw[:, :, j] = np.einsum("bol,bcl->oc", gy, xp[:, :, j : j + length])
        gxp[:, :, j : j + length] += np.einsum("oc,bol->bcl", w[:, :, j], gy)
    gb = gy.sum(axis=(0, 2))
    return gxp[:, :, pl : pl + length], gw, gb


if USE_NUMBA:

    @njit(cache=True)
    def _conv1d_forward_nb(x, w, b, pl):
        batch, c_in, length = x.shape
        c_out, _, k = w.shape
        y = np.empty((batch, c_out, length), dtype=np.float64)
        for bi in range(batch):
            for o in range(c_out):
                for t in range(length):
                    acc = b[o]
                    for c in range(c_in):
                        for j in range(k):
                            src = t + j - pl
                            if 0 <= src < length:
                                acc += w[o, c, j] * x[bi, c, src]
                    y[bi, o, t] = acc
        return y

    @njit(cache=True)
    def _conv1d_backward_nb(x, w, gy, pl):
        batch, c_in, length = x.shape
        c_out, _, k = w.shape
        gx = np.zeros_like(x)
        gw = np.zeros_like(w)
        gb = np.zeros(c_out, dtype=np.float64)
        for bi in range(batch):
            for o in range(c_out):
                for t in range(length):
                    g = gy[bi, o, t]
                    gb[o] += g
                    for c in range(c_in):
                        for j in range(k):
                            src = t + j - pl
                            if 0 <= src < length:
                                gw[o, c, j] += g * x[bi, c, src]
                                gx[bi, c, src] += g * w[o, c, j]
        return gx, gw, gb


def conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(batch, c_in, len) x (c_out, c_in, k) -> (batch, c_out, len)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if USE_NUMBA:
        return _conv1d_forward_nb(x, w, b, _pads(w.shape[2])[0])
    return _conv1d_forward_np(x, w, b)


def conv1d_backward(x: np.ndarray, w: np.ndarray, gy: np.ndarray):
    """Gradients (gx, gw, gb) of the forward cross-correlation."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    gy = np.ascontiguousarray(gy, dtype=np.float64)
    if USE_NUMBA:
        return _conv1d_backward_nb(x, w, gy, _pads(w.shape[2])[0])
    return _conv1d_backward_np(x, w, gy)
