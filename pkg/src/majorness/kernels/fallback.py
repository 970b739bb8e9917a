"""Numpy (im2col) implementations of the convolution kernels.

Used when the compiled extension is unavailable or when the environment
variable MAJORNESS_FORCE_FALLBACK=1 is set.
"""
from __future__ import annotations

import numpy as np


def _out_dim(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def _im2col(x: np.ndarray, kh: int, kw: int, sh: int, sw: int, ph: int, pw: int):
    c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    ho, wo = _out_dim(h, kh, sh, ph), _out_dim(w, kw, sw, pw)
    cols = np.empty((c * kh * kw, ho * wo), dtype=x.dtype)
    row = 0
    for ci in range(c):
        for i in range(kh):
            for j in range(kw):
                patch = xp[ci, i : i + sh * ho : sh, j : j + sw * wo : sw]
                cols[row] = patch.ravel()
                row += 1
    return cols, xp.shape, (ho, wo)


def conv2d_forward(x, w, b, sh=1, sw=1, ph=0, pw=0):
    """x: (C_in, H, W); w: (C_out, C_in, kh, kw); b: (C_out,) -> (C_out, Ho, Wo)."""
    c_out, c_in, kh, kw = w.shape
    cols, _, (ho, wo) = _im2col(x, kh, kw, sh, sw, ph, pw)
    y = w.reshape(c_out, -1) @ cols + b[:, None]
    return y.reshape(c_out, ho, wo)


def conv2d_backward(x, w, grad_y, sh=1, sw=1, ph=0, pw=0):
    """Gradients of a conv2d_forward call; returns (dx, dw, db)."""
    c_out, c_in, kh, kw = w.shape
    cols, padded_shape, (ho, wo) = _im2col(x, kh, kw, sh, sw, ph, pw)
    gy = grad_y.reshape(c_out, -1)
    dw = (gy @ cols.T).reshape(w.shape)
    db = gy.sum(axis=1)
    dcols = w.reshape(c_out, -1).T @ gy
    dxp = np.zeros(padded_shape, dtype=x.dtype)
    row = 0
    for ci in range(c_in):
        for i in range(kh):
            for j in range(kw):
                patch = dcols[row].reshape(ho, wo)
                dxp[ci, i : i + sh * ho : sh, j : j + sw * wo : sw] += patch
                row += 1
    h, w_dim = x.shape[1], x.shape[2]
    dx = dxp[:, ph : ph + h, pw : pw + w_dim]
    return dx, dw, db


def avg_pool2d_forward(x, pm: int, pt: int):
    """Non-overlapping average pool; trailing remainder rows/cols dropped."""
    c, h, w = x.shape
    ho, wo = h // pm, w // pt
    trimmed = x[:, : ho * pm, : wo * pt]
    return trimmed.reshape(c, ho, pm, wo, pt).mean(axis=(2, 4))


def avg_pool2d_backward(grad_y, in_shape, pm: int, pt: int):
    c, h, w = in_shape
    ho, wo = h // pm, w // pt
    dx = np.zeros(in_shape, dtype=grad_y.dtype)
    spread = np.repeat(np.repeat(grad_y, pm, axis=1), pt, axis=2) / (pm * pt)
    dx[:, : ho * pm, : wo * pt] = spread
    return dx
