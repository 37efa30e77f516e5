"""Low-level tensor operations for the 3D network.

Valid (no padding), stride-1 cross-correlation and its two gradients,
written as numba kernels.  Every output element is produced by exactly
one thread with a fixed sequential reduction, so results are
reproducible run to run for a given dtype regardless of scheduling.

Array conventions: inputs (B, C_in, X, Y, Z), kernels
(C_out, C_in, d, d, d), outputs (B, C_out, X', Y', Z') with
X' = X - d + 1 per axis.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from ..errors import DimensionError


def out_shape(in_shape, delta: int) -> tuple[int, int, int]:
    """Spatial output dims of a valid stride-1 convolution."""
    xo, yo, zo = (s - delta + 1 for s in in_shape)
    if min(xo, yo, zo) < 1:
        raise DimensionError(
            f"kernel size {delta} exceeds input dims {tuple(in_shape)}"
        )
    return xo, yo, zo


@njit(parallel=True, fastmath=True, cache=True, boundscheck=False)
def _conv3d_fwd(x, w, bias, y):
    # blocks of up to 4 output channels share each loaded input row
    B, Ci, X, Y, Z = x.shape
    Co, _, d, _, _ = w.shape
    _, _, Xo, Yo, Zo = y.shape
    nblk = (Co + 3) // 4
    for bx in prange(B * Xo):
        b = bx // Xo
        xo = bx % Xo
        acc = np.empty((4, Zo), dtype=x.dtype)
        for yo in range(Yo):
            for cb in range(nblk):
                c0 = 4 * cb
                nc = min(4, Co - c0)
                for c in range(nc):
                    for zo in range(Zo):
                        acc[c, zo] = bias[c0 + c]
                for ci in range(Ci):
                    for kx in range(d):
                        for ky in range(d):
                            row = x[b, ci, xo + kx, yo + ky]
                            for kz in range(d):
                                w0 = w[c0, ci, kx, ky, kz]
                                w1 = w[c0 + 1, ci, kx, ky, kz] if nc > 1 else x.dtype.type(0)
                                w2 = w[c0 + 2, ci, kx, ky, kz] if nc > 2 else x.dtype.type(0)
                                w3 = w[c0 + 3, ci, kx, ky, kz] if nc > 3 else x.dtype.type(0)
                                for zo in range(Zo):
                                    v = row[zo + kz]
                                    acc[0, zo] += w0 * v
                                    acc[1, zo] += w1 * v
                                    acc[2, zo] += w2 * v
                                    acc[3, zo] += w3 * v
                for c in range(nc):
                    for zo in range(Zo):
                        y[b, c0 + c, xo, yo, zo] = acc[c, zo]


@njit(parallel=True, fastmath=True, cache=True, boundscheck=False)
def _conv3d_grad_w(x, gy, d, gw):
    B, Ci, X, Y, Z = x.shape
    _, Co, Xo, Yo, Zo = gy.shape
    for cc in prange(Co * Ci):
        co = cc // Ci
        ci = cc % Ci
        acc = np.zeros((d, d, d), dtype=x.dtype)
        for b in range(B):
            for xo in range(Xo):
                for yo in range(Yo):
                    grow = gy[b, co, xo, yo]
                    for kx in range(d):
                        for ky in range(d):
                            xrow = x[b, ci, xo + kx, yo + ky]
                            for kz in range(d):
                                s = x.dtype.type(0.0)
                                for zo in range(Zo):
                                    s += grow[zo] * xrow[zo + kz]
                                acc[kx, ky, kz] += s
        gw[co, ci] = acc


@njit(parallel=True, fastmath=True, cache=True, boundscheck=False)
def _conv3d_grad_x(gy, w, gx):
    # scatter form over blocks of 4 source channels so each row update
    # carries four fused multiplies
    B, Co, Xo, Yo, Zo = gy.shape
    _, Ci, d, _, _ = w.shape
    nblk = (Co + 3) // 4
    zero = gy.dtype.type(0.0)
    for bc in prange(B * Ci):
        b = bc // Ci
        ci = bc % Ci
        gxv = gx[b, ci]
        gxv[:] = 0.0
        for cb in range(nblk):
            c0 = 4 * cb
            nc = min(4, Co - c0)
            for xo in range(Xo):
                for yo in range(Yo):
                    g0 = gy[b, c0, xo, yo]
                    g1 = gy[b, c0 + 1, xo, yo] if nc > 1 else g0
                    g2 = gy[b, c0 + 2, xo, yo] if nc > 2 else g0
                    g3 = gy[b, c0 + 3, xo, yo] if nc > 3 else g0
                    for kx in range(d):
                        for ky in range(d):
                            orow = gxv[xo + kx, yo + ky]
                            for kz in range(d):
                                w0 = w[c0, ci, kx, ky, kz]
                                w1 = w[c0 + 1, ci, kx, ky, kz] if nc > 1 else zero
                                w2 = w[c0 + 2, ci, kx, ky, kz] if nc > 2 else zero
                                w3 = w[c0 + 3, ci, kx, ky, kz] if nc > 3 else zero
                                for zo in range(Zo):
                                    orow[zo + kz] += (
                                        w0 * g0[zo] + w1 * g1[zo]
                                        + w2 * g2[zo] + w3 * g3[zo]
                                    )


def conv3d(x: np.ndarray, w: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Valid stride-1 cross-correlation plus per-channel bias."""
    x = np.ascontiguousarray(x)
    w = np.ascontiguousarray(w)
    if x.ndim != 5 or w.ndim != 5:
        raise DimensionError("conv3d expects (B,C,X,Y,Z) input and (Co,Ci,d,d,d) kernels")
    if x.shape[1] != w.shape[1]:
        raise DimensionError(
            f"channel mismatch: input has {x.shape[1]}, kernels expect {w.shape[1]}"
        )
    d = w.shape[2]
    xo, yo, zo = out_shape(x.shape[2:], d)
    y = np.empty((x.shape[0], w.shape[0], xo, yo, zo), dtype=x.dtype)
    _conv3d_fwd(x, w.astype(x.dtype), bias.astype(x.dtype), y)
    return y


def conv3d_grad_weights(x: np.ndarray, gy: np.ndarray, d: int):
    """Gradients of the convolution output wrt kernels and biases."""
    ci = x.shape[1]
    co = gy.shape[1]
    gw = np.empty((co, ci, d, d, d), dtype=x.dtype)
    _conv3d_grad_w(np.ascontiguousarray(x), np.ascontiguousarray(gy), d, gw)
    gb = gy.sum(axis=(0, 2, 3, 4), dtype=np.float64).astype(gy.dtype)
    return gw, gb


def conv3d_grad_input(gy: np.ndarray, w: np.ndarray, x_shape) -> np.ndarray:
    """Gradient of the convolution output wrt its input (full
    correlation with the kernels)."""
    gx = np.empty(x_shape, dtype=gy.dtype)
    _conv3d_grad_x(np.ascontiguousarray(gy), np.ascontiguousarray(w.astype(gy.dtype)), gx)
    return gx


def conv3d_reference(x: np.ndarray, w: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Plain numpy implementation used to cross-check the kernels."""
    from numpy.lib.stride_tricks import sliding_window_view

    d = w.shape[2]
    win = sliding_window_view(x, (d, d, d), axis=(2, 3, 4))
    # win: (B, Ci, Xo, Yo, Zo, d, d, d)
    y = np.einsum("bcxyzijk,ocijk->boxyz", win, w, optimize=True)
    return y + bias[None, :, None, None, None]


def leaky_relu(x: np.ndarray, leak: float) -> np.ndarray:
    """max(x, leak * x) elementwise, 0 < leak < 1."""
    return np.maximum(x, leak * x)


def leaky_relu_grad(pre_act: np.ndarray, leak: float) -> np.ndarray:
    """Derivative of the activation wrt its argument."""
    g = np.where(pre_act > 0, pre_act.dtype.type(1.0), pre_act.dtype.type(leak))
    return g


def batch_norm_forward(g: np.ndarray, eps: float):
    """Standardize per output channel over batch and spatial axes.

    Normalization is (g - mean) / (sqrt(var) + eps) with the biased
    variance.  Returns the normalized maps plus the statistics needed
    by the backward pass.
    """
    axes = (0, 2, 3, 4)
    mean = g.mean(axis=axes, dtype=np.float64)
    var = g.var(axis=axes, dtype=np.float64)
    std = np.sqrt(var)
    denom = (std + eps).astype(g.dtype)
    centered = g - mean.astype(g.dtype)[None, :, None, None, None]
    out = centered / denom[None, :, None, None, None]
    return out, mean, var, centered, denom


def batch_norm_inference(g: np.ndarray, mean, var, eps: float) -> np.ndarray:
    denom = (np.sqrt(var) + eps).astype(g.dtype)
    return (g - mean.astype(g.dtype)[None, :, None, None, None]) / denom[
        None, :, None, None, None
    ]


def batch_norm_backward(gout: np.ndarray, centered, var, denom, eps: float):
    """Gradient through the training-mode standardization.

    For y_i = (x_i - mu) / (s + eps) with s = sqrt(var) the chain rule
    over the batch statistics gives
      dL/dx_j = (g_j - mean(g)) / (s + eps)
                - centered_j * sum(g * centered) / (N * s * (s + eps)^2).
    """
    axes = (0, 2, 3, 4)
    n = gout.shape[0] * gout.shape[2] * gout.shape[3] * gout.shape[4]
    g_mean = gout.mean(axis=axes, dtype=np.float64).astype(gout.dtype)
    dot = (gout * centered).sum(axis=axes, dtype=np.float64)
    std = np.sqrt(var)
    safe_std = np.maximum(std, np.finfo(np.float64).tiny)
    coef = (dot / (n * safe_std * (std + eps) ** 2)).astype(gout.dtype)
    out = (gout - g_mean[None, :, None, None, None]) / denom[
        None, :, None, None, None
    ]
    out -= centered * coef[None, :, None, None, None]
    return out
