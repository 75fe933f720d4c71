"""Numba-compiled float32 convolution kernels.

The gemm/im2col path in `enhancer` is bandwidth-bound at these shapes (few
channels, 64x64 maps); these direct kernels keep each sample resident in L2
and run ~4x faster on one core.  Loops accumulate in a fixed order, so results
are deterministic run to run (not bit-identical to the gemm path, which is
fine: the float64 reference path is the one under the finite-difference
gradient check).

Set HANDWAVE_NO_NUMBA=1 to force the pure-numpy path.
"""

from __future__ import annotations

import os

import numpy as np

AVAILABLE = False
if not os.environ.get("HANDWAVE_NO_NUMBA"):
    try:
        import numba

        AVAILABLE = True
    except ImportError:          # pragma: no cover - numba is a soft dependency
        AVAILABLE = False


if AVAILABLE:

    @numba.njit(cache=True)
    def _conv_tiles(xp, w, b, out):
        # xp [C, Hp, Wp]; w [O, C, k, k]; out [O, H, W] (pre-activation)
        O, C, k, _ = w.shape
        H, W = out.shape[1], out.shape[2]
        o = 0
        while o + 4 <= O:
            for i in range(H):
                r0 = out[o, i]
                r1 = out[o + 1, i]
                r2 = out[o + 2, i]
                r3 = out[o + 3, i]
                for j in range(W):
                    r0[j] = b[o]
                    r1[j] = b[o + 1]
                    r2[j] = b[o + 2]
                    r3[j] = b[o + 3]
                for c in range(C):
                    for dy in range(k):
                        xr = xp[c, i + dy]
                        for dx in range(k):
                            w0 = w[o, c, dy, dx]
                            w1 = w[o + 1, c, dy, dx]
                            w2 = w[o + 2, c, dy, dx]
                            w3 = w[o + 3, c, dy, dx]
                            for j in range(W):
                                xv = xr[dx + j]
                                r0[j] += w0 * xv
                                r1[j] += w1 * xv
                                r2[j] += w2 * xv
                                r3[j] += w3 * xv
            o += 4
        while o < O:
            for i in range(H):
                row = out[o, i]
                for j in range(W):
                    row[j] = b[o]
                for c in range(C):
                    for dy in range(k):
                        xr = xp[c, i + dy]
                        for dx in range(k):
                            wv = w[o, c, dy, dx]
                            for j in range(W):
                                row[j] += wv * xr[dx + j]
            o += 1

    @numba.njit(cache=True)
    def _corr_weights(xp, g, grad_w):
        # xp [C, Hp, Wp]; g [O, H, W]; grad_w [O, C, k, k] accumulated +=
        O, C, k, _ = grad_w.shape
        H, W = g.shape[1], g.shape[2]
        for o in range(O):
            for c in range(C):
                for dy in range(k):
                    for dx in range(k):
                        acc = np.float32(0.0)
                        for i in range(H):
                            gr = g[o, i]
                            xr = xp[c, i + dy]
                            s = np.float32(0.0)
                            for j in range(W):
                                s += gr[j] * xr[dx + j]
                            acc += s
                        grad_w[o, c, dy, dx] += acc


def _pad_batch(x, pad):
    b, c, h, w = x.shape
    xp = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=np.float32)
    xp[:, :, pad:pad + h, pad:pad + w] = x
    return xp


def conv_forward(x, weights, bias):
    """x [B, C, H, W] float32 -> pre-activation [B, O, H, W]."""
    b_sz, c, h, w = x.shape
    o, _, k, _ = weights.shape
    xp = _pad_batch(x, k // 2)
    out = np.empty((b_sz, o, h, w), dtype=np.float32)
    for n in range(b_sz):
        _conv_tiles(xp[n], weights, bias, out[n])
    return out


def conv_backward(x, weights, grad_pre):
    """Gradients for a stride-1 same-pad conv; grad_pre is the gradient at the
    pre-activation output.  Returns (grad_in, grad_w, grad_b)."""
    b_sz, c, h, w = x.shape
    o, _, k, _ = weights.shape
    pad = k // 2
    grad_w = np.zeros_like(weights)
    grad_in = np.empty_like(x)
    w_rot = np.ascontiguousarray(
        weights[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))   # [C, O, k, k]
    zero_bias = np.zeros(c, dtype=np.float32)
    xp = _pad_batch(x, pad)
    gp = _pad_batch(grad_pre, pad)
    for n in range(b_sz):
        _corr_weights(xp[n], gp[n, :, pad:pad + h, pad:pad + w], grad_w)
        _conv_tiles(gp[n], w_rot, zero_bias, grad_in[n])
    grad_b = grad_pre.sum(axis=(0, 2, 3))
    return grad_in, grad_w, grad_b
