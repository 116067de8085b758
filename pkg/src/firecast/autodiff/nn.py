"""Layer-level differentiable ops: convolutions, pooling, LSTM cell, BCE loss."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, add, as_tensor, clip, log, matmul, mul, sigmoid, tanh, transpose

BCE_EPS = 1e-7


def _batched(x: Tensor, name: str):
    if x.ndim == 3:
        return x.data[None], True
    if x.ndim == 4:
        return x.data, False
    raise ValueError(f"{name} expects input [C,H,W] or [N,C,H,W], got shape {x.shape}")


def _im2col(xp, kh, kw, stride, ho, wo):
    """(N,C,Hp,Wp) -> (N*ho*wo, C*kh*kw) patch matrix."""
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    n, c = xp.shape[:2]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)


def _col2im(cols, n, c, hp, wp, kh, kw, stride, ho, wo):
    """Adjoint of :func:`_im2col`: scatter-add patches back into (N,C,Hp,Wp)."""
    cols = cols.reshape(n, ho, wo, c, kh, kw)
    out = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride] += (
                cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            )
    return out


def conv_output_size(size: int, k: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - k) // stride + 1


def deconv_output_size(size: int, k: int, stride: int, padding: int, output_padding: int = 0) -> int:
    return (size - 1) * stride - 2 * padding + k + output_padding


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Zero-padded 2-D cross-correlation.

    ``x`` is [C_in,H,W] or [N,C_in,H,W]; ``kernels`` is [C_out,C_in,k,k].
    """
    x, kernels = as_tensor(x), as_tensor(kernels)
    xd, single = _batched(x, "conv2d")
    if kernels.ndim != 4:
        raise ValueError(f"conv2d kernels must be [C_out,C_in,k,k], got shape {kernels.shape}")
    n, c, h, w = xd.shape
    o, ck, kh, kw = kernels.shape
    if ck != c:
        raise ValueError(f"conv2d expected {ck} input channels, got {c} (input shape {x.shape})")
    if stride < 1 or padding < 0:
        raise ValueError(f"conv2d needs stride >= 1 and padding >= 0, got {stride}, {padding}")
    if kh > h + 2 * padding or kw > w + 2 * padding:
        raise ValueError(f"conv2d kernel {kh}x{kw} larger than padded input {h + 2 * padding}x{w + 2 * padding}")
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (o,):
            raise ValueError(f"conv2d bias expected shape {(o,)}, got {bias.shape}")

    ho, wo = conv_output_size(h, kh, stride, padding), conv_output_size(w, kw, stride, padding)
    p = padding
    xp = np.pad(xd, ((0, 0), (0, 0), (p, p), (p, p))) if p else xd
    cols = _im2col(xp, kh, kw, stride, ho, wo)
    kmat = kernels.data.reshape(o, -1)
    out = (cols @ kmat.T).reshape(n, ho, wo, o).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    out = np.ascontiguousarray(out[0] if single else out)
    hp, wp = xp.shape[2:]

    def back(g):
        g = g[None] if single else g
        g2 = g.transpose(0, 2, 3, 1).reshape(-1, o)
        dk = (g2.T @ cols).reshape(kernels.shape)
        dx = None
        if x.requires_grad:
            dxp = _col2im(g2 @ kmat, n, c, hp, wp, kh, kw, stride, ho, wo)
            dx = dxp[:, :, p:p + h, p:p + w] if p else dxp
            dx = dx[0] if single else dx
        db = g.sum(axis=(0, 2, 3)) if bias is not None else None
        return (dx, dk, db)

    parents = (x, kernels, bias) if bias is not None else (x, kernels)
    return Tensor._from_op(out, parents, back, "conv2d")


def deconv2d(
    x: Tensor,
    kernels: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: int = 0,
    output_padding: int = 0,
) -> Tensor:
    """Transposed convolution, the adjoint of :func:`conv2d` in its input.

    ``kernels`` is [C_in,C_out,k,k] (the layout of the conv it transposes).
    Output extent is ``(H-1)*stride - 2*padding + k + output_padding``;
    ``output_padding`` may be an int or a (rows, cols) pair.
    """
    x, kernels = as_tensor(x), as_tensor(kernels)
    xd, single = _batched(x, "deconv2d")
    if kernels.ndim != 4:
        raise ValueError(f"deconv2d kernels must be [C_in,C_out,k,k], got shape {kernels.shape}")
    n, c, h, w = xd.shape
    ck, o, kh, kw = kernels.shape
    oph, opw = (output_padding, output_padding) if np.isscalar(output_padding) else output_padding
    if ck != c:
        raise ValueError(f"deconv2d expected {ck} input channels, got {c} (input shape {x.shape})")
    if stride < 1 or padding < 0 or any(op < 0 or (op and op >= stride) for op in (oph, opw)):
        raise ValueError(
            f"deconv2d needs stride >= 1, padding >= 0, 0 <= output_padding < stride; "
            f"got {stride}, {padding}, {output_padding}"
        )
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (o,):
            raise ValueError(f"deconv2d bias expected shape {(o,)}, got {bias.shape}")
    ho = deconv_output_size(h, kh, stride, padding, oph)
    wo = deconv_output_size(w, kw, stride, padding, opw)
    if ho < 1 or wo < 1:
        raise ValueError(f"deconv2d output would be {ho}x{wo}")
    p = padding
    hp, wp = ho + 2 * p, wo + 2 * p
    kmat = kernels.data.reshape(c, -1)
    x2 = xd.transpose(0, 2, 3, 1).reshape(-1, c)
    outp = _col2im(x2 @ kmat, n, o, hp, wp, kh, kw, stride, h, w)
    out = outp[:, :, p:p + ho, p:p + wo] if p else outp
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    out = np.ascontiguousarray(out[0] if single else out)

    def back(g):
        g = g[None] if single else g
        gp = np.pad(g, ((0, 0), (0, 0), (p, p), (p, p))) if p else g
        cols = _im2col(gp, kh, kw, stride, h, w)
        dx = (cols @ kmat.T).reshape(n, h, w, c).transpose(0, 3, 1, 2)
        dk = (x2.T @ cols).reshape(kernels.shape)
        db = g.sum(axis=(0, 2, 3)) if bias is not None else None
        return (dx[0] if single else dx, dk, db)

    parents = (x, kernels, bias) if bias is not None else (x, kernels)
    return Tensor._from_op(out, parents, back, "deconv2d")


def avg_pool2d(x: Tensor, size: int = 2) -> Tensor:
    """Non-overlapping mean pooling; trailing rows/cols that do not fill a window are dropped."""
    x = as_tensor(x)
    xd, single = _batched(x, "avg_pool2d")
    n, c, h, w = xd.shape
    ho, wo = h // size, w // size
    if ho < 1 or wo < 1:
        raise ValueError(f"avg_pool2d window {size} larger than input {h}x{w}")
    crop = xd[:, :, :ho * size, :wo * size]
    out = crop.reshape(n, c, ho, size, wo, size).mean(axis=(3, 5))
    out = out[0] if single else out

    def back(g):
        g = g[None] if single else g
        up = np.repeat(np.repeat(g, size, axis=2), size, axis=3) / (size * size)
        dx = np.zeros_like(xd)
        dx[:, :, :ho * size, :wo * size] = up
        return (dx[0] if single else dx,)

    return Tensor._from_op(out, (x,), back, "avg_pool2d")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight.T + bias`` with ``weight`` shaped [d_out, d_in]."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.shape[-1] != weight.shape[1]:
        raise ValueError(f"linear expected input dim {weight.shape[1]}, got {x.shape[-1]}")
    y = matmul(x, transpose(weight))
    return add(y, bias) if bias is not None else y


def lstm_cell(x: Tensor, h_prev: Tensor, c_prev: Tensor, W: Tensor, U: Tensor, b: Tensor):
    """One LSTM step; returns ``(h, c)``.

    Gate blocks of ``W`` [4*d_h, d_in], ``U`` [4*d_h, d_h] and ``b`` [4*d_h]
    are ordered input, forget, cell candidate, output.
    """
    x, h_prev, c_prev = as_tensor(x), as_tensor(h_prev), as_tensor(c_prev)
    W, U, b = as_tensor(W), as_tensor(U), as_tensor(b)
    dh = U.shape[1]
    if U.shape != (4 * dh, dh):
        raise ValueError(f"lstm U must be [4*d_h, d_h], got {U.shape}")
    if W.shape[0] != 4 * dh or b.shape != (4 * dh,):
        raise ValueError(f"lstm W rows / b length must be {4 * dh}, got {W.shape} and {b.shape}")
    if x.shape[-1] != W.shape[1]:
        raise ValueError(f"lstm expected input dim {W.shape[1]}, got {x.shape[-1]}")
    if h_prev.shape[-1] != dh or c_prev.shape != h_prev.shape or h_prev.shape[:-1] != x.shape[:-1]:
        raise ValueError(f"lstm state shapes {h_prev.shape}, {c_prev.shape} inconsistent with d_h={dh}, x {x.shape}")
    z = add(linear(x, W, b), matmul(h_prev, transpose(U)))
    i = sigmoid(z[..., 0:dh])
    f = sigmoid(z[..., dh:2 * dh])
    g = tanh(z[..., 2 * dh:3 * dh])
    o = sigmoid(z[..., 3 * dh:4 * dh])
    c = add(mul(f, c_prev), mul(i, g))
    h = mul(o, tanh(c))
    return h, c


def bce_loss(pred: Tensor, label, weight=None, eps: float = BCE_EPS) -> Tensor:
    """Mean binary cross-entropy (natural log) over all pixels.

    ``pred`` is clamped to ``[eps, 1 - eps]``.  Optional per-pixel ``weight``
    multiplies each summand before averaging.
    """
    pred = as_tensor(pred)
    label = np.asarray(label, dtype=pred.dtype)
    if label.shape != pred.shape:
        raise ValueError(f"bce_loss label shape {label.shape} != prediction shape {pred.shape}")
    p = clip(pred, eps, 1.0 - eps)
    terms = add(mul(log(p), label), mul(log(1.0 - p), 1.0 - label))
    if weight is not None:
        weight = np.asarray(weight, dtype=pred.dtype)
        if weight.shape != pred.shape:
            raise ValueError(f"bce_loss weight shape {weight.shape} != prediction shape {pred.shape}")
        terms = mul(terms, weight)
    return mul(terms.sum(), -1.0 / pred.size)
