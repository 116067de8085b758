"""Slow, obviously-correct reference implementations used as test oracles."""

import math

import numpy as np


def idw_naive(spec, points, power=2.0, eps=1e-9):
    """Per-cell loop IDW over flat-earth miles."""
    kx = 69.0 * math.cos(math.radians(0.5 * (spec.lat_min + spec.lat_max)))
    out = np.zeros(spec.shape)
    for r in range(spec.rows):
        for c in range(spec.cols):
            lat = spec.lat_max - (r + 0.5) * (spec.lat_max - spec.lat_min) / spec.rows
            lon = spec.lon_min + (c + 0.5) * (spec.lon_max - spec.lon_min) / spec.cols
            exact, num, den = [], 0.0, 0.0
            for plat, plon, v in points:
                d = math.hypot((lat - plat) * 69.0, (lon - plon) * kx)
                if d < eps:
                    exact.append(v)
                else:
                    w = d ** -power
                    num += w * v
                    den += w
            out[r, c] = sum(exact) / len(exact) if exact else num / den
    return out


def conv2d_naive(x, k, b, stride, pad):
    n, c, h, w = x.shape
    o, _, kh, kw = k.shape
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad))
    xp[:, :, pad:pad + h, pad:pad + w] = x
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    out = np.zeros((n, o, ho, wo))
    for a in range(n):
        for q in range(o):
            for i in range(ho):
                for j in range(wo):
                    s = 0.0 if b is None else b[q]
                    for ch in range(c):
                        for u in range(kh):
                            for v in range(kw):
                                s += xp[a, ch, i * stride + u, j * stride + v] * k[q, ch, u, v]
                    out[a, q, i, j] = s
    return out


def deconv2d_naive(x, k, b, stride, pad, out_pad=0):
    """Scatter form: each input pixel stamps its kernel onto the output."""
    n, c, h, w = x.shape
    _, o, kh, kw = k.shape
    oph, opw = (out_pad, out_pad) if np.isscalar(out_pad) else out_pad
    ho = (h - 1) * stride - 2 * pad + kh + oph
    wo = (w - 1) * stride - 2 * pad + kw + opw
    full = np.zeros((n, o, ho + 2 * pad, wo + 2 * pad))
    for a in range(n):
        for ch in range(c):
            for i in range(h):
                for j in range(w):
                    for q in range(o):
                        for u in range(kh):
                            for v in range(kw):
                                full[a, q, i * stride + u, j * stride + v] += x[a, ch, i, j] * k[ch, q, u, v]
    out = full[:, :, pad:pad + ho, pad:pad + wo]
    if b is not None:
        out = out + np.asarray(b)[None, :, None, None]
    return out


def lstm_cell_naive(x, h, c, W, U, b):
    """Scalar-loop LSTM step with gate order input, forget, candidate, output."""
    dh = h.shape[-1]
    z = np.zeros((x.shape[0], 4 * dh))
    for n in range(x.shape[0]):
        for g in range(4 * dh):
            s = b[g]
            for i in range(x.shape[1]):
                s += W[g, i] * x[n, i]
            for i in range(dh):
                s += U[g, i] * h[n, i]
            z[n, g] = s
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    h_new = np.zeros_like(h)
    c_new = np.zeros_like(c)
    for n in range(x.shape[0]):
        for j in range(dh):
            i_g = sig(z[n, j])
            f_g = sig(z[n, dh + j])
            g_g = math.tanh(z[n, 2 * dh + j])
            o_g = sig(z[n, 3 * dh + j])
            c_new[n, j] = f_g * c[n, j] + i_g * g_g
            h_new[n, j] = o_g * math.tanh(c_new[n, j])
    return h_new, c_new


def interval_accuracy_naive(pred_days, label_days, t_int=7, theta=0.5):
    """Interval accuracy over consecutive days by explicit loops."""
    days = len(pred_days)
    cells = pred_days[0].size
    total = 0.0
    for t0 in range(days):
        acc, n = 0.0, 0
        for t1 in range(t_int):
            if t0 - t1 < 0:
                break
            acc += sum(1 for v in np.ravel(pred_days[t0 - t1]) if v >= theta) / cells
            n += 1
        truth = float(np.sum(label_days[t0])) / cells
        total += (acc / n - truth) ** 2
    return (1.0 - 0.5 * total) * 100.0
