"""Central finite-difference checks of analytic gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numerical_grad(f: Callable[[], float], t: Tensor, h: float = 1e-5, indices=None) -> np.ndarray:
    """Central differences of the scalar ``f()`` w.r.t. entries of ``t.data``.

    Only ``indices`` (flat) are perturbed when given; other entries stay 0.
    """
    grad = np.zeros(t.size)
    flat = t.data.reshape(-1)
    for i in range(t.size) if indices is None else indices:
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        grad[i] = (fp - fm) / (2 * h)
    return grad.reshape(t.shape)


def relative_error(a, b) -> float:
    a, b = np.ravel(a), np.ravel(b)
    den = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if den == 0 else float(np.linalg.norm(a - b) / den)


def check_gradients(
    loss_fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    h: float = 1e-5,
    max_entries: int | None = None,
    seed: int = 0,
) -> dict[str, float]:
    """Relative error (by norm) between analytic and numerical gradients per tensor.

    With ``max_entries`` only a seeded random subset of each tensor is
    compared.
    """
    for t in tensors:
        t.grad = None
    loss_fn().backward()
    analytic = [np.zeros(t.shape) if t.grad is None else t.grad.astype(np.float64) for t in tensors]
    rng = np.random.default_rng(seed)
    errors = {}
    for k, (t, ga) in enumerate(zip(tensors, analytic)):
        idx = None
        if max_entries is not None and t.size > max_entries:
            idx = np.sort(rng.choice(t.size, size=max_entries, replace=False))
        gn = numerical_grad(lambda: float(loss_fn().data), t, h, idx)
        if idx is not None:
            ga = ga.reshape(-1)[idx]
            gn = gn.reshape(-1)[idx]
        errors[t.name or f"t{k}"] = relative_error(ga, gn)
    return errors
