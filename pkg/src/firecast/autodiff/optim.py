from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ParamStore


def _require_grads(params: ParamStore):
    missing = [k for k, t in params.items() if t.grad is None]
    if missing:
        raise RuntimeError(f"parameters without gradients: {', '.join(missing[:5])}")


def sgd_step(params: ParamStore, lr: float) -> None:
    _require_grads(params)
    for t in params.values():
        t.data -= lr * t.grad.astype(t.dtype, copy=False)


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: ParamStore, lr: float, state: AdamState) -> None:
    """Bias-corrected Adam update, in place."""
    _require_grads(params)
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, t in params.items():
        g = t.grad.astype(t.dtype, copy=False)
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(t.data)
            state.v[name] = np.zeros_like(t.data)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        t.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
