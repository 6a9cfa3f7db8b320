"""Central finite-difference gradient verification."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, backward

__all__ = ["finite_difference_grad", "max_relative_error", "check_gradients"]


def finite_difference_grad(f, param: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central differences of the scalar f() w.r.t. one parameter tensor."""
    g = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = float(f().data)
        flat[i] = orig - h
        down = float(f().data)
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * h)
    return g


def max_relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """Guarded elementwise relative error, max over entries."""
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1.0)
    return float(np.max(np.abs(a - b) / denom))


def check_gradients(f, params: dict[str, Tensor], h: float = 1e-5) -> dict[str, float]:
    """Compare reverse-mode grads of scalar f() against central differences.

    Returns the max relative error per parameter name. f must rebuild its
    graph on every call (it is re-evaluated many times).
    """
    for p in params.values():
        p.grad = None
    loss = f()
    backward(loss)
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }
    errors = {}
    for name, p in params.items():
        fd = finite_difference_grad(f, p, h=h)
        errors[name] = max_relative_error(analytic[name], fd)
    return errors
