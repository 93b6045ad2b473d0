"""Finite-difference oracles for verifying reverse-mode gradients.

The oracle evaluates the checked function in float64 regardless of the
autodiff dtype, so the comparison target is the true derivative and the
tolerance absorbs only the autodiff build's own rounding.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """Max elementwise |a-b| / max(|a|, |b|, 1): relative for large values, absolute near zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1.0)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def finite_difference(
    f: Callable[[Sequence[np.ndarray]], float],
    arrays: Sequence[np.ndarray],
    index: int,
    step: float = 1e-6,
) -> np.ndarray:
    """Central differences of f with respect to arrays[index], elementwise."""
    base = [np.array(a, dtype=np.float64) for a in arrays]
    target = base[index]
    grad = np.zeros_like(target)
    it = np.nditer(target, flags=["multi_index"])
    while not it.finished:
        ix = it.multi_index
        h = step * max(1.0, abs(float(target[ix])))
        saved = float(target[ix])
        target[ix] = saved + h
        up = f(base)
        target[ix] = saved - h
        down = f(base)
        target[ix] = saved
        grad[ix] = (up - down) / (2.0 * h)
        it.iternext()
    return grad


def check_gradients(
    make_loss: Callable[[Sequence[Tensor]], Tensor],
    arrays: Sequence[np.ndarray],
    dtype=np.float64,
    step: float = 1e-6,
) -> float:
    """Compare reverse-mode gradients of a scalar loss against central differences.

    ``make_loss`` builds the scalar output from leaf tensors; it is called
    both with requires-grad leaves (autodiff path) and with float64
    constants (oracle path). Returns the worst relative error over all
    inputs.
    """
    leaves = [Tensor(np.asarray(a), requires_grad=True, dtype=dtype) for a in arrays]
    loss = make_loss(leaves)
    loss.backward()

    def f(arrs: Sequence[np.ndarray]) -> float:
        consts = [Tensor(a, dtype=np.float64) for a in arrs]
        return make_loss(consts).item()

    worst = 0.0
    for i, leaf in enumerate(leaves):
        if leaf.grad is None:
            ad = np.zeros(leaf.shape, dtype=np.float64)
        else:
            ad = leaf.grad.astype(np.float64)
        fd = finite_difference(f, arrays, i, step=step)
        worst = max(worst, relative_error(ad, fd))
    return worst
