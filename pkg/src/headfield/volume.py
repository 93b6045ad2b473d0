"""Emission-absorption quadrature over ray samples.

Piecewise-constant discretization: w_i = T_i * (1 - exp(-sigma_i delta_i))
with T_i = exp(-sum_{j<i} sigma_j delta_j). The weights, the final
transmittance, and the per-ray opacity satisfy sum(w) + T_final = 1 up to
floating-point associativity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import DimensionError, DomainError
from .tensor import Tensor


@dataclass
class RenderWeights:
    w: Tensor                    # (N, S), nonnegative
    transmittance_final: Tensor  # (N,)
    alpha: Tensor                # (N,) accumulated opacity


@dataclass
class FeatureMap:
    features: Tensor  # (F, h, w)
    alpha: Tensor     # (h, w)


def compute_weights(sigma: Tensor, deltas) -> RenderWeights:
    """Quadrature weights from densities and segment lengths."""
    deltas_t = deltas if isinstance(deltas, Tensor) else Tensor(deltas, dtype=sigma.dtype)
    if sigma.shape != deltas_t.shape or sigma.ndim != 2:
        raise DimensionError(
            f"compute_weights: sigma {sigma.shape} and deltas {deltas_t.shape} must be equal (N,S)"
        )
    if np.any(sigma.data < 0):
        raise DomainError("compute_weights: negative density")
    if np.any(deltas_t.data < 0):
        raise DomainError("compute_weights: negative segment length")
    tau = T.mul(sigma, deltas_t)
    absorbed = T.exp(T.mul(tau, -1.0))                      # exp(-sigma_i delta_i)
    transmittance = T.exp(T.mul(T.cumsum_exclusive(tau, axis=1), -1.0))
    w = T.mul(transmittance, T.sub(1.0, absorbed))
    t_final = T.exp(T.mul(T.tsum(tau, axis=1), -1.0))
    alpha = T.tsum(w, axis=1)
    return RenderWeights(w=w, transmittance_final=t_final, alpha=alpha)


def render_features(weights: RenderWeights, feature: Tensor, grid: tuple[int, int]) -> FeatureMap:
    """Aggregate per-sample features into a (F, h, w) map plus alpha map."""
    w_pix, h_pix = int(grid[0]), int(grid[1])
    n, s = weights.w.shape
    if feature.ndim != 3 or feature.shape[:2] != (n, s):
        raise DimensionError(
            f"render_features: feature {feature.shape} does not match weights {(n, s)}"
        )
    if n != w_pix * h_pix:
        raise DimensionError(f"render_features: {n} rays cannot fill a {grid} grid")
    per_ray = T.weighted_sum(weights.w, feature)            # (N, F)
    fmap = T.permute(T.reshape(per_ray, (h_pix, w_pix, feature.shape[2])), (2, 0, 1))
    alpha = T.reshape(weights.alpha, (h_pix, w_pix))
    return FeatureMap(features=fmap, alpha=alpha)
