"""Latent-conditioned implicit field: position + codes -> (density, feature).

The trunk consumes the encoded position together with the identity and
expression codes; the density head hangs off the trunk, so density cannot
depend on the albedo or illumination codes, and the network has no input
slot for a viewing direction at all. Both properties are structural, not
trained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .camera import SamplePoints
from .config import ModelConfig
from .errors import ParameterError
from .tensor import Tensor


@dataclass
class PositionalEncodingConfig:
    octaves: int = 10
    include_identity: bool = True

    @property
    def encoded_dim(self) -> int:
        return 3 * (2 * self.octaves + int(self.include_identity))


def positional_encode(x: Tensor, cfg: PositionalEncodingConfig) -> Tensor:
    """[x, sin(pi x), cos(pi x), sin(2 pi x), cos(2 pi x), ...] along the last axis."""
    parts = [x] if cfg.include_identity else []
    for octave in range(cfg.octaves):
        freq = float(np.pi * (2.0 ** octave))
        scaled = T.mul(x, freq)
        parts.append(T.sin(scaled))
        parts.append(T.cos(scaled))
    return T.concat(parts, axis=-1)


@dataclass
class FieldSample:
    sigma: Tensor    # (N, S), nonnegative by construction (softplus head)
    feature: Tensor  # (N, S, F)


def _uniform_init(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class _AffineBlock:
    """One dense layer whose input is a concatenation of named blocks.

    Stored blockwise (one weight matrix per input block) so the layer is
    algebraically identical to concat-then-matmul while letting per-point
    blocks and per-frame code blocks be combined without tiling the codes.
    """

    def __init__(self, name, blocks: dict[str, int], out_dim: int, rng, dtype):
        self.name = name
        fan_in = sum(blocks.values())
        self.fan_in = fan_in
        self.weights = {
            key: Tensor(_uniform_init(rng, (dim, out_dim), fan_in, dtype), requires_grad=True)
            for key, dim in blocks.items()
        }
        self.bias = Tensor(np.zeros(out_dim, dtype=dtype), requires_grad=True)

    def params(self) -> dict[str, Tensor]:
        out = {f"{self.name}.w_{key}": w for key, w in self.weights.items()}
        out[f"{self.name}.b"] = self.bias
        return out

    def apply(self, per_point: dict[str, Tensor], per_frame: dict[str, Tensor]) -> Tensor:
        """per_point blocks are (n, dim); per_frame blocks are (dim,) vectors."""
        acc = None
        for key, x in per_point.items():
            term = T.matmul(x, self.weights[key])
            acc = term if acc is None else T.add(acc, term)
        row = self.bias
        for key, z in per_frame.items():
            contrib = T.matmul(T.reshape(z, (1, z.shape[0])), self.weights[key])
            row = T.add(row, T.reshape(contrib, (contrib.shape[1],)))
        return T.add(acc, row)


class FieldNetwork:
    """MLP trunk + density head + feature branch."""

    SLOPE = 0.2

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator | None = None):
        cfg.validate()
        self.cfg = cfg
        self.pe = PositionalEncodingConfig(cfg.pe_octaves, cfg.pe_include_identity)
        dtype = cfg.np_dtype
        if rng is None:
            rng = np.random.default_rng(cfg.init_seed)
        enc = self.pe.encoded_dim
        w = cfg.trunk_width
        geo_blocks = {"enc": enc, "id": cfg.z_id_dim, "exp": cfg.z_exp_dim}
        self.trunk_input_dim = enc + cfg.z_id_dim + cfg.z_exp_dim

        self.trunk: list[_AffineBlock] = []
        for layer in range(cfg.trunk_depth):
            if layer == 0:
                blocks = dict(geo_blocks)
            elif layer == cfg.trunk_skip:
                blocks = {"h": w, **geo_blocks}
            else:
                blocks = {"h": w}
            self.trunk.append(_AffineBlock(f"trunk.{layer}", blocks, w, rng, dtype))

        self.density_head = _AffineBlock("density", {"h": w}, 1, rng, dtype)
        self.feature_in = _AffineBlock(
            "feature.0", {"h": w, "alb": cfg.z_alb_dim, "ill": cfg.z_ill_dim},
            cfg.feature_dim, rng, dtype,
        )
        self.feature_out = _AffineBlock(
            "feature.1", {"h": cfg.feature_dim}, cfg.feature_dim, rng, dtype
        )

    def params(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for block in (*self.trunk, self.density_head, self.feature_in, self.feature_out):
            out.update(block.params())
        return out

    def forward_encoded(self, enc: Tensor, z_id, z_exp, z_alb, z_ill) -> tuple[Tensor, Tensor]:
        """enc is (n, encoded_dim); codes are 1-d. Returns sigma (n,), feature (n, F)."""
        h = None
        for layer, block in enumerate(self.trunk):
            if layer == 0:
                pre = block.apply({"enc": enc}, {"id": z_id, "exp": z_exp})
            elif layer == self.cfg.trunk_skip:
                pre = block.apply({"h": h, "enc": enc}, {"id": z_id, "exp": z_exp})
            else:
                pre = block.apply({"h": h}, {})
            h = T.leaky_relu(pre, self.SLOPE)
        sigma = T.softplus(self.density_head.apply({"h": h}, {}))
        g = T.leaky_relu(self.feature_in.apply({"h": h}, {"alb": z_alb, "ill": z_ill}), self.SLOPE)
        feature = self.feature_out.apply({"h": g}, {})
        return T.reshape(sigma, (sigma.shape[0],)), feature


def _check_code(name: str, z: Tensor, expected: int) -> None:
    if z.ndim != 1 or z.shape[0] != expected:
        raise ParameterError(f"latent code {name} has shape {z.shape}, expected ({expected},)")


def evaluate_field(
    net: FieldNetwork,
    pts: SamplePoints,
    z_id: Tensor,
    z_exp: Tensor,
    z_alb: Tensor,
    z_ill: Tensor,
) -> FieldSample:
    """Evaluate density and feature at every sample point.

    Density is a function of position and the id/exp codes only; the
    alb/ill codes enter the feature branch after the trunk.
    """
    cfg = net.cfg
    _check_code("z_id", z_id, cfg.z_id_dim)
    _check_code("z_exp", z_exp, cfg.z_exp_dim)
    _check_code("z_alb", z_alb, cfg.z_alb_dim)
    _check_code("z_ill", z_ill, cfg.z_ill_dim)
    n, s, _ = pts.positions.shape
    flat = Tensor(pts.positions.reshape(n * s, 3).astype(cfg.np_dtype))
    enc = positional_encode(flat, net.pe)
    sigma, feature = net.forward_encoded(enc, z_id, z_exp, z_alb, z_ill)
    return FieldSample(
        sigma=T.reshape(sigma, (n, s)),
        feature=T.reshape(feature, (n, s, cfg.feature_dim)),
    )
