"""2D neural rendering: pixel-shuffle upsampling stages decode the feature
map into an RGB image.

Every learnable layer is a 1x1 convolution or a per-pixel MLP, so nothing
trained can mix information across pixels; the only spatial operators are
a fixed blur after each pixel shuffle and a fixed bilinear 2x resampler on
the running RGB sum. Upsampling follows
Y = pixelshuffle(repeat(X, 4) + mlp(X), 2) then a depthwise blur, with the
channel layout chosen so a zero residual is exact nearest-neighbor 2x.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .config import ModelConfig
from .errors import ConfigurationError, DimensionError
from .tensor import Tensor
from .volume import FeatureMap

DEFAULT_BLUR_TAPS = (1.0, 3.0, 3.0, 1.0)
DELTA_TAPS = (0.0, 1.0, 0.0, 0.0)

_matrix_cache: dict = {}


def blur_matrix(n: int, taps, dtype) -> np.ndarray:
    """Band matrix for a length-4 depthwise blur with replicate padding.

    Pad split is (left 1, right 2): row i reads x[i-1 .. i+2] clamped to
    the edge. Taps are normalized to sum 1, so rows sum to exactly 1 and
    constants pass through unchanged; taps (0,1,0,0) give the identity.
    """
    key = ("blur", n, tuple(taps), np.dtype(dtype).str)
    if key in _matrix_cache:
        return _matrix_cache[key]
    t = np.asarray(taps, dtype=np.float64)
    t = t / t.sum()
    m = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for k in range(4):
            j = min(max(i - 1 + k, 0), n - 1)
            m[i, j] += t[k]
    m = m.astype(dtype)
    _matrix_cache[key] = m
    return m


def bilinear_up2_matrix(n: int, dtype) -> np.ndarray:
    """(2n, n) bilinear interpolation rows, half-pixel-centered, edge clamped."""
    key = ("bilinear", n, np.dtype(dtype).str)
    if key in _matrix_cache:
        return _matrix_cache[key]
    m = np.zeros((2 * n, n), dtype=np.float64)
    for i in range(2 * n):
        src = (i + 0.5) / 2.0 - 0.5
        j0 = int(np.floor(src))
        frac = src - j0
        m[i, min(max(j0, 0), n - 1)] += 1.0 - frac
        m[i, min(max(j0 + 1, 0), n - 1)] += frac
    m = m.astype(dtype)
    _matrix_cache[key] = m
    return m


class UpsampleLayer:
    """Learned 2x upsampling of a (C, H, W) feature tensor."""

    SLOPE = 0.2

    def __init__(self, name: str, channels: int, rng: np.random.Generator, dtype,
                 taps=DEFAULT_BLUR_TAPS):
        self.name = name
        self.channels = channels
        self.taps = tuple(float(t) for t in taps)
        c = channels
        bound1 = 1.0 / np.sqrt(c)
        self.w1 = Tensor(rng.uniform(-bound1, bound1, (c, c)).astype(dtype), requires_grad=True)
        self.b1 = Tensor(np.zeros(c, dtype=dtype), requires_grad=True)
        self.w2 = Tensor(rng.uniform(-bound1, bound1, (4 * c, c)).astype(dtype), requires_grad=True)
        self.b2 = Tensor(np.zeros(4 * c, dtype=dtype), requires_grad=True)

    def params(self) -> dict[str, Tensor]:
        return {
            f"{self.name}.mlp.w1": self.w1,
            f"{self.name}.mlp.b1": self.b1,
            f"{self.name}.mlp.w2": self.w2,
            f"{self.name}.mlp.b2": self.b2,
        }

    def zero_residual(self) -> None:
        """Test hook: silence the learned residual so upsampling is pure shuffle+blur."""
        for t in (self.w1, self.b1, self.w2, self.b2):
            t.data[...] = 0

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[0] != self.channels:
            raise DimensionError(
                f"{self.name}: expected ({self.channels},H,W), got {x.shape}"
            )
        rep = T.channel_repeat4(x)
        hidden = T.leaky_relu(T.conv1x1(x, self.w1, self.b1), self.SLOPE)
        residual = T.conv1x1(hidden, self.w2, self.b2)
        shuffled = T.pixel_shuffle2(T.add(rep, residual))
        bh = blur_matrix(shuffled.shape[1], self.taps, x.dtype)
        bw = blur_matrix(shuffled.shape[2], self.taps, x.dtype)
        return T.spatial_matmul(shuffled, bh, bw)


class _RgbHead:
    def __init__(self, name: str, channels: int, rng, dtype):
        self.name = name
        bound = 1.0 / np.sqrt(channels)
        self.w = Tensor(rng.uniform(-bound, bound, (3, channels)).astype(dtype), requires_grad=True)
        self.b = Tensor(np.zeros(3, dtype=dtype), requires_grad=True)

    def params(self):
        return {f"{self.name}.w": self.w, f"{self.name}.b": self.b}

    def __call__(self, x: Tensor) -> Tensor:
        return T.conv1x1(x, self.w, self.b)


class NeuralRenderer:
    """Feature map (F, g, g) -> image (3, S, S) through log2(S/g) stages.

    Each stage: learned 2x upsample, then a 1x1 conv (the channel
    reduction) with leaky ReLU. An RGB head taps the base resolution and
    every stage; the running RGB sum is bilinearly doubled before each
    addition, and the final sum goes through a sigmoid.
    """

    SLOPE = 0.2

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator | None = None,
                 taps=DEFAULT_BLUR_TAPS):
        cfg.validate()
        self.cfg = cfg
        dtype = cfg.np_dtype
        if rng is None:
            rng = np.random.default_rng(cfg.init_seed + 1)
        plan = cfg.stage_channels
        self.plan = plan
        self.base_head = _RgbHead("render.head.0", plan[0], rng, dtype)
        self.stages = []
        for s in range(cfg.num_stages):
            c_in, c_out = plan[s], plan[s + 1]
            up = UpsampleLayer(f"render.up.{s}", c_in, rng, dtype, taps=taps)
            bound = 1.0 / np.sqrt(c_in)
            conv_w = Tensor(rng.uniform(-bound, bound, (c_out, c_in)).astype(dtype),
                            requires_grad=True)
            conv_b = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True)
            head = _RgbHead(f"render.head.{s + 1}", c_out, rng, dtype)
            self.stages.append({"up": up, "conv_w": conv_w, "conv_b": conv_b, "head": head})

    def params(self) -> dict[str, Tensor]:
        out = dict(self.base_head.params())
        for s, stage in enumerate(self.stages):
            out.update(stage["up"].params())
            out[f"render.conv.{s}.w"] = stage["conv_w"]
            out[f"render.conv.{s}.b"] = stage["conv_b"]
            out.update(stage["head"].params())
        return out

    def __call__(self, fmap) -> Tensor:
        x = fmap.features if isinstance(fmap, FeatureMap) else fmap
        if x.ndim != 3 or x.shape[0] != self.plan[0]:
            raise ConfigurationError(
                f"renderer expects {self.plan[0]} feature channels, got shape {x.shape}"
            )
        rgb = self.base_head(x)
        for stage in self.stages:
            x = stage["up"](x)
            x = T.leaky_relu(T.conv1x1(x, stage["conv_w"], stage["conv_b"]), self.SLOPE)
            uh = bilinear_up2_matrix(rgb.shape[1], rgb.dtype)
            uw = bilinear_up2_matrix(rgb.shape[2], rgb.dtype)
            rgb = T.add(T.spatial_matmul(rgb, uh, uw), stage["head"](x))
        return T.sigmoid(rgb)

    def layer_audit(self) -> list[dict]:
        """Structural listing of every layer kind with its spatial support.

        Learnable layers must all be per-pixel (spatial extent 1); the
        only wider operators are the fixed blur and the fixed bilinear
        resampler on the RGB accumulator.
        """
        audit = [
            {"kind": "conv1x1_rgb_head", "spatial_extent": 1, "learnable": True},
        ]
        for stage in self.stages:
            audit.extend(
                [
                    {"kind": "per_pixel_mlp_conv1x1", "spatial_extent": 1, "learnable": True},
                    {"kind": "leaky_relu", "spatial_extent": 1, "learnable": False},
                    {"kind": "channel_repeat", "spatial_extent": 1, "learnable": False},
                    {"kind": "pixel_shuffle", "spatial_extent": 1, "learnable": False},
                    {"kind": "fixed_blur", "spatial_extent": 4, "learnable": False,
                     "taps": stage["up"].taps},
                    {"kind": "conv1x1_reduce", "spatial_extent": 1, "learnable": True},
                    {"kind": "fixed_bilinear_rgb", "spatial_extent": 2, "learnable": False},
                    {"kind": "conv1x1_rgb_head", "spatial_extent": 1, "learnable": True},
                ]
            )
        audit.append({"kind": "sigmoid", "spatial_extent": 1, "learnable": False})
        return audit
