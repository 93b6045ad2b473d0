"""Training and fitting objectives plus image quality metrics.

The photometric and perceptual terms are normalized by active element
counts so their magnitude is resolution independent; the disentangled
term is the plain weighted squared norm, so a unit-vector deviation of
the expression code costs exactly its weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import tensor as T
from .container import read_container, write_container
from .errors import DimensionError, ParameterError
from .tensor import Tensor


@dataclass
class LossWeights:
    w_id: float = 0.001
    w_exp: float = 0.1
    w_alb: float = 0.001
    w_ill: float = 0.001

    def __post_init__(self):
        if min(self.w_id, self.w_exp, self.w_alb, self.w_ill) < 0:
            raise ParameterError("loss weights must be nonnegative")


def photometric_loss(pred: Tensor, gt, mask) -> Tensor:
    """Masked mean squared pixel error; pixels outside the mask never contribute."""
    gt_arr = np.asarray(gt.data if isinstance(gt, Tensor) else gt, dtype=pred.data.dtype)
    mask_arr = np.asarray(mask.data if isinstance(mask, Tensor) else mask, dtype=pred.data.dtype)
    if gt_arr.shape != pred.shape:
        raise DimensionError(f"photometric_loss: pred {pred.shape} vs target {gt_arr.shape}")
    if mask_arr.shape != pred.shape[-2:]:
        raise DimensionError(f"photometric_loss: mask {mask_arr.shape} vs image {pred.shape}")
    if not np.all((mask_arr == 0) | (mask_arr == 1)):
        raise ParameterError("photometric_loss: mask entries must be 0 or 1")
    active = float(mask_arr.sum()) * pred.shape[0]
    if active == 0:
        return Tensor(np.zeros((), dtype=pred.data.dtype))
    masked = T.mul(T.sub(pred, Tensor(gt_arr)), Tensor(mask_arr))
    return T.mul(T.squared_norm(masked), 1.0 / active)


class PerceptualExtractor:
    """Fixed-weight multi-scale feature pyramid.

    A stack of strided 5x5 convolutions with leaky ReLU, weights frozen.
    With no conv levels the pyramid is just the image itself, which makes
    the perceptual loss collapse to plain mean squared pixel error (handy
    as an oracle). Weights come from a seed or from a container file.
    """

    SLOPE = 0.2

    def __init__(self, levels: Sequence[tuple[np.ndarray, np.ndarray]], stride: int = 2,
                 pad: int = 2):
        self.stride = stride
        self.pad = pad
        self.levels = [
            (Tensor(np.asarray(w)), Tensor(np.asarray(b))) for w, b in levels
        ]

    @classmethod
    def identity(cls) -> "PerceptualExtractor":
        return cls([])

    @classmethod
    def random_pyramid(cls, seed: int, levels: int = 4, in_channels: int = 3,
                       base_channels: int = 8, kernel: int = 5,
                       dtype=np.float32) -> "PerceptualExtractor":
        rng = np.random.default_rng(seed)
        specs = []
        c_in = in_channels
        for i in range(levels):
            c_out = base_channels * (i + 1)
            scale = np.sqrt(2.0 / (c_in * kernel * kernel))
            w = (rng.standard_normal((c_out, c_in, kernel, kernel)) * scale).astype(dtype)
            b = np.zeros(c_out, dtype=dtype)
            specs.append((w, b))
            c_in = c_out
        return cls(specs)

    def __call__(self, image: Tensor) -> list[Tensor]:
        if not self.levels:
            return [image]
        feats = []
        x = image
        for w, b in self.levels:
            x = T.leaky_relu(T.conv2d(x, w, b, stride=self.stride, pad=self.pad), self.SLOPE)
            feats.append(x)
        return feats

    def astype(self, dtype) -> "PerceptualExtractor":
        return PerceptualExtractor(
            [(w.data.astype(dtype), b.data.astype(dtype)) for w, b in self.levels],
            stride=self.stride, pad=self.pad,
        )

    def save(self, path: str) -> None:
        tensors = {}
        for i, (w, b) in enumerate(self.levels):
            tensors[f"level.{i}.w"] = w.data
            tensors[f"level.{i}.b"] = b.data
        meta = {"levels": len(self.levels), "stride": self.stride, "pad": self.pad}
        write_container(path, "extractor", meta, tensors)

    @classmethod
    def load(cls, path: str) -> "PerceptualExtractor":
        kind, meta, tensors = read_container(path)
        if kind != "extractor":
            raise ParameterError(f"{path} holds a {kind!r} container, not extractor weights")
        levels = []
        for i in range(meta["levels"]):
            levels.append((tensors[f"level.{i}.w"], tensors[f"level.{i}.b"]))
        return cls(levels, stride=meta["stride"], pad=meta["pad"])


def perceptual_loss(pred: Tensor, gt, extractor: PerceptualExtractor) -> Tensor:
    """Sum over pyramid levels of mean squared feature difference."""
    gt_t = gt if isinstance(gt, Tensor) else Tensor(np.asarray(gt, dtype=pred.data.dtype))
    feats_pred = extractor(pred)
    feats_gt = extractor(gt_t.detach())
    total = None
    for fp, fg in zip(feats_pred, feats_gt):
        term = T.mul(T.squared_norm(T.sub(fp, fg.detach())), 1.0 / fp.size)
        total = term if total is None else T.add(total, term)
    return total


def disentangled_loss(codes, init, weights: LossWeights) -> Tensor:
    """Weighted squared distance of every code from its frozen initial value."""
    total = None
    for attr, w in (("id", weights.w_id), ("exp", weights.w_exp),
                    ("alb", weights.w_alb), ("ill", weights.w_ill)):
        z = getattr(codes, f"z_{attr}")
        z0 = getattr(init, f"z_{attr}") if not isinstance(init, dict) else init[attr]
        z0_arr = np.asarray(z0.data if isinstance(z0, Tensor) else z0, dtype=z.data.dtype)
        if z0_arr.shape != z.shape:
            raise ParameterError(
                f"disentangled_loss: z_{attr} {z.shape} vs initial {z0_arr.shape}"
            )
        term = T.mul(T.squared_norm(T.sub(z, Tensor(z0_arr))), float(w))
        total = term if total is None else T.add(total, term)
    return total


@dataclass
class LossReport:
    total: Tensor
    data: Tensor
    perceptual: Optional[Tensor]
    disentangled: Optional[Tensor]

    def scalars(self) -> dict[str, float]:
        out = {"total": self.total.item(), "data": self.data.item()}
        if self.perceptual is not None:
            out["perceptual"] = self.perceptual.item()
        if self.disentangled is not None:
            out["disentangled"] = self.disentangled.item()
        return out


def total_loss(pred: Tensor, gt, mask, codes, init, weights: LossWeights,
               extractor: Optional[PerceptualExtractor]) -> LossReport:
    """data + perceptual + disentangled; perceptual drops out when extractor is None."""
    data = photometric_loss(pred, gt, mask)
    dis = disentangled_loss(codes, init, weights)
    total = T.add(data, dis)
    per = None
    if extractor is not None:
        per = perceptual_loss(pred, gt, extractor)
        total = T.add(total, per)
    return LossReport(total=total, data=data, perceptual=per, disentangled=dis)


def fitting_loss(pred: Tensor, gt, mask,
                 extractor: Optional[PerceptualExtractor]) -> LossReport:
    """data + perceptual, no disentangled anchor (codes are free variables)."""
    data = photometric_loss(pred, gt, mask)
    total = data
    per = None
    if extractor is not None:
        per = perceptual_loss(pred, gt, extractor)
        total = T.add(total, per)
    return LossReport(total=total, data=data, perceptual=per, disentangled=None)


# -- image quality metrics (plain numpy, evaluation only) ------------------------


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _ssim_channel(a: np.ndarray, b: np.ndarray, k1: float = 0.01, k2: float = 0.03) -> float:
    size = 11
    if a.shape[0] < size or a.shape[1] < size:
        raise ParameterError(f"ssim needs images at least {size}x{size}, got {a.shape}")
    g = _gaussian_window(size)

    def smooth(img):
        # separable valid-mode correlation with the gaussian window
        t = np.apply_along_axis(lambda r: np.correlate(r, g, mode="valid"), 0, img)
        return np.apply_along_axis(lambda r: np.correlate(r, g, mode="valid"), 1, t)

    c1 = k1 * k1
    c2 = k2 * k2
    mu_a = smooth(a)
    mu_b = smooth(b)
    var_a = smooth(a * a) - mu_a * mu_a
    var_b = smooth(b * b) - mu_b * mu_b
    cov = smooth(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def metrics(pred, gt) -> dict[str, float]:
    """Mean L1, PSNR (cap 100 dB), and SSIM for images in [0, 1]."""
    p = np.asarray(pred.data if isinstance(pred, Tensor) else pred, dtype=np.float64)
    g = np.asarray(gt.data if isinstance(gt, Tensor) else gt, dtype=np.float64)
    if p.shape != g.shape:
        raise DimensionError(f"metrics: shapes {p.shape} and {g.shape} differ")
    diff = p - g
    l1 = float(np.mean(np.abs(diff)))
    mse = float(np.mean(diff * diff))
    psnr = 100.0 if mse < 1e-10 else float(10.0 * np.log10(1.0 / mse))
    if p.ndim == 2:
        ssim = _ssim_channel(p, g)
    else:
        ssim = float(np.mean([_ssim_channel(p[c], g[c]) for c in range(p.shape[0])]))
    return {"l1": l1, "psnr": psnr, "ssim": ssim}


def psnr_value(pred, gt) -> float:
    """PSNR alone, usable on images too small for the SSIM window."""
    p = np.asarray(pred.data if isinstance(pred, Tensor) else pred, dtype=np.float64)
    g = np.asarray(gt.data if isinstance(gt, Tensor) else gt, dtype=np.float64)
    if p.shape != g.shape:
        raise DimensionError(f"psnr: shapes {p.shape} and {g.shape} differ")
    mse = float(np.mean((p - g) ** 2))
    return 100.0 if mse < 1e-10 else float(10.0 * np.log10(1.0 / mse))
