"""Model and run configuration with JSON round-tripping and presets."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass
class ModelConfig:
    """Static shape of the rendering pipeline."""

    z_id_dim: int = 100
    z_exp_dim: int = 79
    z_alb_dim: int = 100
    z_ill_dim: int = 27
    pe_octaves: int = 10
    pe_include_identity: bool = True
    trunk_width: int = 256
    trunk_depth: int = 6
    trunk_skip: int = 3
    feature_dim: int = 256
    feature_grid: int = 32
    image_size: int = 256
    samples_per_ray: int = 64
    bounding_radius: float = 1.0
    init_seed: int = 3
    dtype: str = "float32"

    def validate(self) -> "ModelConfig":
        if self.image_size % self.feature_grid != 0:
            raise ConfigurationError(
                f"feature grid {self.feature_grid} must divide image size {self.image_size}"
            )
        ratio = self.image_size // self.feature_grid
        if ratio < 2 or ratio & (ratio - 1):
            raise ConfigurationError(
                f"image/feature ratio must be a power of two >= 2, got {ratio}"
            )
        if not 1 <= self.trunk_skip < self.trunk_depth:
            raise ConfigurationError(
                f"trunk skip layer {self.trunk_skip} outside 1..{self.trunk_depth - 1}"
            )
        if self.samples_per_ray < 2:
            raise ConfigurationError("samples_per_ray must be >= 2")
        if self.dtype not in ("float32", "float64"):
            raise ConfigurationError(f"dtype must be float32 or float64, got {self.dtype}")
        return self

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    @property
    def num_stages(self) -> int:
        return int(math.log2(self.image_size // self.feature_grid))

    @property
    def stage_channels(self) -> list[int]:
        """Channel plan: feature_dim halved per upsampling stage, floor 8."""
        plan = [self.feature_dim]
        for _ in range(self.num_stages):
            plan.append(max(8, plan[-1] // 2))
        return plan

    @property
    def encoded_dim(self) -> int:
        return 3 * (2 * self.pe_octaves + int(self.pe_include_identity))

    @property
    def code_dims(self) -> dict[str, int]:
        return {
            "id": self.z_id_dim,
            "exp": self.z_exp_dim,
            "alb": self.z_alb_dim,
            "ill": self.z_ill_dim,
        }


def desk_scale() -> ModelConfig:
    """Reduced configuration that trains in minutes on a laptop CPU."""
    return ModelConfig(
        trunk_width=128,
        trunk_depth=4,
        trunk_skip=2,
        feature_dim=64,
        feature_grid=16,
        image_size=64,
    ).validate()


def micro() -> ModelConfig:
    """Tiny configuration for finite-difference verification runs."""
    return ModelConfig(
        z_id_dim=8,
        z_exp_dim=6,
        z_alb_dim=5,
        z_ill_dim=4,
        pe_octaves=2,
        trunk_width=16,
        trunk_depth=2,
        trunk_skip=1,
        feature_dim=8,
        feature_grid=4,
        image_size=8,
        samples_per_ray=4,
    ).validate()


@dataclass
class TrainConfig:
    steps: int = 2000
    lr_network: float = 1e-4
    lr_latent: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch: int = 1
    seed: int = 0
    sampling: str = "stratified"
    eval_every: int = 200
    perceptual: bool = True
    perceptual_seed: int = 7
    perceptual_levels: int = 4
    perceptual_channels: int = 8
    init_sigma: float = 0.1
    init_seed: int = 11
    w_id: float = 0.001
    w_exp: float = 0.1
    w_alb: float = 0.001
    w_ill: float = 0.001
    preset: str = "default"

    def validate(self) -> "TrainConfig":
        if self.lr_network < 0 or self.lr_latent < 0:
            raise ConfigurationError("learning rates must be nonnegative")
        if self.batch < 1:
            raise ConfigurationError("batch must be >= 1")
        if self.sampling not in ("stratified", "uniform"):
            raise ConfigurationError(f"unknown sampling mode {self.sampling!r}")
        if min(self.w_id, self.w_exp, self.w_alb, self.w_ill) < 0:
            raise ConfigurationError("loss weights must be nonnegative")
        return self


@dataclass
class FitConfig:
    iterations: int = 400
    lr: float = 0.02
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    perceptual: bool = True
    log_every: int = 50


def to_json_dict(cfg) -> dict:
    return dataclasses.asdict(cfg)


def from_json_dict(cls, payload: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - names
    if unknown:
        raise ConfigurationError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    return cls(**payload)


def config_hash(*cfgs) -> str:
    blob = json.dumps([to_json_dict(c) for c in cfgs], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
