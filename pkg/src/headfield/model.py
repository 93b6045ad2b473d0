"""Full rendering pipeline: codes + camera -> image."""

from __future__ import annotations

import hashlib
from typing import Optional

import numpy as np

from .camera import Camera, generate_rays, sample_along_rays
from .config import ModelConfig
from .errors import ConfigurationError
from .field import FieldNetwork, evaluate_field
from .latents import LatentState
from .renderer2d import NeuralRenderer
from .tensor import Tensor
from .volume import compute_weights, render_features


class HeadModel:
    """Field network plus 2D neural renderer under one config."""

    def __init__(self, cfg: ModelConfig, rng: Optional[np.random.Generator] = None):
        cfg.validate()
        self.cfg = cfg
        if rng is None:
            rng = np.random.default_rng(cfg.init_seed)
        self.field = FieldNetwork(cfg, rng)
        self.renderer = NeuralRenderer(cfg, rng)

    def params(self) -> dict[str, Tensor]:
        out = dict(self.field.params())
        out.update(self.renderer.params())
        return out

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name in sorted(params := self.params()):
            digest.update(name.encode())
            digest.update(params[name].data.tobytes())
        return digest.hexdigest()

    def render(
        self,
        latents: LatentState,
        camera: Camera,
        mode: str = "uniform",
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        """The end-to-end pipeline; deterministic in uniform mode."""
        cfg = self.cfg
        if camera.width != cfg.image_size or camera.height != cfg.image_size:
            raise ConfigurationError(
                f"camera output {camera.width}x{camera.height} does not match "
                f"model resolution {cfg.image_size}"
            )
        grid = (cfg.feature_grid, cfg.feature_grid)
        rays = generate_rays(camera, grid, radius=cfg.bounding_radius)
        pts = sample_along_rays(rays, cfg.samples_per_ray, mode=mode, rng=rng)
        sample = evaluate_field(
            self.field, pts, latents.z_id, latents.z_exp, latents.z_alb, latents.z_ill
        )
        weights = compute_weights(sample.sigma, pts.deltas.astype(cfg.np_dtype))
        fmap = render_features(weights, sample.feature, grid)
        return self.renderer(fmap)


def render_full(model: HeadModel, latents: LatentState, camera: Camera,
                mode: str = "uniform", rng=None) -> Tensor:
    return model.render(latents, camera, mode=mode, rng=rng)
