"""Training loop, holdout evaluation, inverse-rendering fit, presets."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .camera import Camera
from .checkpoint import TrainState, build_optimizer
from .config import FitConfig, ModelConfig, TrainConfig
from .errors import ConfigurationError, NumericError, ParameterError
from .latents import LatentRegistry, LatentState
from .losses import (
    LossWeights,
    PerceptualExtractor,
    fitting_loss,
    metrics,
    psnr_value,
    total_loss,
)
from .model import HeadModel
from .optim import Adam
from .synthdata import FrameRecord, SynthDataset

TRAIN_PRESETS = ("default", "no_perceptual", "vanilla_stub")


def apply_preset(tcfg: TrainConfig, preset: str) -> TrainConfig:
    if preset not in TRAIN_PRESETS:
        raise ParameterError(f"unknown preset {preset!r}, expected one of {TRAIN_PRESETS}")
    out = dataclasses.replace(tcfg, preset=preset)
    if preset == "no_perceptual":
        out = dataclasses.replace(out, perceptual=False)
    return out


class MetricLog:
    """Append-only JSON lines: per-step loss components and periodic PSNR."""

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self.records: list[dict] = []
        self._fp = open(path, "a") if path else None

    def _emit(self, record: dict) -> None:
        self.records.append(record)
        if self._fp:
            self._fp.write(json.dumps(record, sort_keys=True) + "\n")
            self._fp.flush()

    def log_step(self, step: int, components: dict[str, float]) -> None:
        self._emit({"kind": "step", "step": step, **components})

    def log_eval(self, step: int, psnr: float) -> None:
        self._emit({"kind": "eval", "step": step, "psnr_holdout": psnr})

    def log_note(self, message: str) -> None:
        self._emit({"kind": "note", "message": message})

    def close(self) -> None:
        if self._fp:
            self._fp.close()
            self._fp = None

    def component_keys(self) -> set:
        keys = set()
        for rec in self.records:
            if rec.get("kind") == "step":
                keys.update(k for k in rec if k not in ("kind", "step"))
        return keys


def new_session(model_cfg: ModelConfig, train_cfg: TrainConfig,
                dataset: SynthDataset) -> TrainState:
    """Fresh model, registry over the dataset's frame keys, optimizer, RNG."""
    model_cfg.validate()
    train_cfg.validate()
    model = HeadModel(model_cfg)
    registry = LatentRegistry.create(
        dataset.frame_keys(),
        dims=model_cfg.code_dims,
        dtype=model_cfg.np_dtype,
        init_sigma=train_cfg.init_sigma,
        init_seed=train_cfg.init_seed,
    )
    extractor = PerceptualExtractor.random_pyramid(
        train_cfg.perceptual_seed,
        levels=train_cfg.perceptual_levels,
        base_channels=train_cfg.perceptual_channels,
        dtype=model_cfg.np_dtype,
    )
    optimizer = build_optimizer(model, registry, train_cfg)
    rng = np.random.default_rng(train_cfg.seed)
    return TrainState(
        model=model, registry=registry, extractor=extractor, optimizer=optimizer,
        rng=rng, step=0, model_cfg=model_cfg, train_cfg=train_cfg,
    )


def loss_weights(tcfg: TrainConfig) -> LossWeights:
    return LossWeights(w_id=tcfg.w_id, w_exp=tcfg.w_exp, w_alb=tcfg.w_alb, w_ill=tcfg.w_ill)


def _frame_loss(state: TrainState, frame: FrameRecord, mode: str):
    latents = state.registry.state_for(frame.subject, frame.expression, frame.lighting)
    init = state.registry.initial_state_for(frame.subject, frame.expression, frame.lighting)
    pred = state.model.render(latents, frame.camera, mode=mode, rng=state.rng)
    extractor = state.extractor if state.train_cfg.perceptual else None
    return total_loss(pred, frame.image, frame.mask, latents, init,
                      loss_weights(state.train_cfg), extractor)


def train(state: TrainState, dataset: SynthDataset, steps: Optional[int] = None,
          log: Optional[MetricLog] = None) -> MetricLog:
    """Advance the session by ``steps`` optimization steps (default: to cfg.steps).

    Per step: draw a frame batch, sum the per-frame losses (so gradients
    into shared codes are the sum of per-frame gradients), backprop, Adam
    update. Emits loss components each step and holdout PSNR periodically.
    """
    log = log or MetricLog()
    tcfg = state.train_cfg
    if tcfg.preset == "vanilla_stub":
        log.log_note(
            "vanilla dense-ray baseline is out of scope at desk scale; "
            "stub preset records this line and performs no training"
        )
        return log
    if steps is None:
        steps = max(0, tcfg.steps - state.step)
    frames = dataset.train_frames
    if not frames:
        raise ParameterError("dataset has no training frames")
    holdout = dataset.holdout_frames

    for _ in range(steps):
        state.step += 1
        idx = state.rng.integers(0, len(frames), size=tcfg.batch)
        batch_total = None
        components: dict[str, float] = {}
        for i in idx:
            report = _frame_loss(state, frames[int(i)], tcfg.sampling)
            batch_total = report.total if batch_total is None else batch_total + report.total
            for key, value in report.scalars().items():
                components[key] = components.get(key, 0.0) + value
        total_value = batch_total.item()
        if not math.isfinite(total_value):
            norms = state.optimizer.grad_norms()
            worst = sorted(norms.items(), key=lambda kv: -kv[1])[:5]
            log.log_note(f"non-finite loss at step {state.step}: {components}; top grads {worst}")
            raise NumericError(
                f"non-finite loss at step {state.step}: components {components}"
            )
        batch_total.backward()
        state.optimizer.step()
        state.optimizer.zero_grad()
        log.log_step(state.step, components)
        if holdout and tcfg.eval_every and state.step % tcfg.eval_every == 0:
            log.log_eval(state.step, evaluate_frames(state, holdout))
    return log


def evaluate_frames(state: TrainState, frames: Sequence[FrameRecord]) -> float:
    """Mean PSNR over frames, deterministic uniform sampling."""
    values = []
    for frame in frames:
        latents = state.registry.state_for(frame.subject, frame.expression, frame.lighting)
        pred = state.model.render(latents, frame.camera, mode="uniform")
        values.append(psnr_value(pred, frame.image))
    return float(np.mean(values))


@dataclass
class FitResult:
    latents: LatentState
    metrics: dict[str, float]
    history: list[dict] = field(default_factory=list)
    checksum_before: str = ""
    checksum_after: str = ""


def fit(model: HeadModel, image: np.ndarray, mask: np.ndarray, camera: Camera,
        fcfg: FitConfig, extractor: Optional[PerceptualExtractor] = None) -> FitResult:
    """Optimize a fresh latent state against a target image; network frozen.

    Only the four codes are optimizer variables; the parameter checksum is
    captured before and after so callers can assert the frozen contract.
    """
    cfg = model.cfg
    if camera.width != cfg.image_size or camera.height != cfg.image_size:
        raise ConfigurationError(
            f"target camera {camera.width}x{camera.height} does not match "
            f"model resolution {cfg.image_size}"
        )
    if image.shape != (3, cfg.image_size, cfg.image_size):
        raise ConfigurationError(
            f"target image shape {image.shape} does not match model resolution"
        )
    checksum_before = model.checksum()
    codes = LatentState.zeros(cfg.code_dims, dtype=cfg.np_dtype, requires_grad=True)
    code_params = {f"fit/{a}": codes.get(a) for a in ("id", "exp", "alb", "ill")}
    optimizer = Adam([("latent", code_params, fcfg.lr)],
                     beta1=fcfg.beta1, beta2=fcfg.beta2, eps=fcfg.adam_eps)
    used_extractor = extractor if fcfg.perceptual else None
    history: list[dict] = []
    for it in range(fcfg.iterations):
        pred = model.render(codes, camera, mode="uniform")
        report = fitting_loss(pred, image, mask, used_extractor)
        value = report.total.item()
        if not math.isfinite(value):
            raise NumericError(f"non-finite fitting loss at iteration {it}")
        report.total.backward()
        optimizer.step()
        optimizer.zero_grad()
        if fcfg.log_every and (it % fcfg.log_every == 0 or it == fcfg.iterations - 1):
            history.append({"iteration": it, **report.scalars()})
    final = model.render(codes, camera, mode="uniform")
    if cfg.image_size >= 11:
        final_metrics = metrics(final, image)
    else:  # below the SSIM window; report the two size-free metrics
        final_metrics = {
            "l1": float(np.mean(np.abs(final.data - image))),
            "psnr": psnr_value(final, image),
        }
    return FitResult(
        latents=codes,
        metrics=final_metrics,
        history=history,
        checksum_before=checksum_before,
        checksum_after=model.checksum(),
    )
