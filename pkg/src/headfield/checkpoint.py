"""Checkpoint container: model, registry with initial codes, optimizer
moments, RNG state, and step counter.

A load->save round trip is byte-identical, and resuming a run reproduces
the uninterrupted run bit-exactly at equal step counts on the same build.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import ModelConfig, TrainConfig, from_json_dict, to_json_dict
from .container import read_container, write_container
from .errors import DataError, ParameterError
from .latents import LatentRegistry
from .losses import PerceptualExtractor
from .model import HeadModel
from .optim import Adam


@dataclass
class TrainState:
    model: HeadModel
    registry: LatentRegistry
    extractor: Optional[PerceptualExtractor]
    optimizer: Adam
    rng: np.random.Generator
    step: int
    model_cfg: ModelConfig
    train_cfg: TrainConfig


def build_optimizer(model: HeadModel, registry: LatentRegistry, tcfg: TrainConfig) -> Adam:
    return Adam(
        [
            ("network", model.params(), tcfg.lr_network),
            ("latent", registry.params(), tcfg.lr_latent),
        ],
        beta1=tcfg.beta1, beta2=tcfg.beta2, eps=tcfg.adam_eps,
    )


def _rng_state_jsonable(rng: np.random.Generator) -> dict:
    state = rng.bit_generator.state
    return {
        "bit_generator": state["bit_generator"],
        "state": {k: int(v) for k, v in state["state"].items()},
        "has_uint32": int(state["has_uint32"]),
        "uinteger": int(state["uinteger"]),
    }


def save_checkpoint(path: str, state: TrainState) -> None:
    tensors: dict[str, np.ndarray] = {}
    for name, p in state.model.params().items():
        tensors[f"param/{name}"] = p.data
    tensors.update(state.registry.export_tensors())
    tensors.update(state.optimizer.export_tensors())
    extractor_meta = None
    if state.extractor is not None:
        extractor_meta = {
            "levels": len(state.extractor.levels),
            "stride": state.extractor.stride,
            "pad": state.extractor.pad,
        }
        for i, (w, b) in enumerate(state.extractor.levels):
            tensors[f"extractor/level.{i}.w"] = w.data
            tensors[f"extractor/level.{i}.b"] = b.data
    meta = {
        "model_config": to_json_dict(state.model_cfg),
        "train_config": to_json_dict(state.train_cfg),
        "step": int(state.step),
        "adam_t": int(state.optimizer.t),
        "rng_state": _rng_state_jsonable(state.rng),
        "registry_keys": state.registry.keys(),
        "extractor": extractor_meta,
    }
    write_container(path, "checkpoint", meta, tensors)


def load_checkpoint(path: str) -> TrainState:
    kind, meta, tensors = read_container(path)
    if kind != "checkpoint":
        raise DataError(f"{path} holds a {kind!r} container, not a checkpoint")
    model_cfg = from_json_dict(ModelConfig, meta["model_config"]).validate()
    train_cfg = from_json_dict(TrainConfig, meta["train_config"]).validate()
    model = HeadModel(model_cfg)
    for name, p in model.params().items():
        stored = tensors.get(f"param/{name}")
        if stored is None:
            raise DataError(f"checkpoint missing parameter {name!r}")
        if stored.shape != p.data.shape:
            raise ParameterError(
                f"checkpoint parameter {name!r} has shape {stored.shape}, "
                f"expected {p.data.shape}"
            )
        p.data = stored.astype(model_cfg.np_dtype)

    registry = LatentRegistry.from_tensors(
        model_cfg.code_dims, model_cfg.np_dtype, meta["registry_keys"], tensors
    )

    extractor = None
    if meta.get("extractor"):
        em = meta["extractor"]
        levels = [
            (tensors[f"extractor/level.{i}.w"].astype(model_cfg.np_dtype),
             tensors[f"extractor/level.{i}.b"].astype(model_cfg.np_dtype))
            for i in range(em["levels"])
        ]
        extractor = PerceptualExtractor(levels, stride=em["stride"], pad=em["pad"])

    optimizer = build_optimizer(model, registry, train_cfg)
    optimizer.load_tensors(tensors, meta["adam_t"])

    rng = np.random.default_rng()
    rng.bit_generator.state = meta["rng_state"]
    return TrainState(
        model=model, registry=registry, extractor=extractor, optimizer=optimizer,
        rng=rng, step=int(meta["step"]), model_cfg=model_cfg, train_cfg=train_cfg,
    )
