"""Single entry point covering the full lifecycle.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Failures print one machine-readable JSON line on stderr. Every run writes
a resolved-config snapshot next to its outputs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import statistics
import sys
import time

import click
import numpy as np

from . import config as config_mod
from .camera import Camera
from .checkpoint import load_checkpoint, save_checkpoint
from .config import FitConfig, ModelConfig, TrainConfig, from_json_dict, to_json_dict
from .errors import (
    ConfigurationError,
    DataError,
    HeadFieldError,
    NumericError,
    ParameterError,
)
from .latents import LatentState, interpolate
from .service import encode_image, load_service_bundle, render_request, RenderRequestModel
from .synthdata import SynthSpec, generate_dataset, load_dataset
from .training import MetricLog, apply_preset, fit as run_fit, new_session, train as run_train


def _write_snapshot(path: str, payload: dict) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fp:
        json.dump(payload, fp, indent=1, sort_keys=True)


def _save_png(path: str, img) -> None:
    from .service import to_uint8
    from PIL import Image

    arr = to_uint8(np.asarray(img.data if hasattr(img, "data") else img))
    Image.fromarray(arr.transpose(1, 2, 0)).save(path)


def _load_latents_arg(bundle, latents_file, preset):
    if latents_file:
        with open(latents_file) as fp:
            return LatentState.from_doc(json.load(fp), dtype=bundle.cfg.np_dtype)
    name = preset or "zero"
    if name not in bundle.presets:
        raise ParameterError(f"unknown preset {name!r}")
    return bundle.presets[name].copy()


@click.group()
def cli():
    """Neural head field: data synthesis, training, fitting, rendering, serving."""


@cli.command("synth-data")
@click.option("--out", required=True, type=click.Path())
@click.option("--subjects", default=3, show_default=True)
@click.option("--expressions", default=4, show_default=True)
@click.option("--lightings", default=2, show_default=True)
@click.option("--views", default=8, show_default=True)
@click.option("--resolution", default=64, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--holdout-views", default=1, show_default=True)
def synth_data(out, subjects, expressions, lightings, views, resolution, seed, holdout_views):
    """Generate the procedural multi-view dataset."""
    spec = SynthSpec(
        subjects=subjects, expressions=expressions, lightings=lightings,
        views=views, resolution=resolution, seed=seed, holdout_views=holdout_views,
    )
    manifest = generate_dataset(spec, out)
    _write_snapshot(os.path.join(out, "resolved_config.json"),
                    {"synth_spec": dataclasses.asdict(spec)})
    click.echo(manifest)


def _model_config_from(model_preset: str, overrides: dict) -> ModelConfig:
    base = {
        "full": ModelConfig(),
        "desk": config_mod.desk_scale(),
        "micro": config_mod.micro(),
    }.get(model_preset)
    if base is None:
        raise ParameterError(f"unknown model preset {model_preset!r}")
    return dataclasses.replace(base, **overrides).validate()


@cli.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON file with {'model': {...}, 'train': {...}} overrides")
@click.option("--model-preset", default="desk", show_default=True)
@click.option("--preset", default="default", show_default=True,
              help="training preset: default | no_perceptual | vanilla_stub")
@click.option("--steps", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--lr-network", type=float, default=None)
@click.option("--lr-latent", type=float, default=None)
@click.option("--batch", type=int, default=None)
@click.option("--eval-every", type=int, default=None)
@click.option("--resume", type=click.Path(), default=None)
def train(dataset_path, out, config_path, model_preset, preset, steps, seed,
          lr_network, lr_latent, batch, eval_every, resume):
    """Train network parameters and latent codes on a dataset."""
    dataset = load_dataset(dataset_path)
    file_cfg = {"model": {}, "train": {}}
    if config_path:
        with open(config_path) as fp:
            file_cfg.update(json.load(fp))
    if resume:
        state = load_checkpoint(resume)
    else:
        model_cfg = _model_config_from(model_preset, file_cfg.get("model", {}))
        resolution = dataset.manifest["spec"]["resolution"]
        if model_cfg.image_size != resolution:
            raise ConfigurationError(
                f"model resolution {model_cfg.image_size} != dataset resolution {resolution}"
            )
        train_cfg = from_json_dict(TrainConfig, {**to_json_dict(TrainConfig()),
                                                 **file_cfg.get("train", {})})
        overrides = {
            "steps": steps, "seed": seed, "lr_network": lr_network,
            "lr_latent": lr_latent, "batch": batch, "eval_every": eval_every,
        }
        train_cfg = dataclasses.replace(
            train_cfg, **{k: v for k, v in overrides.items() if v is not None}
        )
        train_cfg = apply_preset(train_cfg, preset).validate()
        state = new_session(model_cfg, train_cfg, dataset)
    os.makedirs(out, exist_ok=True)
    _write_snapshot(os.path.join(out, "resolved_config.json"), {
        "model": to_json_dict(state.model_cfg),
        "train": to_json_dict(state.train_cfg),
        "dataset": os.path.abspath(dataset_path),
        "config_hash": config_mod.config_hash(state.model_cfg, state.train_cfg),
    })
    log = MetricLog(os.path.join(out, "metrics.log"))
    try:
        run_train(state, dataset, steps=steps, log=log)
    finally:
        log.close()
    ckpt = os.path.join(out, "checkpoint.hnrf")
    save_checkpoint(ckpt, state)
    click.echo(ckpt)


@cli.command()
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--image", "image_path", required=True, type=click.Path())
@click.option("--mask", "mask_path", type=click.Path(), default=None)
@click.option("--yaw", type=float, default=0.0)
@click.option("--pitch", type=float, default=0.0)
@click.option("--distance", type=float, default=None)
@click.option("--camera", "camera_path", type=click.Path(), default=None,
              help="JSON camera dict; overrides the pose flags")
@click.option("--iters", type=int, default=400, show_default=True)
@click.option("--lr", type=float, default=0.02, show_default=True)
@click.option("--no-perceptual", is_flag=True, default=False)
@click.option("--out", required=True, type=click.Path())
def fit(checkpoint, image_path, mask_path, yaw, pitch, distance, camera_path,
        iters, lr, no_perceptual, out):
    """Recover latent codes for a target image (network frozen)."""
    from PIL import Image

    state = load_checkpoint(checkpoint)
    cfg = state.model_cfg
    img = np.asarray(Image.open(image_path), dtype=np.float32) / 255.0
    if img.ndim != 3 or img.shape[2] != 3:
        raise DataError(f"{image_path}: expected an RGB image")
    img = img.transpose(2, 0, 1)
    if mask_path:
        mask = (np.asarray(Image.open(mask_path), dtype=np.float32) > 127).astype(np.float32)
    else:
        mask = np.ones(img.shape[1:], dtype=np.float32)
    if camera_path:
        with open(camera_path) as fp:
            camera = Camera.from_dict(json.load(fp))
    else:
        camera = Camera.orbit(yaw, pitch, distance or 3.0 * cfg.bounding_radius,
                              cfg.image_size)
    fcfg = FitConfig(iterations=iters, lr=lr, perceptual=not no_perceptual)
    result = run_fit(state.model, img, mask, camera, fcfg, extractor=state.extractor)
    with open(out, "w") as fp:
        json.dump(result.latents.to_doc(), fp)
    _write_snapshot(out + ".config.json", {
        "fit": dataclasses.asdict(fcfg), "checkpoint": os.path.abspath(checkpoint),
        "camera": camera.to_dict(),
    })
    click.echo(json.dumps({
        "metrics": result.metrics,
        "network_frozen": result.checksum_before == result.checksum_after,
    }, sort_keys=True))


@cli.command()
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--latents", "latents_file", type=click.Path(), default=None)
@click.option("--preset", default=None)
@click.option("--mix-attribute", default=None)
@click.option("--mix-preset-b", default=None)
@click.option("--mix-t", type=float, default=None)
@click.option("--yaw", type=float, default=0.0)
@click.option("--pitch", type=float, default=0.0)
@click.option("--distance", type=float, default=None)
@click.option("--out", required=True, type=click.Path())
def render(checkpoint, latents_file, preset, mix_attribute, mix_preset_b, mix_t,
           yaw, pitch, distance, out):
    """Render one frame from a latent state or preset."""
    bundle = load_service_bundle(checkpoint)
    latents = _load_latents_arg(bundle, latents_file, preset)
    if mix_attribute is not None:
        if mix_preset_b is None or mix_t is None:
            raise ParameterError("--mix-attribute needs --mix-preset-b and --mix-t")
        if mix_preset_b not in bundle.presets:
            raise ParameterError(f"unknown preset {mix_preset_b!r}")
        latents = interpolate(latents, bundle.presets[mix_preset_b], mix_attribute, mix_t)
    camera = Camera.orbit(yaw, pitch, distance or 3.0 * bundle.cfg.bounding_radius,
                          bundle.cfg.image_size)
    img = bundle.state.model.render(latents, camera, mode="uniform")
    _save_png(out, img)
    _write_snapshot(out + ".config.json", {
        "checkpoint": os.path.abspath(checkpoint),
        "pose": {"yaw": yaw, "pitch": pitch, "distance": distance},
        "preset": preset, "latents_file": latents_file,
        "mix": {"attribute": mix_attribute, "b": mix_preset_b, "t": mix_t},
    })
    click.echo(out)


@cli.command()
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["attribute", "pose"]), default="attribute",
              show_default=True)
@click.option("--attribute", default="exp")
@click.option("--preset-a", default=None)
@click.option("--preset-b", default=None)
@click.option("--preset", default=None, help="pose mode: which latents to orbit")
@click.option("--steps", type=int, default=5, show_default=True)
@click.option("--yaw-start", type=float, default=-0.8)
@click.option("--yaw-end", type=float, default=0.8)
@click.option("--yaw", type=float, default=0.0)
@click.option("--pitch", type=float, default=0.0)
@click.option("--distance", type=float, default=None)
@click.option("--out-dir", required=True, type=click.Path())
def sweep(checkpoint, mode, attribute, preset_a, preset_b, preset, steps,
          yaw_start, yaw_end, yaw, pitch, distance, out_dir):
    """Image strips: attribute interpolation grids or pose sweeps."""
    bundle = load_service_bundle(checkpoint)
    cfg = bundle.cfg
    os.makedirs(out_dir, exist_ok=True)
    dist = distance or 3.0 * cfg.bounding_radius
    frames = []
    if mode == "attribute":
        if not preset_a or not preset_b:
            raise ParameterError("attribute sweep needs --preset-a and --preset-b")
        for name in (preset_a, preset_b):
            if name not in bundle.presets:
                raise ParameterError(f"unknown preset {name!r}")
        camera = Camera.orbit(yaw, pitch, dist, cfg.image_size)
        for i in range(steps):
            t = i / (steps - 1) if steps > 1 else 0.0
            latents = interpolate(bundle.presets[preset_a], bundle.presets[preset_b],
                                  attribute, t)
            frames.append(bundle.state.model.render(latents, camera, mode="uniform").data)
    else:
        latents = _load_latents_arg(bundle, None, preset)
        for i in range(steps):
            frac = i / (steps - 1) if steps > 1 else 0.0
            camera = Camera.orbit(yaw_start + frac * (yaw_end - yaw_start), pitch,
                                  dist, cfg.image_size)
            frames.append(bundle.state.model.render(latents, camera, mode="uniform").data)
    paths = []
    for i, frame in enumerate(frames):
        path = os.path.join(out_dir, f"sweep_{i:03d}.png")
        _save_png(path, frame)
        paths.append(path)
    _save_png(os.path.join(out_dir, "strip.png"), np.concatenate(frames, axis=2))
    _write_snapshot(os.path.join(out_dir, "resolved_config.json"), {
        "mode": mode, "attribute": attribute, "preset_a": preset_a,
        "preset_b": preset_b, "preset": preset, "steps": steps,
        "pose": {"yaw": yaw, "pitch": pitch, "distance": dist,
                 "yaw_start": yaw_start, "yaw_end": yaw_end},
        "checkpoint": os.path.abspath(checkpoint),
    })
    for p in paths:
        click.echo(p)


@cli.command()
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--target", required=True,
              help="preset name or path to a latent JSON document")
@click.option("--sequence", "sequence_path", required=True, type=click.Path(),
              help="JSON list of latent documents (or preset names)")
@click.option("--yaw", type=float, default=0.0)
@click.option("--pitch", type=float, default=0.0)
@click.option("--distance", type=float, default=None)
@click.option("--out-dir", required=True, type=click.Path())
def transfer(checkpoint, target, sequence_path, yaw, pitch, distance, out_dir):
    """Drive a target's expression code from a source sequence."""
    from .latents import transfer_expression

    bundle = load_service_bundle(checkpoint)
    cfg = bundle.cfg
    if os.path.exists(target):
        target_state = _load_latents_arg(bundle, target, None)
    else:
        target_state = _load_latents_arg(bundle, None, target)
    with open(sequence_path) as fp:
        raw_seq = json.load(fp)
    seq = []
    for item in raw_seq:
        if isinstance(item, str):
            if item not in bundle.presets:
                raise ParameterError(f"unknown preset {item!r} in sequence")
            seq.append(bundle.presets[item])
        else:
            seq.append(LatentState.from_doc(item, dtype=cfg.np_dtype))
    states = transfer_expression(target_state, seq)
    camera = Camera.orbit(yaw, pitch, distance or 3.0 * cfg.bounding_radius, cfg.image_size)
    os.makedirs(out_dir, exist_ok=True)
    for k, state in enumerate(states):
        img = bundle.state.model.render(state, camera, mode="uniform")
        _save_png(os.path.join(out_dir, f"frame_{k:03d}.png"), img)
        with open(os.path.join(out_dir, f"latents_{k:03d}.json"), "w") as fp:
            json.dump(state.to_doc(), fp)
    _write_snapshot(os.path.join(out_dir, "resolved_config.json"), {
        "target": target, "sequence": os.path.abspath(sequence_path),
        "checkpoint": os.path.abspath(checkpoint), "frames": len(states),
    })
    click.echo(out_dir)


@cli.command()
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--frames", type=int, default=20, show_default=True)
@click.option("--preset", default="zero")
@click.option("--yaw", type=float, default=0.2)
@click.option("--pitch", type=float, default=0.1)
@click.option("--live", is_flag=True, default=False,
              help="measure websocket round trips against a local service instead")
@click.option("--quality", type=int, default=None,
              help="live mode: JPEG quality for the stream")
def bench(checkpoint, frames, preset, yaw, pitch, live, quality):
    """Timed render loop: ms/frame, fps, and determinism of frame bytes.

    With --live, a service is started on a loopback port and timed
    end to end over the /live websocket (encode + transport included).
    """
    bundle = load_service_bundle(checkpoint)
    req = RenderRequestModel(preset=preset, pose={"yaw": yaw, "pitch": pitch})
    if live:
        times = _bench_live(bundle, req, frames, quality)
        mean_ms = statistics.fmean(times)
        report = {
            "mode": "live",
            "frames": frames,
            "mean_ms": mean_ms,
            "median_ms": statistics.median(times),
            "fps": 1000.0 / mean_ms,
        }
        click.echo(json.dumps(report, sort_keys=True))
        return
    render_request(bundle, req)  # warm caches before timing
    times = []
    digests = set()
    for _ in range(frames):
        started = time.perf_counter()
        img = render_request(bundle, req)
        times.append((time.perf_counter() - started) * 1e3)
        payload, _ = encode_image(img)
        digests.add(hashlib.sha256(payload).hexdigest())
    mean_ms = statistics.fmean(times)
    report = {
        "mode": "render",
        "frames": frames,
        "mean_ms": mean_ms,
        "median_ms": statistics.median(times),
        "fps": 1000.0 / mean_ms,
        "deterministic": len(digests) == 1,
        "frame_sha256": sorted(digests)[0],
    }
    click.echo(json.dumps(report, sort_keys=True))


def _bench_live(bundle, req: RenderRequestModel, frames: int, quality) -> list[float]:
    import socket
    import threading

    import uvicorn
    from websockets.sync.client import connect

    from .service import create_app

    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    server = uvicorn.Server(uvicorn.Config(create_app(bundle, default_quality=quality),
                                           host="127.0.0.1", port=port,
                                           log_level="error"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 15
    while not server.started:
        if time.time() > deadline:
            raise HeadFieldError("bench service failed to start")
        time.sleep(0.05)
    try:
        payload = req.model_dump(exclude_none=True)
        times = []
        with connect(f"ws://127.0.0.1:{port}/live") as ws:
            ws.send(json.dumps({**payload, "seq": 0}))  # warm
            ws.recv()
            for i in range(frames):
                started = time.perf_counter()
                ws.send(json.dumps({**payload, "seq": i + 1}))
                ws.recv()
                times.append((time.perf_counter() - started) * 1e3)
        return times
    finally:
        server.should_exit = True
        thread.join(timeout=10)


@cli.command()
@click.option("--checkpoint", default=None, type=click.Path())
@click.option("--bind", default=None)
@click.option("--quality", type=int, default=None)
def serve(checkpoint, bind, quality):
    """Run the render service (env: HEADFIELD_CHECKPOINT, HEADFIELD_BIND)."""
    from .service import serve as run_serve

    checkpoint = checkpoint or os.environ.get("HEADFIELD_CHECKPOINT")
    bind = bind or os.environ.get("HEADFIELD_BIND") or "127.0.0.1:8600"
    if not checkpoint:
        raise ParameterError("no checkpoint: pass --checkpoint or set HEADFIELD_CHECKPOINT")
    run_serve(checkpoint, bind=bind, quality=quality)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as e:
        if e.ctx is not None:
            sys.stderr.write(e.ctx.get_usage() + "\n")
        sys.stderr.write(json.dumps({"error": "usage", "message": e.format_message()}) + "\n")
        return 1
    except click.Abort:
        sys.stderr.write(json.dumps({"error": "aborted", "message": "aborted"}) + "\n")
        return 1
    except (ParameterError, ConfigurationError) as e:
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e)}) + "\n")
        return 1
    except NumericError as e:
        sys.stderr.write(json.dumps({"error": "NumericError", "message": str(e)}) + "\n")
        return 3
    except (DataError, HeadFieldError, OSError) as e:
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e)}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
