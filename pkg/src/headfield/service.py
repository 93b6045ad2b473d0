"""HTTP/WebSocket service exposing a trained checkpoint for interactive use.

Model state is loaded once and read-only afterwards; every response is a
deterministic function of (request, checkpoint). /live implements
latest-request-wins per connection: while a frame renders, newer requests
replace any queued ones, and replies carry the request's sequence number
so drops are observable.
"""

from __future__ import annotations

import asyncio
import base64
import io
import json
import logging
import time
import uuid
from dataclasses import dataclass
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import Response
from pydantic import BaseModel, Field
from PIL import Image

from .camera import Camera
from .checkpoint import TrainState, load_checkpoint
from .errors import HeadFieldError, ParameterError
from .latents import ATTRIBUTES, LatentState, interpolate, transfer_expression

logger = logging.getLogger("headfield.service")


@dataclass
class ServiceBundle:
    state: TrainState
    presets: dict[str, LatentState]

    @property
    def cfg(self):
        return self.state.model_cfg


def load_service_bundle(checkpoint_path: str) -> ServiceBundle:
    state = load_checkpoint(checkpoint_path)
    presets: dict[str, LatentState] = {
        "zero": LatentState.zeros(state.model_cfg.code_dims, dtype=state.model_cfg.np_dtype)
    }
    registry = state.registry
    for subject, expression in registry.exp_codes:
        for lighting in registry.ill_codes:
            name = f"{subject}/{expression}/{lighting}"
            presets[name] = registry.state_for(subject, expression, lighting).copy()
    return ServiceBundle(state=state, presets=presets)


class PoseModel(BaseModel):
    yaw: float = 0.0
    pitch: float = 0.0
    distance: Optional[float] = None


class MixModel(BaseModel):
    b: str
    t: float = Field(ge=0.0, le=1.0)


class RenderRequestModel(BaseModel):
    latents: Optional[dict] = None
    preset: Optional[str] = None
    mix: Optional[dict[str, MixModel]] = None
    pose: PoseModel = PoseModel()
    extrinsic: Optional[list[float]] = None
    size: Optional[tuple[int, int]] = None
    quality: Optional[int] = Field(default=None, ge=1, le=100)
    seq: Optional[int] = None


class InterpolateRequest(BaseModel):
    a: str
    b: str
    attribute: str
    t: float


class TransferRequest(BaseModel):
    target: str | dict
    sequence: list[str | dict]


def _resolve_latents(bundle: ServiceBundle, req: RenderRequestModel) -> LatentState:
    dtype = bundle.cfg.np_dtype
    if req.latents is not None:
        state = LatentState.from_doc(req.latents, dtype=dtype)
    else:
        name = req.preset or "zero"
        if name not in bundle.presets:
            raise ParameterError(f"unknown preset {name!r}")
        state = bundle.presets[name].copy()
    dims = bundle.cfg.code_dims
    for attr in ATTRIBUTES:
        if state.get(attr).shape[0] != dims[attr]:
            raise ParameterError(
                f"z_{attr} has dim {state.get(attr).shape[0]}, model expects {dims[attr]}"
            )
    if req.mix:
        for attr, mix in req.mix.items():
            if mix.b not in bundle.presets:
                raise ParameterError(f"unknown preset {mix.b!r} in mix")
            state = interpolate(state, bundle.presets[mix.b], attr, mix.t)
    return state


def _resolve_camera(bundle: ServiceBundle, req: RenderRequestModel) -> Camera:
    cfg = bundle.cfg
    if req.extrinsic is not None:
        if len(req.extrinsic) != 16:
            raise ParameterError("extrinsic must have 16 row-major entries")
        size = cfg.image_size
        return Camera(
            fx=1.2 * size, fy=1.2 * size, cx=size / 2, cy=size / 2,
            extrinsic=np.asarray(req.extrinsic, dtype=np.float64).reshape(4, 4),
            width=size, height=size,
        )
    distance = req.pose.distance
    if distance is None:
        distance = 3.0 * cfg.bounding_radius
    if distance <= cfg.bounding_radius:
        raise ParameterError(
            f"camera distance {distance} must exceed bounding radius {cfg.bounding_radius}"
        )
    return Camera.orbit(req.pose.yaw, req.pose.pitch, distance, cfg.image_size)


def _downsample(img: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    w, h = int(size[0]), int(size[1])
    _, full_h, full_w = img.shape
    if w > full_w or h > full_h:
        raise ParameterError(f"requested size {size} exceeds trained resolution {full_w}")
    if full_w % w or full_h % h:
        raise ParameterError(f"requested size {size} must divide trained resolution {full_w}")
    fy, fx = full_h // h, full_w // w
    return img.reshape(3, h, fy, w, fx).mean(axis=(2, 4))


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def encode_image(img: np.ndarray, quality: Optional[int] = None) -> tuple[bytes, str]:
    """(3,H,W) floats in [0,1] -> (bytes, media type); PNG unless quality given."""
    pil = Image.fromarray(to_uint8(img).transpose(1, 2, 0))
    buf = io.BytesIO()
    if quality is None:
        pil.save(buf, format="PNG")
        return buf.getvalue(), "image/png"
    pil.save(buf, format="JPEG", quality=int(quality))
    return buf.getvalue(), "image/jpeg"


def render_request(bundle: ServiceBundle, req: RenderRequestModel) -> np.ndarray:
    latents = _resolve_latents(bundle, req)
    camera = _resolve_camera(bundle, req)
    img = bundle.state.model.render(latents, camera, mode="uniform").data
    if req.size is not None:
        img = _downsample(img, req.size)
    return img


def create_app(bundle: ServiceBundle, default_quality: Optional[int] = None) -> FastAPI:
    app = FastAPI(title="headfield render service")

    def _guarded(fn):
        try:
            return fn()
        except ParameterError as e:
            raise HTTPException(status_code=422, detail=str(e)) from None
        except HeadFieldError as e:
            raise HTTPException(status_code=422, detail=str(e)) from None
        except HTTPException:
            raise
        except Exception:
            error_id = uuid.uuid4().hex
            logger.exception("render failure id=%s", error_id)
            raise HTTPException(status_code=500, detail={"error_id": error_id}) from None

    @app.get("/model/info")
    def model_info():
        cfg = bundle.cfg
        return {
            "latent_dims": {f"z_{k}": v for k, v in cfg.code_dims.items()},
            "resolution": [cfg.image_size, cfg.image_size],
            "feature_grid": [cfg.feature_grid, cfg.feature_grid],
            "bounding_radius": cfg.bounding_radius,
            "step": bundle.state.step,
            "presets": sorted(bundle.presets),
        }

    @app.post("/render")
    def render(req: RenderRequestModel):
        def run():
            img = render_request(bundle, req)
            payload, media = encode_image(img)  # lossless on this endpoint
            return Response(content=payload, media_type=media)

        return _guarded(run)

    @app.post("/interpolate")
    def interpolate_endpoint(req: InterpolateRequest):
        def run():
            for name in (req.a, req.b):
                if name not in bundle.presets:
                    raise ParameterError(f"unknown preset {name!r}")
            state = interpolate(bundle.presets[req.a], bundle.presets[req.b],
                                req.attribute, req.t)
            return state.to_doc()

        return _guarded(run)

    @app.post("/transfer")
    def transfer_endpoint(req: TransferRequest):
        def run():
            dtype = bundle.cfg.np_dtype

            def resolve(item):
                if isinstance(item, str):
                    if item not in bundle.presets:
                        raise ParameterError(f"unknown preset {item!r}")
                    return bundle.presets[item]
                return LatentState.from_doc(item, dtype=dtype)

            target = resolve(req.target)
            seq = [resolve(item) for item in req.sequence]
            return {"states": [s.to_doc() for s in transfer_expression(target, seq)]}

        return _guarded(run)

    @app.websocket("/live")
    async def live(ws: WebSocket):
        await ws.accept()
        latest: dict = {}
        wake = asyncio.Event()
        done = False

        async def receiver():
            nonlocal done
            try:
                while True:
                    text = await ws.receive_text()
                    try:
                        latest["req"] = RenderRequestModel(**json.loads(text))
                        latest.pop("error", None)
                    except Exception as e:  # malformed frame: report, keep connection
                        latest["error"] = str(e)
                    wake.set()
            except WebSocketDisconnect:
                done = True
                wake.set()

        task = asyncio.create_task(receiver())
        try:
            while True:
                await wake.wait()
                wake.clear()
                if done:
                    break
                if "error" in latest:
                    await ws.send_json({"error": latest.pop("error")})
                    continue
                req: RenderRequestModel = latest.get("req")
                if req is None:
                    continue
                started = time.perf_counter()
                try:
                    img = await asyncio.to_thread(render_request, bundle, req)
                except HeadFieldError as e:
                    await ws.send_json({"seq": req.seq, "error": str(e)})
                    continue
                quality = req.quality if req.quality is not None else default_quality
                payload, media = encode_image(img, quality)
                await ws.send_json({
                    "seq": req.seq,
                    "encoding": "jpeg" if media == "image/jpeg" else "png",
                    "image_b64": base64.b64encode(payload).decode(),
                    "render_ms": (time.perf_counter() - started) * 1e3,
                })
        finally:
            task.cancel()

    return app


def serve(checkpoint_path: str, bind: str = "127.0.0.1:8600",
          quality: Optional[int] = None) -> None:
    """Blocking entry point used by the CLI."""
    import uvicorn

    bundle = load_service_bundle(checkpoint_path)
    app = create_app(bundle, default_quality=quality)
    host, _, port = bind.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
