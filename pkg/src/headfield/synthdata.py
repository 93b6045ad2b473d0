"""Procedural multi-view head dataset with known ground-truth factors.

A head is a superposition of anisotropic gaussian density blobs inside a
spherical falloff, colored by a positional cosine palette and shaded by a
fixed-direction Lambert-style term. Four factor vectors drive it through
fixed linear maps: geometry (blob scales/offsets) from the identity
factor, blob displacements from the expression factor, palette
frequencies/phases from the albedo factor, and a strictly positive global
gain on the shade from the illumination factor. Ground truth is rendered
in float64 through the same quadrature code path as the model, at the
final resolution with a denser ray sampling.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
import numpy as np
from PIL import Image

from .camera import Camera, generate_rays, sample_along_rays
from .errors import ChecksumError, DataError, ManifestError
from .tensor import Tensor
from .volume import compute_weights

# every head shares these fixed factor-to-blob maps; the seed is part of
# the data definition, not a run parameter
_FIXED_MAP_SEED = 20240917

_BLOBS = [
    # name, center, radii, amplitude, moved by expression?
    ("skull", (0.0, 0.02, 0.0), (0.52, 0.62, 0.50), 2.2, False),
    ("nose", (0.0, -0.06, 0.52), (0.10, 0.14, 0.12), 1.6, False),
    ("eye_l", (-0.22, 0.16, 0.42), (0.09, 0.07, 0.08), 1.3, False),
    ("eye_r", (0.22, 0.16, 0.42), (0.09, 0.07, 0.08), 1.3, False),
    ("brow_l", (-0.22, 0.32, 0.40), (0.13, 0.05, 0.07), 1.1, True),
    ("brow_r", (0.22, 0.32, 0.40), (0.13, 0.05, 0.07), 1.1, True),
    ("mouth", (0.0, -0.28, 0.46), (0.20, 0.08, 0.09), 1.4, True),
]

_DENSITY_SCALE = 9.0
_LIGHT_DIR = np.array([0.45, 0.72, 0.53])
_LIGHT_DIR = _LIGHT_DIR / np.linalg.norm(_LIGHT_DIR)


@dataclass
class SynthSpec:
    subjects: int = 3
    expressions: int = 4
    lightings: int = 2
    views: int = 8
    resolution: int = 64
    seed: int = 0
    id_dim: int = 6
    exp_dim: int = 4
    alb_dim: int = 5
    ill_dim: int = 3
    samples_per_ray: int = 128
    radius: float = 1.0
    camera_distance_factor: float = 3.0
    holdout_views: int = 1

    def validate(self) -> "SynthSpec":
        for name in ("subjects", "expressions", "lightings", "views", "resolution"):
            if getattr(self, name) < 1:
                raise ManifestError(f"synth spec: {name} must be >= 1")
        return self


class ProceduralHead:
    """Analytic density and color fields for one factor combination."""

    def __init__(self, g_id: np.ndarray, g_exp: np.ndarray, g_alb: np.ndarray,
                 g_ill: np.ndarray, radius: float = 1.0):
        self.g_id = np.asarray(g_id, dtype=np.float64)
        self.g_exp = np.asarray(g_exp, dtype=np.float64)
        self.g_alb = np.asarray(g_alb, dtype=np.float64)
        self.g_ill = np.asarray(g_ill, dtype=np.float64)
        self.radius = float(radius)
        maps = _factor_maps(len(self.g_id), len(self.g_exp), len(self.g_alb), len(self.g_ill))

        n_blobs = len(_BLOBS)
        centers = np.array([b[1] for b in _BLOBS])
        radii = np.array([b[2] for b in _BLOBS])
        amps = np.array([b[3] for b in _BLOBS])
        exp_mask = np.array([b[4] for b in _BLOBS])[:, None]

        centers = centers + 0.05 * (maps["id_offset"] @ self.g_id).reshape(n_blobs, 3)
        radii = radii * np.exp(0.12 * (maps["id_scale"] @ self.g_id).reshape(n_blobs, 3))
        amps = amps * np.exp(0.10 * (maps["id_amp"] @ self.g_id))
        centers = centers + exp_mask * 0.08 * (maps["exp_offset"] @ self.g_exp).reshape(n_blobs, 3)
        self.centers, self.radii, self.amps = centers, radii, amps

        self.palette_freq = 1.1 + 0.35 * (maps["alb_freq"] @ self.g_alb).reshape(3, 3)
        self.palette_phase = maps["alb_phase0"] + 0.5 * (maps["alb_phase"] @ self.g_alb)
        proj = float((maps["ill_gain"] @ self.g_ill)[0])
        self.gain = 0.75 + 0.2 / (1.0 + np.exp(-2.0 * proj))

    def density(self, pts: np.ndarray) -> np.ndarray:
        """C0 nonnegative density, exactly zero outside the bounding sphere."""
        pts = np.asarray(pts, dtype=np.float64)
        r2 = np.sum(pts * pts, axis=-1)
        envelope = np.clip(1.0 - r2 / (self.radius * self.radius), 0.0, None)
        total = np.zeros(pts.shape[:-1])
        for c, r, a in zip(self.centers, self.radii, self.amps):
            d = (pts - c) / r
            total += a * np.exp(-0.5 * np.sum(d * d, axis=-1))
        return _DENSITY_SCALE * envelope * total

    def color(self, pts: np.ndarray) -> np.ndarray:
        """Palette (albedo factor) times a scalar shade (illumination factor)."""
        pts = np.asarray(pts, dtype=np.float64)
        phase = pts @ self.palette_freq.T + self.palette_phase
        palette = 0.5 + 0.45 * np.cos(2.0 * np.pi * phase)
        norm = np.linalg.norm(pts, axis=-1, keepdims=True)
        normal = pts / np.maximum(norm, 1e-9)
        ndotl = np.clip(normal @ _LIGHT_DIR, 0.0, None)
        shade = self.gain * (0.55 + 0.45 * ndotl)
        return palette * shade[..., None]


def _factor_maps(id_dim, exp_dim, alb_dim, ill_dim) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(_FIXED_MAP_SEED)
    n_blobs = len(_BLOBS)
    return {
        "id_offset": rng.standard_normal((n_blobs * 3, id_dim)) / np.sqrt(id_dim),
        "id_scale": rng.standard_normal((n_blobs * 3, id_dim)) / np.sqrt(id_dim),
        "id_amp": rng.standard_normal((n_blobs, id_dim)) / np.sqrt(id_dim),
        "exp_offset": rng.standard_normal((n_blobs * 3, exp_dim)) / np.sqrt(exp_dim),
        "alb_freq": rng.standard_normal((9, alb_dim)) / np.sqrt(alb_dim),
        "alb_phase": rng.standard_normal((3, alb_dim)) / np.sqrt(alb_dim),
        "alb_phase0": rng.random(3),
        "ill_gain": rng.standard_normal((1, ill_dim)) / np.sqrt(ill_dim),
    }


@dataclass
class FrameRecord:
    image: np.ndarray  # (3, H, W) float32 in [0, 1]
    mask: np.ndarray   # (H, W) float32 in {0, 1}
    camera: Camera
    subject: str
    expression: str
    lighting: str
    view: int
    role: str  # "train" | "holdout"


@dataclass
class SynthDataset:
    root: str
    manifest: dict
    frames: list[FrameRecord] = field(default_factory=list)

    @property
    def train_frames(self) -> list[FrameRecord]:
        return [f for f in self.frames if f.role == "train"]

    @property
    def holdout_frames(self) -> list[FrameRecord]:
        return [f for f in self.frames if f.role == "holdout"]

    def frame_keys(self) -> list[tuple[str, str, str]]:
        return [(f.subject, f.expression, f.lighting) for f in self.frames]


def _view_poses(spec: SynthSpec) -> list[tuple[float, float]]:
    """(yaw, pitch) per view: a yaw sweep over [-1.2, 1.2] rad, two pitch rows."""
    n_pitch = 2 if spec.views >= 4 else 1
    n_yaw = int(np.ceil(spec.views / n_pitch))
    yaws = np.linspace(-1.2, 1.2, n_yaw) if n_yaw > 1 else np.array([0.0])
    pitches = [-0.12, 0.12][:n_pitch]
    poses = [(float(y), float(p)) for p in pitches for y in yaws]
    return poses[: spec.views]


def holdout_pose(spec: SynthSpec) -> tuple[float, float]:
    """Midpoint in yaw between the first two training views (same pitch)."""
    poses = _view_poses(spec)
    if len(poses) < 2:
        return (0.35, poses[0][1])
    (y0, p0), (y1, p1) = poses[0], poses[1]
    if p0 == p1:
        return ((y0 + y1) / 2.0, p0)
    return (y0 + 0.2, p0)


def render_analytic(head: ProceduralHead, camera: Camera, spec: SynthSpec
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Float64 ground-truth render: (3, H, W) image and (H, W) alpha."""
    rays = generate_rays(camera, (camera.width, camera.height), radius=spec.radius)
    pts = sample_along_rays(rays, spec.samples_per_ray, mode="uniform")
    sigma = head.density(pts.positions)
    rgb = head.color(pts.positions)
    weights = compute_weights(Tensor(sigma, dtype=np.float64),
                              Tensor(pts.deltas, dtype=np.float64))
    per_ray = np.einsum("ns,nsc->nc", weights.w.data, rgb)
    h, w = camera.height, camera.width
    image = per_ray.reshape(h, w, 3).transpose(2, 0, 1)
    alpha = weights.alpha.data.reshape(h, w)
    return image, alpha


def make_camera(spec: SynthSpec, yaw: float, pitch: float) -> Camera:
    return Camera.orbit(
        yaw=yaw, pitch=pitch,
        distance=spec.camera_distance_factor * spec.radius,
        image_size=spec.resolution,
    )


def build_head(spec: SynthSpec, factors: dict, subject: str, expression: str,
               lighting: str) -> ProceduralHead:
    return ProceduralHead(
        g_id=np.asarray(factors["id"][subject]),
        g_exp=np.asarray(factors["exp"][expression]),
        g_alb=np.asarray(factors["alb"][subject]),
        g_ill=np.asarray(factors["ill"][lighting]),
        radius=spec.radius,
    )


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def generate_dataset(spec: SynthSpec, out_dir: str) -> str:
    """Write images, masks, and a manifest; returns the manifest path.

    Deterministic under the spec's seed: the same spec writes
    byte-identical files. Holdout frames use the midpoint-yaw pose and are
    excluded from training by their role tag.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    factors = {
        "id": {f"s{i}": (0.8 * rng.standard_normal(spec.id_dim)).tolist()
               for i in range(spec.subjects)},
        "exp": {f"e{i}": (0.8 * rng.standard_normal(spec.exp_dim)).tolist()
                for i in range(spec.expressions)},
        "alb": {f"s{i}": (0.8 * rng.standard_normal(spec.alb_dim)).tolist()
                for i in range(spec.subjects)},
        "ill": {f"l{i}": (0.8 * rng.standard_normal(spec.ill_dim)).tolist()
                for i in range(spec.lightings)},
    }

    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "masks"), exist_ok=True)

    poses = _view_poses(spec)
    ho_pose = holdout_pose(spec)
    frames = []
    for si in range(spec.subjects):
        for ei in range(spec.expressions):
            for li in range(spec.lightings):
                subject, expression, lighting = f"s{si}", f"e{ei}", f"l{li}"
                head = build_head(spec, factors, subject, expression, lighting)
                view_list = [(v, pose, "train") for v, pose in enumerate(poses)]
                for h in range(spec.holdout_views):
                    view_list.append((len(poses) + h, ho_pose, "holdout"))
                for view, (yaw, pitch), role in view_list:
                    camera = make_camera(spec, yaw, pitch)
                    image, alpha = render_analytic(head, camera, spec)
                    mask = (alpha > 0.5).astype(np.uint8)
                    stem = f"{subject}_{expression}_{lighting}_v{view}"
                    img_rel = f"images/{stem}.png"
                    mask_rel = f"masks/{stem}.png"
                    img_u8 = np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)
                    Image.fromarray(img_u8.transpose(1, 2, 0)).save(os.path.join(out_dir, img_rel))
                    Image.fromarray(mask * 255).save(os.path.join(out_dir, mask_rel))
                    frames.append({
                        "subject": subject, "expression": expression,
                        "lighting": lighting, "view": view, "role": role,
                        "yaw": yaw, "pitch": pitch,
                        "camera": camera.to_dict(),
                        "image": img_rel, "mask": mask_rel,
                        "sha256_image": _sha256(os.path.join(out_dir, img_rel)),
                        "sha256_mask": _sha256(os.path.join(out_dir, mask_rel)),
                    })

    manifest = {
        "version": 1,
        "spec": {k: getattr(spec, k) for k in spec.__dataclass_fields__},
        "factors": factors,
        "frames": frames,
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as fp:
        json.dump(manifest, fp, indent=1, sort_keys=True)
    return manifest_path


def load_dataset(manifest_path: str) -> SynthDataset:
    """Load and validate a generated dataset; iteration order is the manifest order."""
    if not os.path.exists(manifest_path):
        raise DataError(f"manifest not found: {manifest_path}")
    try:
        with open(manifest_path) as fp:
            manifest = json.load(fp)
    except json.JSONDecodeError as e:
        raise ManifestError(f"malformed manifest {manifest_path}: {e}") from None
    if not isinstance(manifest, dict) or "frames" not in manifest:
        raise ManifestError(f"manifest {manifest_path} missing 'frames'")
    root = os.path.dirname(os.path.abspath(manifest_path))
    dataset = SynthDataset(root=root, manifest=manifest)
    for rec in manifest["frames"]:
        for key in ("image", "mask", "camera", "subject", "expression", "lighting"):
            if key not in rec:
                raise ManifestError(f"frame record missing field {key!r}")
        img_path = os.path.join(root, rec["image"])
        mask_path = os.path.join(root, rec["mask"])
        for path, stored in ((img_path, rec["sha256_image"]), (mask_path, rec["sha256_mask"])):
            if not os.path.exists(path):
                raise DataError(f"dataset file missing: {path}")
            actual = _sha256(path)
            if actual != stored:
                raise ChecksumError(f"checksum mismatch for {path}")
        img = np.asarray(Image.open(img_path), dtype=np.float32) / 255.0
        mask = (np.asarray(Image.open(mask_path), dtype=np.float32) > 127).astype(np.float32)
        dataset.frames.append(
            FrameRecord(
                image=np.ascontiguousarray(img.transpose(2, 0, 1)),
                mask=mask,
                camera=Camera.from_dict(rec["camera"]),
                subject=rec["subject"],
                expression=rec["expression"],
                lighting=rec["lighting"],
                view=int(rec["view"]),
                role=rec.get("role", "train"),
            )
        )
    return dataset


def spec_from_manifest(manifest: dict) -> SynthSpec:
    return SynthSpec(**manifest["spec"])
