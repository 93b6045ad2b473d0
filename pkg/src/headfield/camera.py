"""Pinhole camera model and ray generation in the canonical head frame.

Conventions, fixed for the whole package: right-handed frames, the camera
looks along -z in its own frame, pixel u grows right and v grows down.
The canonical head frame is origin-centered with a bounding sphere of
configurable radius; rays are clipped to that sphere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, MatrixError, ParameterError

_ORTHO_TOL = 1e-5


@dataclass
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    extrinsic: np.ndarray  # 4x4 rigid map, canonical -> camera
    width: int
    height: int

    def __post_init__(self):
        self.extrinsic = np.asarray(self.extrinsic, dtype=np.float64)
        if self.extrinsic.shape != (4, 4):
            raise DimensionError(f"extrinsic must be 4x4, got {self.extrinsic.shape}")
        self.validate()

    def validate(self) -> "Camera":
        r = self.extrinsic[:3, :3]
        if np.max(np.abs(r.T @ r - np.eye(3))) >= _ORTHO_TOL:
            raise MatrixError("extrinsic rotation block is not orthonormal")
        if np.linalg.det(r) < 0:
            raise MatrixError("extrinsic rotation block must have determinant +1")
        if self.fx <= 0 or self.fy <= 0:
            raise ParameterError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ParameterError("principal point must lie inside the image")
        return self

    @property
    def position(self) -> np.ndarray:
        """Camera center in canonical coordinates."""
        r = self.extrinsic[:3, :3]
        t = self.extrinsic[:3, 3]
        return -r.T @ t

    @classmethod
    def orbit(
        cls,
        yaw: float,
        pitch: float,
        distance: float,
        image_size: int,
        focal_scale: float = 1.2,
    ) -> "Camera":
        """Camera on a sphere around the origin, looking at the origin.

        yaw rotates around +y (0 faces +z), pitch lifts toward +y; both in
        radians. Focal length defaults to focal_scale * image width, which
        frames a unit sphere at distance 3 with a small margin.
        """
        if abs(pitch) >= np.pi / 2:
            raise ParameterError("pitch must satisfy |pitch| < pi/2")
        cp = np.cos(pitch)
        pos = distance * np.array([np.sin(yaw) * cp, np.sin(pitch), np.cos(yaw) * cp])
        z_cam = pos / np.linalg.norm(pos)  # camera looks along -z, i.e. at the origin
        up = np.array([0.0, 1.0, 0.0])
        x_cam = np.cross(up, z_cam)
        x_cam /= np.linalg.norm(x_cam)
        y_cam = np.cross(z_cam, x_cam)
        rot = np.stack([x_cam, y_cam, z_cam])
        ext = np.eye(4)
        ext[:3, :3] = rot
        ext[:3, 3] = -rot @ pos
        f = focal_scale * image_size
        c = image_size / 2.0
        return cls(fx=f, fy=f, cx=c, cy=c, extrinsic=ext, width=image_size, height=image_size)

    # serialization: 16 row-major extrinsic values + 4 intrinsics + 2 sizes

    def to_dict(self) -> dict:
        return {
            "extrinsic": [float(v) for v in self.extrinsic.reshape(-1)],
            "fx": float(self.fx),
            "fy": float(self.fy),
            "cx": float(self.cx),
            "cy": float(self.cy),
            "width": int(self.width),
            "height": int(self.height),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        ext = np.asarray(d["extrinsic"], dtype=np.float64).reshape(4, 4)
        return cls(
            fx=d["fx"], fy=d["fy"], cx=d["cx"], cy=d["cy"],
            extrinsic=ext, width=int(d["width"]), height=int(d["height"]),
        )


@dataclass
class RayBatch:
    """Rays in canonical coordinates, row-major over the grid."""

    origins: np.ndarray     # (N, 3)
    directions: np.ndarray  # (N, 3), unit norm
    t_near: np.ndarray      # (N,)
    t_far: np.ndarray       # (N,)
    hit_mask: np.ndarray    # (N,) bool
    grid: tuple[int, int]   # (w, h)


@dataclass
class SamplePoints:
    positions: np.ndarray  # (N, S, 3)
    deltas: np.ndarray     # (N, S) segment lengths, zero on missed rays


def generate_rays(camera: Camera, grid: tuple[int, int], radius: float = 1.0) -> RayBatch:
    """One ray per grid pixel center, clipped to the bounding sphere.

    The grid must divide the camera's output size; intrinsics are scaled
    accordingly so the frustum is unchanged.
    """
    w, h = int(grid[0]), int(grid[1])
    if camera.width % w or camera.height % h:
        raise ParameterError(
            f"grid {grid} must divide output size {(camera.width, camera.height)}"
        )
    sx = w / camera.width
    sy = h / camera.height
    fx, fy = camera.fx * sx, camera.fy * sy
    cx, cy = camera.cx * sx, camera.cy * sy

    u = (np.arange(w, dtype=np.float64) + 0.5)[None, :]
    v = (np.arange(h, dtype=np.float64) + 0.5)[:, None]
    dirs_cam = np.stack(
        [
            np.broadcast_to((u - cx) / fx, (h, w)),
            np.broadcast_to(-(v - cy) / fy, (h, w)),
            np.full((h, w), -1.0),
        ],
        axis=-1,
    ).reshape(-1, 3)

    try:
        inv = np.linalg.inv(camera.extrinsic)
    except np.linalg.LinAlgError as e:
        raise MatrixError(f"extrinsic matrix is not invertible: {e}") from None
    rot_inv = inv[:3, :3]
    origin = inv[:3, 3]

    dirs = dirs_cam @ rot_inv.T
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    origins = np.broadcast_to(origin, dirs.shape).copy()

    # ray-sphere intersection, unit direction: t^2 + 2 b t + c = 0
    b = dirs @ origin
    c = float(origin @ origin) - radius * radius
    disc = b * b - c
    hit = disc > 0
    sqrt_disc = np.sqrt(np.where(hit, disc, 0.0))
    t_near = np.where(hit, -b - sqrt_disc, 0.0)
    t_far = np.where(hit, -b + sqrt_disc, 0.0)
    hit &= t_near > 0  # camera assumed outside the sphere
    t_near = np.where(hit, t_near, 0.0)
    t_far = np.where(hit, t_far, 0.0)
    return RayBatch(origins, dirs, t_near, t_far, hit, (w, h))


def sample_along_rays(
    rays: RayBatch,
    count: int,
    mode: str = "uniform",
    rng: Optional[np.random.Generator] = None,
) -> SamplePoints:
    """Place sample points on each ray's [t_near, t_far] interval.

    uniform: midpoints of equal segments (deterministic, used for eval).
    stratified: one uniform draw per segment (training only, needs rng).
    Deltas are the segment lengths, so they sum to t_far - t_near.
    """
    s = int(count)
    if s < 2:
        raise ParameterError(f"sample count must be >= 2, got {count}")
    if mode not in ("uniform", "stratified"):
        raise ParameterError(f"unknown sampling mode {mode!r}")
    if mode == "stratified":
        if rng is None:
            raise ParameterError("stratified sampling requires an rng")
        offsets = rng.random((rays.origins.shape[0], s))
    else:
        offsets = np.full((rays.origins.shape[0], s), 0.5)

    span = (rays.t_far - rays.t_near)[:, None]
    frac = (np.arange(s, dtype=np.float64)[None, :] + offsets) / s
    t = rays.t_near[:, None] + span * frac
    positions = rays.origins[:, None, :] + t[:, :, None] * rays.directions[:, None, :]
    deltas = np.broadcast_to(span / s, t.shape).copy()
    miss = ~rays.hit_mask
    deltas[miss] = 0.0
    positions[miss] = rays.origins[miss][:, None, :]
    return SamplePoints(positions=positions, deltas=deltas)
