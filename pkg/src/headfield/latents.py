"""Latent code registry with sharing semantics, interpolation, and
expression transfer.

Sharing is by object identity: every frame of a subject resolves to the
same identity-code tensor, every (subject, expression) pair to the same
expression-code tensor under any lighting or camera, albedo per subject,
illumination per lighting tag. Gradient accumulation over a batch then
lands in the shared tensors automatically. The initial codes taken at
registry creation are frozen read-only snapshots.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ManifestError, ParameterError
from .tensor import Tensor

ATTRIBUTES = ("id", "exp", "alb", "ill")


@dataclass
class LatentState:
    z_id: Tensor
    z_exp: Tensor
    z_alb: Tensor
    z_ill: Tensor

    def get(self, attribute: str) -> Tensor:
        if attribute not in ATTRIBUTES:
            raise ParameterError(f"unknown attribute {attribute!r}, expected one of {ATTRIBUTES}")
        return getattr(self, f"z_{attribute}")

    def dims(self) -> dict[str, int]:
        return {a: self.get(a).shape[0] for a in ATTRIBUTES}

    def copy(self) -> "LatentState":
        """Detached copy; the new tensors share nothing with the originals."""
        return LatentState(*(Tensor(self.get(a).data.copy()) for a in ATTRIBUTES))

    def replace(self, attribute: str, value: Tensor) -> "LatentState":
        parts = {a: self.get(a) for a in ATTRIBUTES}
        if value.shape != parts[attribute].shape:
            raise ParameterError(
                f"attribute {attribute}: shape {value.shape} != {parts[attribute].shape}"
            )
        parts[attribute] = value
        return LatentState(*(parts[a] for a in ATTRIBUTES))

    def to_doc(self) -> dict:
        return {f"z_{a}": [float(v) for v in self.get(a).data] for a in ATTRIBUTES}

    @classmethod
    def from_doc(cls, doc: dict, dtype=np.float32) -> "LatentState":
        missing = [f"z_{a}" for a in ATTRIBUTES if f"z_{a}" not in doc]
        if missing:
            raise ParameterError(f"latent document missing fields: {missing}")
        return cls(*(Tensor(np.asarray(doc[f"z_{a}"], dtype=dtype)) for a in ATTRIBUTES))

    @classmethod
    def zeros(cls, dims: dict[str, int], dtype=np.float32, requires_grad=False) -> "LatentState":
        return cls(*(
            Tensor(np.zeros(dims[a], dtype=dtype), requires_grad=requires_grad)
            for a in ATTRIBUTES
        ))


def interpolate(a: LatentState, b: LatentState, attribute: str, t: float,
                extrapolate: bool = False) -> LatentState:
    """Copy of ``a`` with one attribute linearly blended toward ``b``'s."""
    if attribute not in ATTRIBUTES:
        raise ParameterError(f"unknown attribute {attribute!r}, expected one of {ATTRIBUTES}")
    if not extrapolate and not 0.0 <= t <= 1.0:
        raise ParameterError(f"interpolation t={t} outside [0,1] (pass extrapolate=True to allow)")
    za, zb = a.get(attribute), b.get(attribute)
    if za.shape != zb.shape:
        raise ParameterError(f"attribute {attribute}: dims {za.shape} vs {zb.shape} differ")
    out = a.copy()
    blended = (1.0 - t) * za.data.astype(np.float64) + t * zb.data.astype(np.float64)
    return out.replace(attribute, Tensor(blended.astype(za.data.dtype)))


def transfer_expression(target: LatentState, source_seq: Sequence[LatentState]) -> list[LatentState]:
    """Target identity/albedo/illumination driven by the sources' expressions."""
    out = []
    for k, src in enumerate(source_seq):
        if src.z_exp.shape != target.z_exp.shape:
            raise ParameterError(
                f"source {k}: expression dim {src.z_exp.shape} != {target.z_exp.shape}"
            )
        state = target.copy()
        out.append(state.replace("exp", Tensor(src.z_exp.data.copy())))
    return out


class LatentRegistry:
    """Shared learnable codes keyed by the dataset's sharing rules."""

    def __init__(self, dims: dict[str, int], dtype=np.float32):
        self.dims = dict(dims)
        self.dtype = np.dtype(dtype)
        self.id_codes: dict[str, Tensor] = {}
        self.exp_codes: dict[tuple[str, str], Tensor] = {}
        self.alb_codes: dict[str, Tensor] = {}
        self.ill_codes: dict[str, Tensor] = {}
        self.initial: dict[str, np.ndarray] = {}

    # -- construction ------------------------------------------------------

    @classmethod
    def create(
        cls,
        frame_keys: Iterable[tuple[str, str, str]],
        dims: dict[str, int],
        dtype=np.float32,
        init_sigma: float = 0.1,
        init_seed: int = 0,
        init_file: str | None = None,
    ) -> "LatentRegistry":
        """One code per key derived from (subject, expression, lighting) frame tags.

        Codes start from a seeded gaussian of scale ``init_sigma`` unless
        ``init_file`` supplies explicit vectors (JSON name -> array).
        """
        reg = cls(dims, dtype)
        file_values = None
        if init_file is not None:
            with open(init_file) as fp:
                file_values = json.load(fp)
        rng = np.random.default_rng(init_seed)

        def make(name: str, dim: int) -> Tensor:
            if file_values is not None:
                if name not in file_values:
                    raise ManifestError(f"init file missing code {name!r}")
                arr = np.asarray(file_values[name], dtype=reg.dtype)
                if arr.shape != (dim,):
                    raise ManifestError(
                        f"init file code {name!r} has shape {arr.shape}, expected ({dim},)"
                    )
            else:
                arr = (rng.standard_normal(dim) * init_sigma).astype(reg.dtype)
            t = Tensor(arr, requires_grad=True)
            snapshot = arr.copy()
            snapshot.flags.writeable = False
            reg.initial[name] = snapshot
            return t

        # sorted traversal so seeded initialization is order independent
        keys = sorted(set(tuple(k) for k in frame_keys))
        for subject, expression, lighting in keys:
            if subject not in reg.id_codes:
                reg.id_codes[subject] = make(f"id/{subject}", dims["id"])
                reg.alb_codes[subject] = make(f"alb/{subject}", dims["alb"])
            if (subject, expression) not in reg.exp_codes:
                reg.exp_codes[(subject, expression)] = make(
                    f"exp/{subject}/{expression}", dims["exp"]
                )
            if lighting not in reg.ill_codes:
                reg.ill_codes[lighting] = make(f"ill/{lighting}", dims["ill"])
        return reg

    # -- access --------------------------------------------------------------

    def state_for(self, subject: str, expression: str, lighting: str) -> LatentState:
        """Shared tensors for one frame; gradients accumulate across frames."""
        try:
            return LatentState(
                z_id=self.id_codes[subject],
                z_exp=self.exp_codes[(subject, expression)],
                z_alb=self.alb_codes[subject],
                z_ill=self.ill_codes[lighting],
            )
        except KeyError as e:
            raise ParameterError(f"no registry entry for key {e}") from None

    def initial_state_for(self, subject: str, expression: str, lighting: str) -> dict[str, np.ndarray]:
        return {
            "id": self.initial[f"id/{subject}"],
            "exp": self.initial[f"exp/{subject}/{expression}"],
            "alb": self.initial[f"alb/{subject}"],
            "ill": self.initial[f"ill/{lighting}"],
        }

    def params(self) -> dict[str, Tensor]:
        out = {}
        for subject, t in self.id_codes.items():
            out[f"id/{subject}"] = t
        for (subject, expression), t in self.exp_codes.items():
            out[f"exp/{subject}/{expression}"] = t
        for subject, t in self.alb_codes.items():
            out[f"alb/{subject}"] = t
        for lighting, t in self.ill_codes.items():
            out[f"ill/{lighting}"] = t
        return out

    def keys(self) -> dict[str, list]:
        return {
            "id": sorted(self.id_codes),
            "exp": sorted(self.exp_codes),
            "alb": sorted(self.alb_codes),
            "ill": sorted(self.ill_codes),
        }

    # -- checkpoint support ----------------------------------------------------

    def export_tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for name, t in self.params().items():
            out[f"latent/{name}"] = t.data
            out[f"latent0/{name}"] = np.asarray(self.initial[name])
        return out

    @classmethod
    def from_tensors(cls, dims: dict[str, int], dtype, keys: dict,
                     tensors: dict[str, np.ndarray]) -> "LatentRegistry":
        reg = cls(dims, dtype)

        def restore(name: str) -> Tensor:
            t = Tensor(tensors[f"latent/{name}"].astype(reg.dtype), requires_grad=True)
            snap = tensors[f"latent0/{name}"].astype(reg.dtype)
            snap.flags.writeable = False
            reg.initial[name] = snap
            return t

        for subject in keys["id"]:
            reg.id_codes[subject] = restore(f"id/{subject}")
        for subject, expression in (tuple(k) for k in keys["exp"]):
            reg.exp_codes[(subject, expression)] = restore(f"exp/{subject}/{expression}")
        for subject in keys["alb"]:
            reg.alb_codes[subject] = restore(f"alb/{subject}")
        for lighting in keys["ill"]:
            reg.ill_codes[lighting] = restore(f"ill/{lighting}")
        return reg
