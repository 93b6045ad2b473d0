"""Adam with per-group learning rates (network vs latent codes)."""

from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .tensor import Tensor


class Adam:
    def __init__(self, groups: list[tuple[str, dict[str, Tensor], float]],
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.params: dict[str, Tensor] = {}
        self.lrs: dict[str, float] = {}
        self.group_names: dict[str, str] = {}
        for group_name, params, lr in groups:
            if lr < 0:
                raise ParameterError(f"group {group_name!r}: learning rate must be nonnegative")
            for name, p in params.items():
                if name in self.params:
                    raise ParameterError(f"duplicate parameter name {name!r}")
                self.params[name] = p
                self.lrs[name] = lr
                self.group_names[name] = group_name
        self.m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            if self.lrs[name] == 0.0:
                continue  # frozen group: leave bits untouched
            g = p.grad
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            p.data -= self.lrs[name] * update.astype(p.data.dtype)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def grad_norms(self) -> dict[str, float]:
        return {
            name: float(np.linalg.norm(p.grad)) if p.grad is not None else 0.0
            for name, p in self.params.items()
        }

    # checkpoint support: moment buffers plus the step counter

    def export_tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for name in self.params:
            out[f"adam_m/{name}"] = self.m[name]
            out[f"adam_v/{name}"] = self.v[name]
        return out

    def load_tensors(self, tensors: dict[str, np.ndarray], t: int) -> None:
        self.t = int(t)
        for name, p in self.params.items():
            m = tensors[f"adam_m/{name}"]
            v = tensors[f"adam_v/{name}"]
            if m.shape != p.data.shape or v.shape != p.data.shape:
                raise ParameterError(f"optimizer state shape mismatch for {name!r}")
            self.m[name] = m.astype(p.data.dtype)
            self.v[name] = v.astype(p.data.dtype)
