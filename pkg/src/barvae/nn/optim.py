"""Adam optimizer and gradient clipping over named parameter dicts."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class NonFiniteGradient(Exception):
    """A gradient contained NaN or Inf; the update was not applied."""


def clip_global_norm(params: dict[str, Tensor], max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most max_norm.

    Returns the pre-clip norm so the caller can log it. Accumulation runs in
    sorted name order so the norm does not depend on dict insertion order.
    """
    total = 0.0
    for name in sorted(params):
        p = params[name]
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= factor
    return norm


class Adam:
    """Standard Adam with bias correction, state keyed by parameter name."""

    def __init__(self, params: dict[str, Tensor], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, lr: float) -> None:
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradient(f"non-finite gradient for {name!r} at step {t}")
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Flatten optimizer state for checkpointing."""
        out: dict[str, np.ndarray] = {"opt/step": np.asarray([self.step_count], dtype=np.int64)}
        for name in self.params:
            out[f"opt/m/{name}"] = self.m[name]
            out[f"opt/v/{name}"] = self.v[name]
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        self.step_count = int(arrays["opt/step"][0])
        for name in self.params:
            self.m[name] = arrays[f"opt/m/{name}"].copy()
            self.v[name] = arrays[f"opt/v/{name}"].copy()
