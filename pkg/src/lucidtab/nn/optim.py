"""Parameter update rules: plain SGD, RMSprop, and Adam.

Default constants: Adam beta1=0.9, beta2=0.999, eps=1e-8, lr=0.001;
RMSprop rho=0.9, eps=1e-8, lr=0.001; SGD lr=0.01.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import StageError

KINDS = ("sgd", "adam", "rmsprop")
DEFAULT_LR = {"sgd": 0.01, "adam": 0.001, "rmsprop": 0.001}


@dataclass
class Optimizer:
    """Holds per-parameter accumulators; `step` updates parameters in place."""

    kind: str
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    rho: float = 0.9
    t: int = 0
    _m: list[np.ndarray] = field(default_factory=list)
    _v: list[np.ndarray] = field(default_factory=list)

    def _ensure_slots(self, params: list[np.ndarray]) -> None:
        if not self._m:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        if len(self._m) != len(params):
            raise StageError("optimizer state does not match parameter list")

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if len(params) != len(grads):
            raise StageError("params/grads length mismatch")
        self._ensure_slots(params)
        self.t += 1
        if self.kind == "sgd":
            for p, g in zip(params, grads):
                p -= self.lr * g
        elif self.kind == "rmsprop":
            for p, g, v in zip(params, grads, self._v):
                v *= self.rho
                v += (1.0 - self.rho) * g * g
                p -= self.lr * g / np.sqrt(v + self.eps)
        elif self.kind == "adam":
            bc1 = 1.0 - self.beta1**self.t
            bc2 = 1.0 - self.beta2**self.t
            for p, g, m, v in zip(params, grads, self._m, self._v):
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * g * g
                p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        else:
            raise StageError(f"unknown optimizer kind {self.kind!r}")


def make_optimizer(kind: str, lr: float | None = None) -> Optimizer:
    if kind not in KINDS:
        raise StageError(f"unknown optimizer {kind!r}; pick one of {KINDS}")
    return Optimizer(kind=kind, lr=DEFAULT_LR[kind] if lr is None else lr)
