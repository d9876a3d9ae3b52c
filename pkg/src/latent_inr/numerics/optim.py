"""Adam with bias correction and no weight decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import DimensionError, Tensor


@dataclass
class AdamState:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params: list, grads: list, state: AdamState) -> list:
    """Apply one Adam update in place and return ``params``.

    ``params`` and ``grads`` are parallel lists of arrays.  Moments are
    allocated lazily on the first call.
    """
    if len(params) != len(grads):
        raise DimensionError("params and grads differ in length")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(state.m) != len(params):
        raise DimensionError("optimizer state does not match parameter list")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise DimensionError(f"shape mismatch in adam_step: {p.shape} vs {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


class Adam:
    def __init__(self, params, lr: float = 5e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params: list[Tensor] = list(params)
        self.state = AdamState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        adam_step([p.data for p in self.params], [p.grad for p in self.params], self.state)
