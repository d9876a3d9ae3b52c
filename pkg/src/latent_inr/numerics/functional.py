"""Fused losses and layout primitives with hand-written backward rules."""

from __future__ import annotations

import numpy as np

from .tensor import DimensionError, Tensor


class DegenerateVectorError(ValueError):
    """A vector norm is too small for a cosine to be meaningful."""


def mse_loss(pred: Tensor, target) -> Tensor:
    """Mean of squared elementwise differences."""
    target_data = target.data if isinstance(target, Tensor) else np.asarray(target, pred.dtype)
    if pred.shape != target_data.shape:
        raise DimensionError(f"mse_loss: {pred.shape} vs {target_data.shape}")
    diff = pred.data - target_data
    n = diff.size
    targ = target if isinstance(target, Tensor) else None

    def backward(g):
        gd = (2.0 / n) * g * diff
        pred._accumulate(gd)
        if targ is not None:
            targ._accumulate(-gd)

    return Tensor._make(np.asarray(np.mean(diff * diff)), (pred, target), "mse", backward)


def cosine_similarity(a: Tensor, b, eps: float = 1e-8) -> Tensor:
    b_t = b if isinstance(b, Tensor) else Tensor(np.asarray(b, a.dtype))
    if a.ndim != 1 or a.shape != b_t.shape:
        raise DimensionError(f"cosine_similarity expects equal-length vectors, got {a.shape}, {b_t.shape}")
    na = float(np.linalg.norm(a.data))
    nb = float(np.linalg.norm(b_t.data))
    if na <= eps or nb <= eps:
        raise DegenerateVectorError(f"vector norm below {eps}: |a|={na:g}, |b|={nb:g}")
    dot = float(a.data @ b_t.data)
    cos = dot / (na * nb)

    def backward(g):
        # d cos / d a = b/(|a||b|) - cos * a/|a|^2
        if a.requires_grad:
            a._accumulate(g * (b_t.data / (na * nb) - cos * a.data / (na * na)))
        if b_t.requires_grad:
            b_t._accumulate(g * (a.data / (na * nb) - cos * b_t.data / (nb * nb)))

    value = np.asarray(min(1.0, max(-1.0, cos)), dtype=a.dtype)
    return Tensor._make(value, (a, b_t), "cosine", backward)


def _shuffle(x: np.ndarray, s: int) -> np.ndarray:
    c2, h, w = x.shape
    c = c2 // (s * s)
    return x.reshape(c, s, s, h, w).transpose(0, 3, 1, 4, 2).reshape(c, h * s, w * s)


def _unshuffle(x: np.ndarray, s: int) -> np.ndarray:
    c, hs, ws = x.shape
    h, w = hs // s, ws // s
    return x.reshape(c, h, s, w, s).transpose(0, 2, 4, 1, 3).reshape(c * s * s, h, w)


def pixel_shuffle(x: Tensor, s: int) -> Tensor:
    """Rearrange ``[C*s*s, h, w]`` into ``[C, h*s, w*s]``.

    ``out[c, y*s + i, x*s + j] = in[c*s*s + i*s + j, y, x]``.
    """
    if x.ndim != 3:
        raise DimensionError(f"pixel_shuffle expects [C, h, w], got {x.shape}")
    if s < 1 or x.shape[0] % (s * s):
        raise DimensionError(f"{x.shape[0]} channels not divisible by {s}^2")

    def backward(g):
        x._accumulate(_unshuffle(g, s))

    return Tensor._make(_shuffle(x.data, s), (x,), "pixel_shuffle", backward)


def pixel_unshuffle(x: Tensor, s: int) -> Tensor:
    if x.ndim != 3:
        raise DimensionError(f"pixel_unshuffle expects [C, H, W], got {x.shape}")
    if s < 1 or x.shape[1] % s or x.shape[2] % s:
        raise DimensionError(f"spatial dims {x.shape[1:]} not divisible by {s}")

    def backward(g):
        x._accumulate(_shuffle(g, s))

    return Tensor._make(_unshuffle(x.data, s), (x,), "pixel_unshuffle", backward)
