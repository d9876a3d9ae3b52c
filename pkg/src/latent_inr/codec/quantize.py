"""Per-tensor affine min-max quantisation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_BITS, MAX_BITS = 4, 16


class QuantizationError(ValueError):
    pass


@dataclass
class QuantizedTensor:
    codes: np.ndarray  # uint32, flattened
    phi_min: float
    phi_max: float
    scale: float  # 0.0 flags a constant tensor
    shape: tuple
    bits: int

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)

    @property
    def n(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))


def _round(value: float, storage, direction: float) -> float:
    """Nearest ``storage`` value on the ``direction`` side of ``value``."""
    value = float(value)
    r = storage(value)
    if (direction < 0 and float(r) > value) or (direction > 0 and float(r) < value):
        r = np.nextafter(r, storage(direction))
    return float(r)


def quantize(phi, bits: int = 8, storage=np.float32, like: QuantizedTensor | None = None) -> QuantizedTensor:
    """Codes ``clamp(round((phi - min) / scale), 0, 2^b - 1)`` with ``scale = (max - min) / 2^b``.

    ``min``, ``max`` and ``scale`` are rounded outward to ``storage``
    precision before use, so dequantising from the stored header reproduces
    exactly the values this object dequantises to, and the error per
    element stays within one ``scale``.

    Passing ``like`` reuses that tensor's grid (min, max, scale, bits)
    instead of deriving one from ``phi``; re-quantising a dequantised
    tensor on its own grid returns the original codes.
    """
    if like is not None:
        phi = np.asarray(phi, dtype=np.float64)
        if phi.shape != like.shape:
            raise QuantizationError(f"shape {phi.shape} does not match grid shape {like.shape}")
        if like.scale == 0.0:
            codes = np.zeros(phi.size, dtype=np.uint32)
        else:
            codes = np.clip(np.rint((phi.ravel() - like.phi_min) / like.scale), 0, 2**like.bits - 1).astype(np.uint32)
        return QuantizedTensor(codes, like.phi_min, like.phi_max, like.scale, like.shape, like.bits)
    if not MIN_BITS <= bits <= MAX_BITS:
        raise QuantizationError(f"bit width {bits} outside [{MIN_BITS}, {MAX_BITS}]")
    phi = np.asarray(phi, dtype=np.float64)
    if not np.all(np.isfinite(phi)):
        raise QuantizationError("cannot quantise non-finite values")
    if phi.size == 0:
        raise QuantizationError("cannot quantise an empty tensor")
    # widen outward when rounding to storage precision so the grid still
    # covers every value; otherwise a large offset with a tiny range could
    # place values more than a step outside it
    lo = _round(phi.min(), storage, -np.inf)
    hi = _round(phi.max(), storage, np.inf)
    if lo == hi:
        return QuantizedTensor(np.zeros(phi.size, dtype=np.uint32), lo, hi, 0.0, phi.shape, bits)
    scale = _round((hi - lo) / 2**bits, storage, np.inf)
    codes = np.rint((phi.ravel() - lo) / scale)
    codes = np.clip(codes, 0, 2**bits - 1).astype(np.uint32)
    return QuantizedTensor(codes, lo, hi, scale, phi.shape, bits)


def dequantize(q: QuantizedTensor) -> np.ndarray:
    if q.codes.size != q.n:
        raise QuantizationError(f"{q.codes.size} codes for shape {q.shape}")
    if q.codes.size and int(q.codes.max()) > 2**q.bits - 1:
        raise QuantizationError("code exceeds the bit width")
    return (q.codes.astype(np.float64) * q.scale + q.phi_min).reshape(q.shape)
