"""Positional encodings for 2-D coordinates in [0, 1]^2.

Coordinates are ``(x, y)`` with x horizontal.  Time never enters here; the
per-frame latent carries it.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .numerics import Tensor

COORD_TOL = 1e-9
PRIME_Y = 2654435761


class CoordinateRangeError(ValueError):
    pass


@dataclass
class HashGridConfig:
    levels: int = 8
    log2_table_size: int = 14
    features: int = 2
    base_resolution: int = 16
    max_resolution: int = 0  # 0: half the larger frame dimension
    init_scale: float = 1e-4

    @property
    def table_size(self) -> int:
        return 1 << self.log2_table_size

    def resolved(self, height: int, width: int) -> "HashGridConfig":
        """Fill the frame-dependent default for ``max_resolution``."""
        if self.max_resolution > 0:
            return self
        n_max = max(height, width) // 2
        return HashGridConfig(
            levels=self.levels,
            log2_table_size=self.log2_table_size,
            features=self.features,
            base_resolution=min(self.base_resolution, max(n_max, 1)),
            max_resolution=max(n_max, 1),
            init_scale=self.init_scale,
        )

    def validate(self) -> None:
        if self.levels < 1:
            raise ValueError("hash grid needs at least one level")
        if not 1 <= self.log2_table_size <= 30:
            raise ValueError("log2_table_size must lie in [1, 30]")
        if self.features < 1:
            raise ValueError("features per entry must be >= 1")
        if self.base_resolution < 1:
            raise ValueError("base_resolution must be >= 1")
        if self.max_resolution and self.max_resolution < self.base_resolution:
            raise ValueError("max_resolution must be >= base_resolution")

    def growth_factor(self) -> float:
        if self.levels == 1:
            return 1.0
        return math.exp((math.log(self.max_resolution) - math.log(self.base_resolution)) / (self.levels - 1))

    def level_resolutions(self) -> list[int]:
        b = self.growth_factor()
        # tiny epsilon guards floor() against exp/log round-off at exact powers
        return [int(math.floor(self.base_resolution * b**lvl + 1e-9)) for lvl in range(self.levels)]

    def to_dict(self) -> dict:
        return asdict(self)


def level_is_dense(resolution: int, table_size: int) -> bool:
    return (resolution + 1) ** 2 <= table_size


def hash_index(level: int, cell: tuple[int, int], config: HashGridConfig) -> int:
    """Table row for integer vertex ``cell = (x, y)`` at ``level``.

    Dense levels use the row-major vertex index; the rest hash with
    ``(x * 1) XOR (y * 2654435761) mod T``.
    """
    if not 0 <= level < config.levels:
        raise IndexError(f"level {level} outside [0, {config.levels})")
    res = config.level_resolutions()[level]
    x, y = int(cell[0]), int(cell[1])
    if level_is_dense(res, config.table_size):
        return y * (res + 1) + x
    return ((x ^ (y * PRIME_Y)) & 0xFFFFFFFFFFFFFFFF) % config.table_size


class HashGrid:
    """Multiresolution trainable lookup tables.

    All levels live in one ``[rows, F]`` parameter; dense levels only
    allocate the ``(res + 1)^2`` rows they can address.
    """

    def __init__(self, config: HashGridConfig, rng: np.random.Generator | None = None, dtype=np.float64):
        config.validate()
        if config.max_resolution < 1:
            raise ValueError("resolve max_resolution against the frame size first")
        self.config = config
        self.resolutions = np.array(config.level_resolutions(), dtype=np.int64)
        self.dense = np.array([level_is_dense(int(r), config.table_size) for r in self.resolutions], dtype=np.uint8)
        self.sizes = np.array(
            [(int(r) + 1) ** 2 if d else config.table_size for r, d in zip(self.resolutions, self.dense)],
            dtype=np.int64,
        )
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)[:-1]]).astype(np.int64)
        n_rows = int(self.sizes.sum())
        rng = rng if rng is not None else np.random.default_rng(0)
        init = rng.uniform(-config.init_scale, config.init_scale, size=(n_rows, config.features))
        self.tables = Tensor(init.astype(dtype), requires_grad=True)

    @property
    def out_dim(self) -> int:
        return self.config.levels * self.config.features

    def table(self, level: int) -> np.ndarray:
        start = int(self.offsets[level])
        return self.tables.data[start:start + int(self.sizes[level])]

    def parameters(self) -> dict:
        return {"tables": self.tables}

    def __call__(self, coords) -> Tensor:
        return hashgrid_encode(coords, self)


def _checked_coords(coords) -> np.ndarray:
    c = coords.data if isinstance(coords, Tensor) else np.asarray(coords, dtype=np.float64)
    if c.ndim != 2 or c.shape[1] != 2:
        raise ValueError(f"coordinates must be [B, 2], got {c.shape}")
    if c.size and (c.min() < -COORD_TOL or c.max() > 1 + COORD_TOL):
        raise CoordinateRangeError(f"coordinates outside [0,1]: [{c.min()}, {c.max()}]")
    return np.clip(c, 0.0, 1.0).astype(np.float64)


def hashgrid_encode(coords, grid: HashGrid) -> Tensor:
    c = _checked_coords(coords)
    table = grid.tables
    out, idx, w = kernels.hashgrid_forward(
        c, np.ascontiguousarray(table.data), grid.offsets, grid.resolutions, grid.sizes, grid.dense
    )
    n_rows = table.shape[0]

    def backward(g):
        g = np.ascontiguousarray(g, dtype=table.dtype)
        table._accumulate(kernels.hashgrid_backward(g, idx, w, n_rows))

    return Tensor._make(out, (table,), "hashgrid", backward)


@dataclass
class FourierConfig:
    bands: int = 8

    @property
    def out_dim(self) -> int:
        return 4 * self.bands

    def frequencies(self) -> np.ndarray:
        return np.pi * 2.0 ** np.arange(self.bands)

    def to_dict(self) -> dict:
        return asdict(self)


def fourier_encode(coords, config: FourierConfig, dtype=np.float64) -> Tensor:
    """``[sin(f x), cos(f x), sin(f y), cos(f y)]`` for each band f = pi * 2^k."""
    c = _checked_coords(coords)
    freqs = config.frequencies()
    ax = c[:, 0:1] * freqs
    ay = c[:, 1:2] * freqs
    feats = np.stack([np.sin(ax), np.cos(ax), np.sin(ay), np.cos(ay)], axis=2)  # [B, K, 4]
    return Tensor(feats.reshape(len(c), -1).astype(dtype))


class FourierEncoding:
    def __init__(self, config: FourierConfig, dtype=np.float64):
        if config.bands < 1:
            raise ValueError("need at least one Fourier band")
        self.config = config
        self.dtype = dtype

    @property
    def out_dim(self) -> int:
        return self.config.out_dim

    def parameters(self) -> dict:
        return {}

    def __call__(self, coords) -> Tensor:
        return fourier_encode(coords, self.config, self.dtype)


def pixel_lattice(height: int, width: int) -> np.ndarray:
    """Pixel-centre coordinates ``((j+0.5)/W, (i+0.5)/H)`` in row-major order."""
    ys = (np.arange(height) + 0.5) / height
    xs = (np.arange(width) + 0.5) / width
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1)
