"""Latent-modulated coordinate network.

A per-frame latent ``z_t`` feeds one small tanh MLP per modulated layer.
Each MLP emits low-rank factors ``P [N, r]`` and ``Q [M, r]`` and the layer
weight for frame t becomes ``act(P @ Q.T) * theta`` (elementwise).  Every
other layer, the positional encoding and the output head are shared by all
frames.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .encoding import FourierConfig, FourierEncoding, HashGrid, HashGridConfig, pixel_lattice
from .numerics import Tensor, matmul, no_grad, pixel_shuffle
from .numerics.functional import _unshuffle

PATCH_SIZES = (1, 2, 4, 8, 16, 32)
MODULATIONS = ("sigmoid", "tanh", "identity")
RANK_PRESETS = {"S": 50, "M": 100, "L": 200}


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    latent_dim: int = 512
    depth: int = 6
    width: int = 512
    modulated_layers: list = field(default_factory=lambda: [1])
    rank: int = 20
    hyper_hidden: list = field(default_factory=lambda: [128])
    encoding: str = "hashgrid"
    hashgrid: HashGridConfig = field(default_factory=HashGridConfig)
    fourier: FourierConfig = field(default_factory=FourierConfig)
    output: str = "pixel"
    patch_size: int = 1
    out_channels: int = 3
    modulation: str = "sigmoid"
    latent_init_std: float = 0.01
    dtype: str = "float64"

    @classmethod
    def preset(cls, name: str, **overrides) -> "ModelConfig":
        """``main`` (6 x 512, hypernet hidden 128) or ``appendix`` (10 x 512, hypernet 2 x 512 hidden)."""
        if name == "main":
            base = cls()
        elif name == "appendix":
            base = cls(depth=10, hyper_hidden=[512, 512])
        else:
            raise ConfigError(f"unknown preset {name!r}")
        return replace(base, **overrides)

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    @property
    def patch(self) -> int:
        return self.patch_size if self.output == "patch" else 1

    def encoding_dim(self) -> int:
        if self.encoding == "hashgrid":
            return self.hashgrid.levels * self.hashgrid.features
        return self.fourier.out_dim

    def layer_shape(self, index: int) -> tuple[int, int]:
        """(fan_in, fan_out) of hidden layer ``index``."""
        return (self.encoding_dim() if index == 0 else self.width, self.width)

    def validate(self) -> None:
        if self.latent_dim < 1 or self.width < 1 or self.depth < 1:
            raise ConfigError("latent_dim, width and depth must be positive")
        if self.encoding not in ("hashgrid", "fourier"):
            raise ConfigError(f"unknown encoding {self.encoding!r}")
        if self.output not in ("pixel", "patch"):
            raise ConfigError(f"unknown output mode {self.output!r}")
        if self.patch_size not in PATCH_SIZES:
            raise ConfigError(f"patch size must be one of {PATCH_SIZES}")
        if self.modulation not in MODULATIONS:
            raise ConfigError(f"modulation must be one of {MODULATIONS}")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError("dtype must be float64 or float32")
        if self.rank < 1:
            raise ConfigError("rank must be >= 1")
        if len(set(self.modulated_layers)) != len(self.modulated_layers):
            raise ConfigError("duplicate modulated layer")
        for layer in self.modulated_layers:
            if not 0 <= layer < self.depth:
                raise ConfigError(f"modulated layer {layer} outside [0, {self.depth})")
            n, m = self.layer_shape(layer)
            if self.rank > min(n, m) / 2:
                raise ConfigError(f"rank {self.rank} exceeds min({n}, {m})/2 for layer {layer}")
        if any(h < 1 for h in self.hyper_hidden):
            raise ConfigError("hypernetwork hidden sizes must be positive")
        if self.latent_init_std < 0:
            raise ConfigError("latent_init_std must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        if "hashgrid" in d:
            d["hashgrid"] = _strict(HashGridConfig, d["hashgrid"])
        if "fourier" in d:
            d["fourier"] = _strict(FourierConfig, d["fourier"])
        return cls(**d)


def _strict(cls, d):
    if isinstance(d, cls):
        return d
    unknown = set(d) - set(cls.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**d)


def _uniform(rng: np.random.Generator, fan_in: int, shape, dtype) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def _activation(x: Tensor, kind: str) -> Tensor:
    if kind == "sigmoid":
        return x.sigmoid()
    if kind == "tanh":
        return x.tanh()
    return x


class HyperNetwork:
    """tanh MLP mapping a latent to flattened ``[P, Q]`` factors (P first, row-major)."""

    def __init__(self, latent_dim: int, hidden: list, n: int, m: int, rank: int, rng, dtype):
        self.n, self.m, self.rank = n, m, rank
        sizes = [latent_dim, *hidden]
        self.weights, self.biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            self.weights.append(Tensor(_uniform(rng, fan_in, (fan_in, fan_out), dtype), requires_grad=True))
            self.biases.append(Tensor(_uniform(rng, fan_in, (fan_out,), dtype), requires_grad=True))
        # zero output weights: the mask starts frame-independent; the random
        # bias keeps P, Q off the P = Q = 0 saddle where their gradients vanish
        out_dim = (n + m) * rank
        self.weights.append(Tensor(np.zeros((sizes[-1], out_dim), dtype=dtype), requires_grad=True))
        self.biases.append(Tensor(_uniform(rng, sizes[-1], (out_dim,), dtype), requires_grad=True))

    @property
    def out_dim(self) -> int:
        return (self.n + self.m) * self.rank

    def parameters(self) -> dict:
        params = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            params[f"{i}.weight"] = w
            params[f"{i}.bias"] = b
        return params

    def __call__(self, z: Tensor) -> tuple[Tensor, Tensor]:
        if z.ndim != 1 or z.shape[0] != self.weights[0].shape[0]:
            raise ValueError(f"latent must have length {self.weights[0].shape[0]}, got shape {z.shape}")
        h = z.reshape(1, -1)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = matmul(h, w) + b
            if i < last:
                h = h.tanh()
        split = self.n * self.rank
        p = h[0, :split].reshape(self.n, self.rank)
        q = h[0, split:].reshape(self.m, self.rank)
        return p, q


def modulate(theta: Tensor, p: Tensor, q: Tensor, modulation: str = "sigmoid") -> Tensor:
    """Frame weight ``act(P @ Q.T) * theta``; ``theta`` itself is untouched."""
    if p.shape[0] != theta.shape[0] or q.shape[0] != theta.shape[1] or p.shape[1] != q.shape[1]:
        raise ValueError(f"factor shapes {p.shape}, {q.shape} do not match weight {theta.shape}")
    return _activation(matmul(p, q.T), modulation) * theta


class LatentINR:
    """Latent dictionary, shared base network and per-layer hypernetworks."""

    def __init__(self, config: ModelConfig, n_frames: int, height: int, width: int, seed: int = 0):
        if config.encoding == "hashgrid":
            config = replace(config, hashgrid=config.hashgrid.resolved(height, width))
        config.validate()
        if n_frames < 1 or height < 1 or width < 1:
            raise ConfigError("frame count and dimensions must be positive")
        self.config = config
        self.n_frames, self.height, self.width = n_frames, height, width
        self.seed = seed
        dtype = config.np_dtype
        rng = np.random.default_rng(seed)

        self.latents = Tensor(
            (rng.standard_normal((n_frames, config.latent_dim)) * config.latent_init_std).astype(dtype),
            requires_grad=True,
        )
        if config.encoding == "hashgrid":
            self.encoder = HashGrid(config.hashgrid, rng, dtype)
        else:
            self.encoder = FourierEncoding(config.fourier, dtype)

        self.base_weights, self.base_biases = [], []
        for i in range(config.depth):
            fan_in, fan_out = config.layer_shape(i)
            self.base_weights.append(Tensor(_uniform(rng, fan_in, (fan_in, fan_out), dtype), requires_grad=True))
            self.base_biases.append(Tensor(_uniform(rng, fan_in, (fan_out,), dtype), requires_grad=True))
        head_out = config.out_channels * config.patch**2
        self.head_weight = Tensor(_uniform(rng, config.width, (config.width, head_out), dtype), requires_grad=True)
        self.head_bias = Tensor(_uniform(rng, config.width, (head_out,), dtype), requires_grad=True)

        self.hypernets = {}
        for layer in sorted(config.modulated_layers):
            n, m = config.layer_shape(layer)
            self.hypernets[layer] = HyperNetwork(config.latent_dim, config.hyper_hidden, n, m, config.rank, rng, dtype)
        self.projection: Tensor | None = None
        # quantisation grids carried over from a decoded bitstream
        self.quant_records: dict = {}
        # stride used to hold frames out during training (0: none)
        self.holdout_alpha = 0

    # -- parameters ---------------------------------------------------------

    def add_projection(self, embed_dim: int, seed: int | None = None) -> None:
        """Attach a trainable linear map from latent space to an embedding space."""
        d = self.config.latent_dim
        if embed_dim == d:
            self.projection = None
            return
        rng = np.random.default_rng(self.seed + 7919 if seed is None else seed)
        self.projection = Tensor(_uniform(rng, d, (d, embed_dim), self.config.np_dtype), requires_grad=True)

    def named_parameters(self) -> dict:
        params = {"latents": self.latents}
        for name, p in self.encoder.parameters().items():
            params[f"encoding.{name}"] = p
        for i, (w, b) in enumerate(zip(self.base_weights, self.base_biases)):
            params[f"base.{i}.weight"] = w
            params[f"base.{i}.bias"] = b
        params["head.weight"] = self.head_weight
        params["head.bias"] = self.head_bias
        for layer, net in self.hypernets.items():
            for name, p in net.parameters().items():
                params[f"hyper.{layer}.{name}"] = p
        if self.projection is not None:
            params["projection.weight"] = self.projection
        return params

    def parameters(self) -> list:
        return list(self.named_parameters().values())

    # -- forward ------------------------------------------------------------

    def frame_latent(self, t: int) -> Tensor:
        if not 0 <= t < self.n_frames:
            raise IndexError(f"frame {t} outside [0, {self.n_frames})")
        return self.latents[t]

    def hyper_forward(self, z: Tensor, layer: int) -> tuple[Tensor, Tensor]:
        if layer not in self.hypernets:
            raise KeyError(f"layer {layer} is not modulated")
        return self.hypernets[layer](z)

    def frame_weights(self, z: Tensor) -> list:
        weights = []
        for i, theta in enumerate(self.base_weights):
            if i in self.hypernets:
                p, q = self.hypernets[i](z)
                theta = modulate(theta, p, q, self.config.modulation)
            weights.append(theta)
        return weights

    def forward(self, coords, z: Tensor, weights: list | None = None) -> Tensor:
        """Raw network output ``[B, C * s * s]`` at ``coords`` for latent ``z``."""
        h = self.encoder(coords)
        if weights is None:
            weights = self.frame_weights(z)
        for w, b in zip(weights, self.base_biases):
            h = (matmul(h, w) + b).relu()
        return matmul(h, self.head_weight) + self.head_bias

    def project(self, z: Tensor) -> Tensor:
        if self.projection is None:
            return z
        return matmul(z.reshape(1, -1), self.projection).reshape(-1)

    # -- sampling lattices ----------------------------------------------------

    def lattice(self, height: int, width: int) -> np.ndarray:
        """Network input coordinates for a frame of the given size."""
        s = self.config.patch
        if height % s or width % s:
            raise ValueError(f"frame {height}x{width} not divisible by patch size {s}")
        return pixel_lattice(height // s, width // s)

    def targets(self, frame: np.ndarray) -> np.ndarray:
        """Rearrange an ``[H, W, C]`` frame into per-sample rows ``[n, C * s * s]``."""
        s = self.config.patch
        chw = np.ascontiguousarray(np.transpose(frame, (2, 0, 1)))
        packed = _unshuffle(chw, s)  # [C s s, h, w]
        return packed.reshape(packed.shape[0], -1).T.astype(self.config.np_dtype)

    # -- decoding -------------------------------------------------------------

    def decode_latent(self, z, height: int | None = None, width: int | None = None, chunk: int = 16384) -> np.ndarray:
        height = self.height if height is None else height
        width = self.width if width is None else width
        if height < 1 or width < 1:
            raise ValueError("output resolution must be at least 1x1")
        if self.config.patch > 1:
            return decode_patch(self, z, height, width, chunk)
        return decode_frame(self, z, (height, width), chunk)

    def decode(self, t: int, height: int | None = None, width: int | None = None) -> np.ndarray:
        return self.decode_latent(self.frame_latent(t).data, height, width)


def _evaluate(model: LatentINR, z, coords: np.ndarray, chunk: int) -> np.ndarray:
    z = z if isinstance(z, Tensor) else Tensor(np.asarray(z, dtype=model.config.np_dtype))
    with no_grad():
        weights = model.frame_weights(z)
        parts = [model.forward(coords[i:i + chunk], z, weights).data for i in range(0, len(coords), chunk)]
    return np.concatenate(parts, axis=0)


def decode_frame(model: LatentINR, z, resolution: tuple[int, int], chunk: int = 16384) -> np.ndarray:
    """Render ``[H, W, C]`` in [0, 1] on the pixel-centre lattice of ``resolution``."""
    if model.config.patch > 1:
        return decode_patch(model, z, resolution[0], resolution[1], chunk)
    h, w = resolution
    if h < 1 or w < 1:
        raise ValueError("output resolution must be at least 1x1")
    out = _evaluate(model, z, pixel_lattice(h, w), chunk)
    return np.clip(out.reshape(h, w, -1), 0.0, 1.0)


def decode_patch(model: LatentINR, z, height: int, width: int, chunk: int = 16384) -> np.ndarray:
    """Evaluate at patch centroids and tile ``s x s`` patches via pixel shuffle."""
    s = model.config.patch
    if height % s or width % s:
        raise ValueError(f"frame {height}x{width} not divisible by patch size {s}")
    h, w = height // s, width // s
    out = _evaluate(model, z, pixel_lattice(h, w), chunk)  # [h*w, C s s]
    grid = Tensor(np.ascontiguousarray(out.T.reshape(-1, h, w)))
    frame = pixel_shuffle(grid, s).data  # [C, H, W]
    return np.clip(np.transpose(frame, (1, 2, 0)), 0.0, 1.0)


def init_model(config: ModelConfig, n_frames: int, height: int, width: int, seed: int = 0) -> LatentINR:
    return LatentINR(config, n_frames, height, width, seed)
