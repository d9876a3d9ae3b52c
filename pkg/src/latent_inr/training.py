"""End-to-end fitting of latents, hypernetworks, base network and encoding."""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import ConfigError, LatentINR
from .numerics import Adam, Tensor, cosine_similarity, mse_loss

log = logging.getLogger(__name__)


class TrainingDivergedError(FloatingPointError):
    """Loss became non-finite; carries a diagnostic snapshot."""

    def __init__(self, step: int, lr: float, param_norms: dict):
        self.step, self.lr, self.param_norms = step, lr, param_norms
        worst = sorted(param_norms.items(), key=lambda kv: -kv[1])[:3]
        super().__init__(f"non-finite loss at step {step} (lr={lr:g}); largest parameter norms: {worst}")


class MissingEmbeddingError(KeyError):
    pass


@dataclass
class TrainConfig:
    steps: int = 2000
    batch_size: int = 0  # 0: every sample point of the frame
    frames_per_step: int = 1
    lr: float = 5e-4
    betas: list = field(default_factory=lambda: [0.9, 0.999])
    eps: float = 1e-8
    align_lambda: float = 0.01
    holdout_alpha: int = 0  # 0: no holdout
    seed: int = 0
    eval_every: int = 0  # 0: max(steps // 100, 50)
    deterministic: bool = True

    def validate(self) -> None:
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if self.batch_size < 0 or self.frames_per_step < 1:
            raise ConfigError("batch_size must be >= 0 and frames_per_step >= 1")
        if self.align_lambda < 0:
            raise ConfigError("alignment weight must be >= 0")
        if self.holdout_alpha and self.holdout_alpha < 2:
            raise ConfigError("holdout stride must be >= 2")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AlignmentTarget:
    """Per-frame target vectors ``[n_frames, E]`` and their weight.

    When ``E`` differs from the latent size the model must carry a
    projection (``LatentINR.add_projection``).
    """

    vectors: np.ndarray
    weight: float = 0.01

    def row(self, t: int) -> np.ndarray:
        if not 0 <= t < len(self.vectors):
            raise MissingEmbeddingError(f"no alignment vector for frame {t}")
        return self.vectors[t]


@dataclass
class History:
    steps: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    eval_steps: list = field(default_factory=list)
    psnrs: list = field(default_factory=list)

    def to_csv(self, path) -> None:
        psnr_at = dict(zip(self.eval_steps, self.psnrs))
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "loss", "psnr"])
            for step, loss in zip(self.steps, self.losses):
                p = psnr_at.get(step)
                writer.writerow([step, repr(loss), "" if p is None else repr(p)])


def holdout_frames(n_frames: int, alpha: int) -> tuple[list, list]:
    """Every ``alpha``-th frame trains; the rest are held out."""
    if alpha < 2:
        raise ValueError(f"holdout stride must be >= 2, got {alpha}")
    train = [t for t in range(n_frames) if t % alpha == 0]
    held = [t for t in range(n_frames) if t % alpha]
    return train, held


def total_loss(pred: Tensor, target, z: Tensor, align: AlignmentTarget | None = None, t: int = 0,
               model: LatentINR | None = None) -> Tensor:
    """Reconstruction MSE plus ``weight * (1 - cos(proj(z), e_t))``."""
    loss = mse_loss(pred, target)
    if align is None or align.weight == 0:
        return loss
    e = align.row(t)
    projected = model.project(z) if model is not None else z
    if projected.shape[0] != len(e):
        raise ValueError(f"projected latent has {projected.shape[0]} dims, target has {len(e)}")
    return loss + (1.0 - cosine_similarity(projected, e)).scale(align.weight)


def _psnr(a: np.ndarray, b: np.ndarray) -> float:
    mse = float(np.mean((a - b) ** 2))
    return float("inf") if mse == 0 else -10.0 * np.log10(mse)


def fit(model: LatentINR, frames: np.ndarray, config: TrainConfig, align: AlignmentTarget | None = None,
        callback=None) -> History:
    """Optimise every trainable group of ``model`` on ``frames [N, H, W, C]`` in [0, 1].

    Each step samples ``frames_per_step`` training frames and, when
    ``batch_size`` is set, a random subset of their sample points.
    """
    config.validate()
    frames = np.asarray(frames)
    if frames.ndim != 4 or frames.shape[0] != model.n_frames or frames.shape[1:3] != (model.height, model.width):
        raise ValueError(f"frames {frames.shape} do not match model ({model.n_frames}, {model.height}, {model.width})")
    if align is not None:
        if len(align.vectors) != model.n_frames:
            raise MissingEmbeddingError(f"{len(align.vectors)} alignment vectors for {model.n_frames} frames")
        e_dim = align.vectors.shape[1]
        if e_dim != model.config.latent_dim and (model.projection is None or model.projection.shape[1] != e_dim):
            model.add_projection(e_dim)

    train_ids = list(range(model.n_frames))
    if config.holdout_alpha:
        train_ids, _ = holdout_frames(model.n_frames, config.holdout_alpha)
    model.holdout_alpha = config.holdout_alpha

    coords = model.lattice(model.height, model.width)
    targets = [model.targets(f) for f in frames]
    n_points = len(coords)
    batch = n_points if config.batch_size == 0 else min(config.batch_size, n_points)
    rng = np.random.default_rng(config.seed)
    eval_every = config.eval_every or max(config.steps // 100, 50)

    named = model.named_parameters()
    opt = Adam(named.values(), lr=config.lr, betas=tuple(config.betas), eps=config.eps)
    history = History()
    per_step = min(config.frames_per_step, len(train_ids))

    for step in range(1, config.steps + 1):
        opt.zero_grad()
        if per_step == len(train_ids):
            chosen = train_ids
        else:
            chosen = [train_ids[i] for i in rng.choice(len(train_ids), size=per_step, replace=False)]
        loss_value = 0.0
        for t in chosen:
            if batch == n_points:
                idx = slice(None)
            else:
                idx = np.sort(rng.choice(n_points, size=batch, replace=False))
            z = model.frame_latent(t)
            pred = model.forward(coords[idx], z)
            loss = total_loss(pred, targets[t][idx], z, align, t, model)
            if per_step > 1:
                loss = loss.scale(1.0 / per_step)
            value = float(loss.data)
            if not np.isfinite(value):
                norms = {k: float(np.linalg.norm(p.data)) for k, p in named.items()}
                raise TrainingDivergedError(step, config.lr, norms)
            loss.backward()
            loss_value += value
        opt.step()
        history.steps.append(step)
        history.losses.append(loss_value)
        if step % eval_every == 0 or step == config.steps:
            t = train_ids[step // eval_every % len(train_ids)]
            history.eval_steps.append(step)
            history.psnrs.append(_psnr(model.decode(t), frames[t]))
            log.debug("step %d loss %.6g psnr %.2f", step, loss_value, history.psnrs[-1])
        if callback is not None:
            callback(step, loss_value)
    return history
