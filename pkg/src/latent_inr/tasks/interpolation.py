"""Frame synthesis by linear interpolation between trained latents."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..training import holdout_frames
from .metrics import psnr


class StrideMismatchError(ValueError):
    pass


def interpolate_latents(z_a, z_b, alpha: int) -> list[np.ndarray]:
    """The ``alpha - 1`` latents ``beta * z_b + (1 - beta) * z_a`` for beta = 1/alpha ... (alpha-1)/alpha."""
    if alpha < 2:
        raise ValueError(f"alpha must be >= 2, got {alpha}")
    z_a = np.asarray(z_a, dtype=np.float64)
    z_b = np.asarray(z_b, dtype=np.float64)
    if z_a.shape != z_b.shape:
        raise ValueError(f"latent shapes differ: {z_a.shape} vs {z_b.shape}")
    return [(i / alpha) * z_b + (1 - i / alpha) * z_a for i in range(1, alpha)]


def heldout_latents(latents: np.ndarray, alpha: int) -> dict:
    """Latent for every held-out frame index under stride ``alpha``.

    Frames bracketed by two trained frames get the interpolated latent;
    frames after the last trained frame reuse its latent.  Values are
    ``(latent, bracketed)`` pairs.
    """
    n = len(latents)
    _, held = holdout_frames(n, alpha)
    out = {}
    for t in held:
        a = (t // alpha) * alpha
        b = a + alpha
        if b < n:
            out[t] = (interpolate_latents(latents[a], latents[b], alpha)[t - a - 1], True)
        else:
            out[t] = (np.array(latents[a], dtype=np.float64), False)
    return out


def frame_hold(frames: np.ndarray, t: int, alpha: int) -> np.ndarray:
    """Nearest trained ground-truth frame (ties go to the earlier one)."""
    a = (t // alpha) * alpha
    b = a + alpha
    if b >= len(frames) or t - a <= b - t:
        return frames[a]
    return frames[b]


@dataclass
class InterpolationReport:
    alpha: int
    frames: list = field(default_factory=list)
    psnr: list = field(default_factory=list)
    baseline_psnr: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean(self.psnr)) if self.psnr else float("nan")

    @property
    def mean_baseline_psnr(self) -> float:
        return float(np.mean(self.baseline_psnr)) if self.baseline_psnr else float("nan")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "frames": self.frames,
            "psnr": self.psnr,
            "mean_psnr": self.mean_psnr,
            "baseline_psnr": self.baseline_psnr,
            "mean_baseline_psnr": self.mean_baseline_psnr,
            "skipped_unbracketed": self.skipped,
        }


def evaluate_interpolation(model, frames: np.ndarray, alpha: int, trained_alpha: int | None = None) -> InterpolationReport:
    """PSNR of interpolated held-out frames against ground truth.

    Only frames with a trained neighbour on both sides count; the rest are
    listed in ``skipped``.  The frame-hold baseline is scored on the same
    frames.
    """
    if trained_alpha is not None and trained_alpha != alpha:
        raise StrideMismatchError(f"model trained with stride {trained_alpha}, evaluated with {alpha}")
    if len(frames) != model.n_frames:
        raise ValueError("frame count differs from the model's")
    report = InterpolationReport(alpha)
    for t, (z, bracketed) in sorted(heldout_latents(model.latents.data, alpha).items()):
        if not bracketed:
            report.skipped.append(t)
            continue
        pred = model.decode_latent(z)
        report.frames.append(t)
        report.psnr.append(psnr(pred, frames[t]))
        report.baseline_psnr.append(psnr(frame_hold(frames, t, alpha), frames[t]))
    return report
