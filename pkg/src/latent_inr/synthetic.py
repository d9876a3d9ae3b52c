"""Small procedural videos used by tests, benchmarks and the demo fixture."""

from __future__ import annotations

import numpy as np


def translating_blob(n_frames: int = 16, height: int = 64, width: int = 64, sigma: float = 6.0,
                     start=(0.3, 0.4), velocity=(1.5, 0.75)) -> np.ndarray:
    """A coloured Gaussian blob moving at constant pixel velocity ``(vx, vy)``.

    Returns ``[N, H, W, 3]`` in [0, 1].
    """
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64) + 0.5
    bg = np.array([0.15, 0.2, 0.35])
    fg = np.array([0.95, 0.75, 0.25])
    frames = np.empty((n_frames, height, width, 3))
    for t in range(n_frames):
        cx = start[0] * width + velocity[0] * t
        cy = start[1] * height + velocity[1] * t
        g = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma**2))
        frames[t] = bg + (fg - bg) * g[..., None]
    return frames


def smooth_texture(height: int = 32, width: int = 32, seed: int = 0, n_waves: int = 4) -> np.ndarray:
    """Sum of random low-frequency plane waves per channel, ``[H, W, 3]`` in [0.1, 0.9]."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    ys = (ys + 0.5) / height
    xs = (xs + 0.5) / width
    img = np.zeros((height, width, 3))
    for c in range(3):
        for _ in range(n_waves):
            fx, fy = rng.uniform(-3, 3, size=2)
            phase = rng.uniform(0, 2 * np.pi)
            img[..., c] += np.sin(2 * np.pi * (fx * xs + fy * ys) + phase)
    img -= img.min()
    img /= max(img.max(), 1e-12)
    return 0.1 + 0.8 * img


def distinct_frames(n_frames: int = 8, height: int = 32, width: int = 32, seed: int = 0) -> np.ndarray:
    return np.stack([smooth_texture(height, width, seed + t) for t in range(n_frames)])


def constant_video(n_frames: int, height: int, width: int, color=(0.2, 0.6, 0.8)) -> np.ndarray:
    return np.broadcast_to(np.asarray(color, dtype=np.float64), (n_frames, height, width, 3)).copy()


def repetitive_video(n_frames: int = 16, height: int = 32, width: int = 32, seed: int = 0, jitter: float = 0.01) -> np.ndarray:
    """One texture with tiny per-frame noise: frames nearly repeat."""
    rng = np.random.default_rng(seed)
    base = smooth_texture(height, width, seed)
    return np.clip(base[None] + rng.uniform(-jitter, jitter, size=(n_frames, height, width, 3)), 0, 1)
