import numpy as np
import pytest

from latent_inr.encoding import FourierConfig
from latent_inr.model import LatentINR, ModelConfig
from latent_inr.numerics import Tensor, cosine_similarity, mse_loss
from latent_inr.synthetic import distinct_frames, translating_blob
from latent_inr.training import (
    AlignmentTarget,
    MissingEmbeddingError,
    TrainConfig,
    TrainingDivergedError,
    fit,
    holdout_frames,
    total_loss,
)


def tiny(n_frames=2, size=8, **kw):
    cfg = dict(latent_dim=8, width=16, depth=3, rank=2, hyper_hidden=[8])
    cfg.update(kw)
    return LatentINR(ModelConfig(**cfg), n_frames, size, size, seed=0)


class TestHoldout:
    def test_examples(self):
        assert holdout_frames(8, 2) == ([0, 2, 4, 6], [1, 3, 5, 7])
        assert holdout_frames(9, 4)[0] == [0, 4, 8]
        train, held = holdout_frames(16, 8)
        assert len(train) == 2 and len(held) == 14

    def test_bad_stride(self):
        with pytest.raises(ValueError):
            holdout_frames(8, 1)

    def test_only_trained_frames_sampled(self, monkeypatch):
        m = tiny(n_frames=8)
        seen = set()
        real = m.frame_latent
        monkeypatch.setattr(m, "frame_latent", lambda t: seen.add(t) or real(t))
        monkeypatch.setattr(m, "decode", lambda *a, **k: np.zeros((8, 8, 3)))
        fit(m, distinct_frames(8, 8, 8), TrainConfig(steps=40, holdout_alpha=2, frames_per_step=1))
        assert seen == {0, 2, 4, 6}


class TestLoss:
    def test_zero_weight_is_mse(self, rng):
        pred, target = Tensor(rng.normal(size=(5, 3))), rng.normal(size=(5, 3))
        z = Tensor(rng.normal(size=4))
        align = AlignmentTarget(rng.normal(size=(1, 4)), weight=0.0)
        assert total_loss(pred, target, z, align).data == mse_loss(pred, target).data

    def test_parallel_target_has_no_penalty(self, rng):
        pred, target = Tensor(rng.normal(size=(5, 3))), rng.normal(size=(5, 3))
        z = rng.normal(size=4)
        align = AlignmentTarget(3.0 * z[None], weight=1.0)
        got = float(total_loss(pred, target, Tensor(z), align).data)
        assert got == pytest.approx(float(mse_loss(pred, target).data), abs=1e-12)

    def test_orthogonal_penalty(self):
        pred = Tensor(np.ones((2, 3)))
        align = AlignmentTarget(np.array([[0.0, 1.0]]), weight=1.0)
        assert float(total_loss(pred, np.ones((2, 3)), Tensor([1.0, 0.0]), align).data) == 1.0

    def test_missing_row(self):
        with pytest.raises(MissingEmbeddingError):
            AlignmentTarget(np.ones((2, 4))).row(2)


class TestFit:
    def test_deterministic_history(self):
        frames = distinct_frames(2, 8, 8)
        runs = []
        for _ in range(2):
            m = tiny()
            runs.append(fit(m, frames, TrainConfig(steps=30, batch_size=20, seed=4)).losses)
        assert runs[0] == runs[1]

    def test_smoothed_loss_decreases(self):
        frames = translating_blob(2, 16, 16, sigma=4)
        m = tiny(size=16, width=32, latent_dim=16, rank=4)
        losses = np.array(fit(m, frames, TrainConfig(steps=400, lr=2e-3, frames_per_step=2)).losses)
        smooth = np.convolve(losses, np.ones(50) / 50, mode="valid")
        # checked on window-50 means taken every 50 steps
        blocks = smooth[::50]
        assert np.all(np.diff(blocks) <= 0)

    def test_gradients_reach_every_group(self, rng):
        m = tiny(encoding="hashgrid")
        m.add_projection(5)
        for net in m.hypernets.values():
            net.weights[-1].data = rng.normal(scale=0.1, size=net.weights[-1].shape)
        frames = distinct_frames(2, 8, 8)
        align = AlignmentTarget(rng.normal(size=(2, 5)), weight=0.5)
        z = m.frame_latent(0)
        total_loss(m.forward(m.lattice(8, 8), z), m.targets(frames[0]), z, align, 0, m).backward()
        for name, p in m.named_parameters().items():
            assert np.any(p.grad), name

    def test_nan_aborts_with_snapshot(self):
        m = tiny()
        m.head_bias.data[:] = np.nan
        with pytest.raises(TrainingDivergedError) as info:
            fit(m, distinct_frames(2, 8, 8), TrainConfig(steps=3))
        assert info.value.step == 1 and "head.bias" in info.value.param_norms

    def test_frame_shape_checked(self):
        with pytest.raises(ValueError):
            fit(tiny(), distinct_frames(3, 8, 8), TrainConfig(steps=1))

    def test_alignment_efficacy(self):
        d = 16
        frames = distinct_frames(4, 8, 8)
        targets = np.linalg.qr(np.random.default_rng(5).normal(size=(d, 4)))[0].T
        m = tiny(n_frames=4, latent_dim=d, encoding="fourier", fourier=FourierConfig(bands=3))
        fit(m, frames, TrainConfig(steps=600, lr=2e-3), AlignmentTarget(targets, 0.01))
        for t in range(4):
            assert float(cosine_similarity(m.project(m.frame_latent(t)), targets[t]).data) >= 0.9

    def test_projection_added_for_wider_embeddings(self):
        m = tiny()
        fit(m, distinct_frames(2, 8, 8), TrainConfig(steps=2), AlignmentTarget(np.eye(2, 12), 0.01))
        assert m.projection is not None and m.projection.shape == (8, 12)
