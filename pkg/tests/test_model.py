import numpy as np
import pytest

from conftest import numeric_grad, rel_error
from latent_inr import model as model_mod
from latent_inr.encoding import FourierConfig, HashGridConfig
from latent_inr.model import (
    ConfigError,
    HyperNetwork,
    LatentINR,
    ModelConfig,
    decode_frame,
    decode_patch,
    modulate,
)
from latent_inr.numerics import Tensor
from latent_inr.synthetic import constant_video, translating_blob
from latent_inr.training import TrainConfig, fit
from latent_inr.tasks import psnr


def small_config(**kw):
    base = dict(latent_dim=8, width=16, depth=3, rank=2, hyper_hidden=[8], encoding="fourier",
                fourier=FourierConfig(bands=2))
    base.update(kw)
    return ModelConfig(**base)


class TestConfig:
    def test_defaults_follow_main_preset(self):
        cfg = ModelConfig.preset("main")
        assert (cfg.depth, cfg.width, cfg.latent_dim, cfg.hyper_hidden) == (6, 512, 512, [128])
        app = ModelConfig.preset("appendix")
        assert (app.depth, app.hyper_hidden) == (10, [512, 512])

    def test_rank_bound_rejected(self):
        with pytest.raises(ConfigError):
            LatentINR(small_config(rank=9), 1, 4, 4)

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            ModelConfig.from_dict({"widht": 3})

    def test_dict_roundtrip(self):
        cfg = ModelConfig(hashgrid=HashGridConfig(levels=3))
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg

    def test_bad_layer_index(self):
        with pytest.raises(ConfigError):
            LatentINR(small_config(modulated_layers=[3]), 1, 4, 4)


class TestInit:
    def test_seed_determinism(self):
        a = LatentINR(ModelConfig(width=32, latent_dim=16, rank=4), 3, 16, 16, seed=11)
        b = LatentINR(ModelConfig(width=32, latent_dim=16, rank=4), 3, 16, 16, seed=11)
        for (na, pa), (nb, pb) in zip(a.named_parameters().items(), b.named_parameters().items()):
            assert na == nb
            assert pa.data.tobytes() == pb.data.tobytes()

    def test_latent_mean_bound(self):
        m = LatentINR(ModelConfig(width=64, rank=8), 600, 8, 8, seed=0)
        bound = 4 * 0.01 / np.sqrt(512 * 600)
        assert abs(m.latents.data.mean()) <= bound

    def test_frame_latent(self):
        m = LatentINR(small_config(), 3, 4, 4)
        np.testing.assert_array_equal(m.frame_latent(0).data, m.latents.data[0])
        assert m.frame_latent(2).shape == (8,)
        with pytest.raises(IndexError):
            m.frame_latent(3)


class TestHyperNetwork:
    def test_zero_output_layer_gives_zero_factors(self, rng):
        net = HyperNetwork(8, [8], 6, 5, 2, rng, np.float64)
        net.biases[-1].data[:] = 0
        p, q = net(Tensor(rng.normal(size=8)))
        assert not p.data.any() and not q.data.any()
        assert p.shape == (6, 2) and q.shape == (5, 2)

    def test_output_length(self, rng):
        assert HyperNetwork(16, [4], 512, 512, 20, rng, np.float64).out_dim == 20480

    def test_factor_gradient(self, rng):
        net = HyperNetwork(5, [6], 4, 3, 2, rng, np.float64)
        net.weights[-1].data = rng.normal(size=net.weights[-1].shape)
        z = Tensor(rng.normal(size=5), requires_grad=True)
        c = rng.normal(size=(4, 2))
        f = lambda: (net(z)[0] * Tensor(c)).sum()  # noqa: E731
        f().backward()
        fd = numeric_grad(lambda: float(f().data), z.data)
        assert rel_error(z.grad, fd) <= 1e-6


class TestModulate:
    def test_zero_factors_halve(self, rng):
        theta = Tensor(rng.normal(size=(4, 3)))
        out = modulate(theta, Tensor(np.zeros((4, 2))), Tensor(rng.normal(size=(3, 2))))
        np.testing.assert_array_equal(out.data, theta.data / 2)

    def test_zero_theta(self, rng):
        out = modulate(Tensor(np.zeros((4, 4))), Tensor(rng.normal(size=(4, 2))), Tensor(rng.normal(size=(4, 2))))
        assert not out.data.any()

    def test_dense_oracle(self, rng):
        theta, p, q = rng.normal(size=(4, 4)), rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
        want = np.empty((4, 4))
        for i in range(4):
            for j in range(4):
                want[i, j] = theta[i, j] / (1 + np.exp(-(p[i] @ q[j])))
        np.testing.assert_allclose(modulate(Tensor(theta), Tensor(p), Tensor(q)).data, want, rtol=1e-14)

    def test_mask_bounded_and_low_rank(self, rng):
        m = LatentINR(small_config(width=32, rank=3), 2, 4, 4)
        net = m.hypernets[1]
        net.weights[-1].data = rng.normal(size=net.weights[-1].shape)
        for t in range(2):
            z = m.frame_latent(t)
            p, q = net(z)
            assert np.linalg.matrix_rank(p.data @ q.data.T) <= 3
            theta = m.base_weights[1].data
            assert np.all(np.abs(m.frame_weights(z)[1].data) <= np.abs(theta))


class TestStructure:
    def test_unmodulated_layers_shared(self):
        m = LatentINR(small_config(), 3, 4, 4)
        ws = [m.frame_weights(m.frame_latent(t)) for t in range(3)]
        for i in range(3):
            if i not in m.hypernets:
                assert all(w[i] is m.base_weights[i] for w in ws)

    def test_parameter_names(self):
        names = list(LatentINR(ModelConfig(width=32, latent_dim=16, rank=4), 1, 8, 8).named_parameters())
        assert names[:2] == ["latents", "encoding.tables"]
        assert "base.5.weight" in names and "head.bias" in names and "hyper.1.1.weight" in names


class TestDecode:
    def test_single_pixel_at_centre(self):
        m = LatentINR(small_config(), 1, 4, 4)
        z = m.latents.data[0]
        want = np.clip(m.forward(np.array([[0.5, 0.5]]), Tensor(z)).data, 0, 1)
        np.testing.assert_array_equal(decode_frame(m, z, (1, 1)).reshape(-1), want.reshape(-1))

    def test_shapes(self):
        m = LatentINR(small_config(), 1, 4, 6)
        assert m.decode(0).shape == (4, 6, 3)
        assert m.decode(0, 8, 12).shape == (8, 12, 3)

    def test_patch_evaluations(self, monkeypatch):
        m = LatentINR(small_config(output="patch", patch_size=4), 1, 8, 8)
        calls = []
        real = model_mod._evaluate
        monkeypatch.setattr(model_mod, "_evaluate", lambda mm, z, c, k: calls.append(len(c)) or real(mm, z, c, k))
        assert decode_patch(m, m.latents.data[0], 8, 8).shape == (8, 8, 3)
        assert calls == [4]

    def test_patch_tiling_is_partition(self, monkeypatch):
        m = LatentINR(small_config(output="patch", patch_size=2, out_channels=1), 1, 6, 4)
        n_out = 6 * 4

        def numbered(mm, z, coords, chunk):
            return (np.arange(len(coords) * 4).reshape(len(coords), 4) + 0.5) / n_out

        monkeypatch.setattr(model_mod, "_evaluate", numbered)
        ids = np.floor(decode_patch(m, None, 6, 4).ravel() * n_out).astype(int)
        np.testing.assert_array_equal(np.bincount(ids, minlength=n_out), np.ones(n_out))

    def test_patch_one_equals_pixel_decode(self):
        a = LatentINR(small_config(), 1, 4, 4, seed=3)
        b = LatentINR(small_config(output="patch", patch_size=1), 1, 4, 4, seed=3)
        z = a.latents.data[0]
        np.testing.assert_array_equal(decode_patch(b, z, 4, 4), decode_frame(a, z, (4, 4)))

    def test_indivisible_patch(self):
        m = LatentINR(small_config(output="patch", patch_size=2), 1, 4, 4)
        with pytest.raises(ValueError):
            m.decode(0, 5, 4)


@pytest.fixture(scope="module")
def two_frame_model():
    frames = translating_blob(n_frames=2, height=16, width=16, sigma=5)
    cfg = ModelConfig(latent_dim=16, width=32, depth=3, rank=4, hyper_hidden=[32])
    m = LatentINR(cfg, 2, 16, 16, seed=0)
    fit(m, frames, TrainConfig(steps=800, lr=2e-3, frames_per_step=2))
    return m, frames


def test_two_latents_reconstruct_their_frames(two_frame_model):
    m, frames = two_frame_model
    for t in range(2):
        assert psnr(m.decode(t), frames[t]) >= 35


def test_continuity_across_resolutions(two_frame_model):
    m, _ = two_frame_model
    coarse = m.decode(0)
    fine = m.decode(0, 32, 32)
    # each coarse pixel centre lies between four fine centres; compare with the nearest one
    assert np.max(np.abs(coarse - fine[::2, ::2])) <= 0.05


def test_constant_frame_constant_at_any_resolution():
    frames = constant_video(1, 16, 16)
    m = LatentINR(ModelConfig(latent_dim=16, width=32, depth=3, rank=4, hyper_hidden=[32]), 1, 16, 16)
    fit(m, frames, TrainConfig(steps=200, lr=2e-3))
    assert psnr(m.decode(0), frames[0]) >= 45
    for h, w in ((16, 16), (5, 7), (40, 24)):
        out = m.decode(0, h, w)
        assert np.max(out.max(axis=(0, 1)) - out.min(axis=(0, 1))) <= 2 / 255
