import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from skimage.metrics import structural_similarity

from latent_inr.model import LatentINR, ModelConfig
from latent_inr.synthetic import repetitive_video, smooth_texture, translating_blob
from latent_inr.tasks import (
    EmbeddingTable,
    build_index,
    evaluate_interpolation,
    export_latents,
    frame_hold,
    heldout_latents,
    interpolate_latents,
    label_predicate,
    load_embeddings,
    psnr,
    query,
    recall_at_k,
    save_embeddings,
    ssim,
)
from latent_inr.tasks.embeddings import EmbeddingFormatError, labels_path
from latent_inr.tasks.interpolation import StrideMismatchError
from latent_inr.tasks.retrieval import MissingMetadataError
from latent_inr.training import TrainConfig, fit

MICRO = dict(latent_dim=16, width=32, depth=3, rank=4, hyper_hidden=[32])


class TestInterpolate:
    def test_midpoint(self):
        (z,) = interpolate_latents([0.0, 2.0], [2.0, 4.0], 2)
        np.testing.assert_array_equal(z, [1.0, 3.0])

    def test_quarter_steps(self):
        out = interpolate_latents(np.zeros(1), np.ones(1), 4)
        assert [float(z[0]) for z in out] == [0.25, 0.5, 0.75]

    def test_equal_endpoints(self, rng):
        z = rng.normal(size=5)
        for v in interpolate_latents(z, z, 8):
            np.testing.assert_allclose(v, z, rtol=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 64))
    def test_linear_in_beta(self, alpha):
        za, zb = np.array([1.0, -3.0]), np.array([5.0, 2.0])
        out = interpolate_latents(za, zb, alpha)
        for i, z in enumerate(out, start=1):
            np.testing.assert_allclose(z, za + (zb - za) * i / alpha, atol=1e-12)

    def test_heldout_latents_tail(self):
        z = np.arange(5.0)[:, None]
        held = heldout_latents(z, 2)
        assert sorted(held) == [1, 3]
        assert all(b for _, b in held.values())
        held = heldout_latents(np.arange(6.0)[:, None], 2)
        assert held[5] == (pytest.approx(np.array([4.0])), False)

    def test_frame_hold_prefers_earlier_on_tie(self):
        frames = np.arange(5.0)[:, None]
        assert frame_hold(frames, 1, 2)[0] == 0
        assert frame_hold(frames, 3, 4)[0] == 4
        assert frame_hold(frames, 2, 4)[0] == 0

    def test_stride_mismatch(self):
        m = LatentINR(ModelConfig(**MICRO), 4, 16, 16)
        with pytest.raises(StrideMismatchError):
            evaluate_interpolation(m, np.zeros((4, 16, 16, 3)), 4, trained_alpha=2)

    def test_static_video(self):
        frames = np.repeat(smooth_texture(16, 16, seed=2)[None], 5, axis=0)
        m = LatentINR(ModelConfig(**MICRO), 5, 16, 16)
        fit(m, frames, TrainConfig(steps=800, lr=2e-3, frames_per_step=3, holdout_alpha=2))
        report = evaluate_interpolation(m, frames, 2)
        trained = np.mean([psnr(m.decode(t), frames[t]) for t in (0, 2, 4)])
        assert report.frames == [1, 3]
        assert report.mean_psnr == pytest.approx(trained, abs=0.1)


def _index(rng, n=100, d=8):
    keys = rng.normal(size=(n, d))
    ids = [f"k{i:03d}" for i in range(n)]
    return build_index(keys, ids, [{"video": f"v{i % 7}"} for i in range(n)])


class TestRetrieval:
    def test_self_query(self, rng):
        index = _index(rng)
        key_id, score = query(index, index.keys[17] * 3.0, 1)[0]
        assert key_id == "k017" and score == pytest.approx(1.0)

    def test_orthogonal_ties(self):
        index = build_index(np.eye(4)[[1, 2, 3]], ["c", "a", "b"], [{}] * 3)
        res = query(index, np.eye(4)[0], 3)
        assert [k for k, _ in res] == ["a", "b", "c"]
        assert all(s == 0.0 for _, s in res)

    def test_matches_full_sort(self, rng):
        for _ in range(10):
            index = _index(rng)
            q = rng.normal(size=8)
            s = [(float(index.keys[i] @ (q / np.linalg.norm(q))), index.ids[i]) for i in range(len(index))]
            oracle = [i for _, i in sorted(s, key=lambda p: (-p[0], p[1]))]
            assert [k for k, _ in query(index, q, 100)] == oracle

    def test_unit_norm_keys(self, rng):
        index = _index(rng)
        np.testing.assert_allclose(np.linalg.norm(index.keys, axis=1), 1.0)

    def test_video_pooling(self):
        e = np.eye(3)
        index = build_index(e[:2], ["f0", "f1"], [{"video": "a"}, {"video": "a"}], pooling="video")
        np.testing.assert_allclose(index.keys[0], (e[0] + e[1]) / np.sqrt(2))
        z = np.array([[1.0, 2.0, 2.0]] * 3)
        index = build_index(z, ["x", "y", "w"], [{"video": "v"}] * 3, pooling="video")
        np.testing.assert_allclose(index.keys[0], z[0] / 3)

    def test_pooling_needs_video_label(self):
        with pytest.raises(MissingMetadataError):
            build_index(np.eye(2), ["a", "b"], [{}, {}], pooling="video")

    def test_projection_applied(self):
        index = build_index(np.array([[1.0, 0.0]]), ["a"], [{}], projection=np.array([[0.0, 2.0], [1.0, 0.0]]))
        np.testing.assert_allclose(index.keys[0], [0.0, 1.0])


class TestRecall:
    def test_always_positive(self, rng):
        index = _index(rng)
        res = recall_at_k(index, rng.normal(size=(5, 8)), lambda i, m: True)
        assert res.recall == {1: 1.0, 5: 1.0, 10: 1.0}

    def test_third_rank(self):
        keys = np.array([[1.0, 0.0], [0.9, 0.1], [0.8, 0.2], [0.0, 1.0]])
        index = build_index(keys, list("abcd"), [{"label": x} for x in "xxyz"])
        res = recall_at_k(index, [[1.0, 0.0]], label_predicate([{"label": "y"}], "label"), ks=(1, 5))
        assert res.recall == {1: 0.0, 5: 1.0}

    def test_no_positive_excluded(self):
        index = build_index(np.eye(2), ["a", "b"], [{"label": 1}, {"label": 2}])
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            res = recall_at_k(index, np.eye(2), label_predicate([{"label": 1}, {"label": 3}], "label"), ks=(1,),
                              query_ids=["q0", "q1"])
        assert res.excluded == ["q1"] and res.n_queries == 1 and res.recall[1] == 1.0
        assert caught

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000))
    def test_monotone_in_k(self, seed):
        r = np.random.default_rng(seed)
        index = _index(r, n=30)
        labels = [{"video": f"v{r.integers(7)}"} for _ in range(6)]
        res = recall_at_k(index, r.normal(size=(6, 8)), label_predicate(labels, "video"), ks=(1, 5, 10))
        assert res.recall[1] <= res.recall[5] <= res.recall[10]


class TestMetrics:
    def test_psnr_values(self):
        a = np.zeros((4, 4))
        assert psnr(a, a + 0.1) == pytest.approx(20.0)
        assert psnr(a, a + 0.01) == pytest.approx(40.0)
        assert psnr(a, a) == math.inf

    def test_psnr_decreases_with_noise(self, rng):
        img = rng.uniform(0, 1, (16, 16))
        noise = rng.uniform(-1, 1, (16, 16))
        values = [psnr(img, img + amp * noise) for amp in (0.01, 0.02, 0.05, 0.1)]
        assert all(x > y for x, y in zip(values, values[1:]))

    def test_ssim_identity_and_symmetry(self, rng):
        a, b = rng.uniform(0, 1, (2, 20, 24, 3))
        assert ssim(a, a) == pytest.approx(1.0)
        assert ssim(a, b) == pytest.approx(ssim(b, a), rel=1e-12)

    def test_ssim_matches_skimage(self, rng):
        for shape in ((32, 32, 3), (17, 40, 1), (24, 24)):
            a = rng.uniform(0, 1, shape)
            b = np.clip(a + rng.normal(scale=0.1, size=shape), 0, 1)
            kw = dict(channel_axis=-1) if len(shape) == 3 else {}
            want = structural_similarity(a, b, data_range=1.0, gaussian_weights=True, sigma=1.5,
                                         use_sample_covariance=False, **kw)
            assert ssim(a, b) == pytest.approx(want, abs=1e-10)

    def test_ssim_constant_images(self):
        c1 = 0.01**2
        assert ssim(np.zeros((16, 16)), np.ones((16, 16))) == pytest.approx(c1 / (1 + c1), rel=1e-9)

    def test_ssim_too_small(self):
        with pytest.raises(ValueError):
            ssim(np.zeros((8, 8)), np.zeros((8, 8)))


class TestEmbeddings:
    def test_size_and_roundtrip(self, tmp_path, rng):
        m = LatentINR(ModelConfig(width=64, rank=8), 5, 8, 8, seed=0)
        path = tmp_path / "z.lemb"
        table = export_latents(m, path)
        ids_bytes = sum(2 + len(k) for k in table.ids)
        assert path.stat().st_size == 14 + ids_bytes + 5 * 512 * 4
        back = load_embeddings(path)
        assert back.ids == table.ids
        assert back.vectors.tobytes() == m.latents.data.astype(np.float32).tobytes()

    def test_labels_sidecar(self, tmp_path):
        t = EmbeddingTable(["a", "b"], np.eye(2), {"a": {"video": "x"}})
        save_embeddings(t, tmp_path / "q.lemb")
        assert labels_path(tmp_path / "q.lemb").exists()
        assert load_embeddings(tmp_path / "q.lemb").labels == {"a": {"video": "x"}}

    def test_format_errors(self):
        with pytest.raises(EmbeddingFormatError):
            EmbeddingTable(["a", "a"], np.eye(2))
        with pytest.raises(EmbeddingFormatError):
            EmbeddingTable(["a"], np.array([[np.nan]]))
        data = EmbeddingTable(["a"], np.ones((1, 3))).to_bytes()
        with pytest.raises(EmbeddingFormatError):
            EmbeddingTable.from_bytes(data[:-2])

    def test_repetitive_latents_cluster(self):
        spreads = {}
        for name, video in (("repetitive", repetitive_video(8, 16, 16)), ("dynamic", translating_blob(8, 16, 16, sigma=3))):
            m = LatentINR(ModelConfig(**MICRO), 8, 16, 16)
            fit(m, video, TrainConfig(steps=800, lr=2e-3, frames_per_step=4))
            z = m.latents.data
            spreads[name] = np.linalg.norm(z[:, None] - z[None], axis=2)[np.triu_indices(8, 1)].mean()
        assert spreads["repetitive"] < 0.25 * spreads["dynamic"]
