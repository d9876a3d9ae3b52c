import json

import numpy as np
import pytest

from latent_inr.config import CONFIG_VERSION, load_run_config, parse_run_config
from latent_inr.io import FrameFormatError, VideoManifest, decode_ppm, encode_ppm, load_frames, write_frames
from latent_inr.model import ConfigError


class TestPPM:
    def test_white(self):
        frame = decode_ppm(b"P6\n2 2\n255\n" + b"\xff" * 12)
        np.testing.assert_array_equal(frame, np.ones((2, 2, 3)))

    def test_mid_grey(self):
        frame = decode_ppm(b"P6 1 1 255 " + bytes([128, 128, 128]))
        assert frame[0, 0, 0] == pytest.approx(0.50196, abs=1e-5)

    def test_comments_in_header(self):
        frame = decode_ppm(b"P6\n# made by hand\n1 1\n255\n" + bytes([0, 255, 0]))
        np.testing.assert_array_equal(frame[0, 0], [0, 1, 0])

    def test_roundtrip_exact_at_8_bits(self, rng):
        frame = rng.integers(0, 256, (5, 7, 3)) / 255.0
        np.testing.assert_array_equal(decode_ppm(encode_ppm(frame)), frame)

    @pytest.mark.parametrize("data", [b"P3\n1 1\n255\n000", b"P6\n1 1\n255\n\x00", b"P6\n1 1\n65535\n" + b"\0" * 6, b"P6\n1"])
    def test_malformed(self, data):
        with pytest.raises(FrameFormatError):
            decode_ppm(data)


class TestManifest:
    def test_write_then_load(self, tmp_path, rng):
        frames = rng.integers(0, 256, (3, 4, 6, 3)) / 255.0
        write_frames(tmp_path, frames)
        np.testing.assert_array_equal(load_frames(tmp_path / "manifest.json"), frames)

    def test_dimension_mismatch(self, tmp_path, rng):
        write_frames(tmp_path, rng.uniform(0, 1, (2, 4, 4, 3)))
        raw = json.loads((tmp_path / "manifest.json").read_text())
        raw["width"] = 5
        (tmp_path / "manifest.json").write_text(json.dumps(raw))
        with pytest.raises(FrameFormatError):
            load_frames(tmp_path / "manifest.json")

    def test_missing_file(self, tmp_path, rng):
        write_frames(tmp_path, rng.uniform(0, 1, (2, 4, 4, 3)))
        (tmp_path / "frame_000001.ppm").unlink()
        with pytest.raises(FileNotFoundError):
            load_frames(tmp_path / "manifest.json")

    def test_count_must_match(self):
        with pytest.raises(FrameFormatError):
            VideoManifest(width=2, height=2, frames=["a.ppm"], frame_count=2)

    def test_unknown_key(self, tmp_path):
        (tmp_path / "m.json").write_text(json.dumps({"width": 1, "height": 1, "frames": ["a"], "codec": "x"}))
        with pytest.raises(FrameFormatError):
            VideoManifest.load(tmp_path / "m.json")


class TestRunConfig:
    def test_defaults(self):
        cfg = parse_run_config({"version": CONFIG_VERSION})
        assert cfg.model.width == 512 and cfg.train.lr == 5e-4 and cfg.codec.bits == 8

    def test_overrides_and_preset(self):
        cfg = parse_run_config({"version": 1, "preset": "appendix", "model": {"width": 64, "hashgrid": {"levels": 4}},
                                "train": {"steps": 10}})
        assert (cfg.model.depth, cfg.model.width, cfg.model.hashgrid.levels, cfg.train.steps) == (10, 64, 4, 10)

    @pytest.mark.parametrize("raw", [
        {},
        {"version": 2},
        {"version": 1, "extra": 1},
        {"version": 1, "train": {"stepz": 1}},
        {"version": 1, "model": {"hashgrid": {"level": 3}}},
        {"version": 1, "codec": {"bits": 2}},
        {"version": 1, "preset": "huge"},
    ])
    def test_rejected(self, raw):
        with pytest.raises(ConfigError):
            parse_run_config(raw)

    def test_invalid_json(self, tmp_path):
        (tmp_path / "c.json").write_text("{")
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "c.json")
