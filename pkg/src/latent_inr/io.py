"""Binary PPM frames and JSON video manifests."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


class FrameFormatError(ValueError):
    pass


def _tokens(data: bytes, count: int, pos: int) -> tuple[list, int]:
    out = []
    while len(out) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FrameFormatError("truncated PPM header")
        out.append(data[start:pos])
    return out, pos


def decode_ppm(data: bytes) -> np.ndarray:
    """Binary P6 with maxval <= 255 to ``[H, W, 3]`` float64 in [0, 1]."""
    if data[:2] != b"P6":
        raise FrameFormatError("not a binary PPM (P6)")
    try:
        (w, h, maxval), pos = _tokens(data, 3, 2)
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise FrameFormatError(f"malformed PPM header: {exc}") from exc
    if width < 1 or height < 1 or not 0 < maxval < 256:
        raise FrameFormatError(f"unsupported PPM geometry {width}x{height}, maxval {maxval}")
    pos += 1  # single whitespace byte before the raster
    n = width * height * 3
    raster = data[pos:pos + n]
    if len(raster) != n:
        raise FrameFormatError(f"PPM raster has {len(raster)} bytes, expected {n}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3) / float(maxval)


def encode_ppm(frame: np.ndarray) -> bytes:
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise FrameFormatError(f"expected [H, W, 3], got {frame.shape}")
    raster = np.clip(np.rint(frame * 255.0), 0, 255).astype(np.uint8)
    h, w, _ = raster.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + raster.tobytes()


def read_ppm(path) -> np.ndarray:
    return decode_ppm(Path(path).read_bytes())


def write_ppm(path, frame: np.ndarray) -> None:
    Path(path).write_bytes(encode_ppm(frame))


@dataclass
class VideoManifest:
    width: int
    height: int
    frames: list
    fps: float = 30.0
    color_format: str = "rgb8"
    frame_count: int | None = None
    root: Path = field(default=Path("."), repr=False)

    def __post_init__(self):
        if self.frame_count is None:
            self.frame_count = len(self.frames)
        if self.frame_count != len(self.frames):
            raise FrameFormatError(f"frame_count {self.frame_count} but {len(self.frames)} frame files listed")
        if self.width < 1 or self.height < 1 or not self.frames:
            raise FrameFormatError("manifest needs positive dimensions and at least one frame")
        if self.color_format != "rgb8":
            raise FrameFormatError(f"unsupported color format {self.color_format!r}")

    @classmethod
    def load(cls, path) -> "VideoManifest":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise FrameFormatError(f"manifest is not valid JSON: {exc}") from exc
        allowed = {"width", "height", "frames", "fps", "color_format", "frame_count"}
        unknown = set(raw) - allowed
        if unknown:
            raise FrameFormatError(f"unknown manifest keys: {sorted(unknown)}")
        try:
            return cls(root=path.parent, **raw)
        except TypeError as exc:
            raise FrameFormatError(f"incomplete manifest: {exc}") from exc

    def save(self, path) -> None:
        d = asdict(self)
        d.pop("root")
        Path(path).write_text(json.dumps(d, indent=2))

    def paths(self) -> list[Path]:
        return [self.root / f for f in self.frames]


def load_frames(manifest_path) -> np.ndarray:
    """All frames of a manifest as ``[N, H, W, 3]`` in [0, 1]."""
    manifest = VideoManifest.load(manifest_path)
    frames = []
    for p in manifest.paths():
        if not p.exists():
            raise FileNotFoundError(f"frame file missing: {p}")
        frame = read_ppm(p)
        if frame.shape[:2] != (manifest.height, manifest.width):
            raise FrameFormatError(f"{p.name} is {frame.shape[1]}x{frame.shape[0]}, manifest says {manifest.width}x{manifest.height}")
        frames.append(frame)
    return np.stack(frames)


def write_frames(out_dir, frames, names=None, fps: float = 30.0) -> VideoManifest:
    """Write PPM frames plus a ``manifest.json`` describing them."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = list(frames)
    names = names or [f"frame_{i:06d}.ppm" for i in range(len(frames))]
    for name, frame in zip(names, frames):
        write_ppm(out_dir / name, frame)
    h, w = frames[0].shape[:2]
    manifest = VideoManifest(width=w, height=h, frames=list(names), fps=fps, root=out_dir)
    manifest.save(out_dir / "manifest.json")
    return manifest
