"""The ``.linr`` container.

Layout, all integers little-endian::

    b"LINR"  u16 version
    u32 header_len, header (canonical JSON, UTF-8), u32 header_crc32
    u16 n_sections
    n_sections x [u8 name_len, name, u32 offset, u32 length, u32 crc32]
    section payloads, back to back, offsets relative to the first payload
    u32 crc32 of every preceding byte

Sections:

``latents``     f32 ``[N, D]``, full precision
``base``        f32 base layers and output head, full precision
``projection``  f32 latent-to-embedding map (only when trained with one)
``qparams``     per quantised tensor ``f32 min, f32 max, f32 scale``
``codebook``    canonical Huffman code lengths
``codes``       ``u32 n_symbols, u32 n_bits`` then the packed codewords of
                every quantised tensor's codes, concatenated
"""

from __future__ import annotations

import copy
import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from ..model import LatentINR, ModelConfig
from .huffman import BitString, Codebook, CorruptStreamError, huffman_decode, huffman_encode
from .quantize import QuantizedTensor, dequantize, quantize

MAGIC = b"LINR"
VERSION = 1
FULL_PRECISION = ("latents", "base", "projection")


class BitstreamError(ValueError):
    pass


class ChecksumError(BitstreamError):
    pass


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def section_of(name: str, quantize_hash_tables: bool = True) -> str:
    if name == "latents":
        return "latents"
    if name == "projection.weight":
        return "projection"
    if name.startswith("hyper."):
        return "quantized"
    if name.startswith("encoding."):
        return "quantized" if quantize_hash_tables else "base"
    return "base"


@dataclass
class Bitstream:
    header: dict
    sections: dict = field(default_factory=dict)

    def to_bytes(self) -> bytes:
        head = _canonical_json(self.header)
        out = [MAGIC, struct.pack("<HI", VERSION, len(head)), head, struct.pack("<I", zlib.crc32(head))]
        out.append(struct.pack("<H", len(self.sections)))
        offset = 0
        for name, payload in self.sections.items():
            raw = name.encode("ascii")
            out.append(struct.pack("<B", len(raw)) + raw + struct.pack("<III", offset, len(payload), zlib.crc32(payload)))
            offset += len(payload)
        out.extend(self.sections.values())
        body = b"".join(out)
        return body + struct.pack("<I", zlib.crc32(body))

    @classmethod
    def from_bytes(cls, data: bytes) -> "Bitstream":
        if len(data) < 10 or data[:4] != MAGIC:
            raise BitstreamError("not a .linr stream (bad magic)")
        if len(data) < 14:
            raise BitstreamError("truncated stream")
        (stream_crc,) = struct.unpack_from("<I", data, len(data) - 4)
        data = data[:-4]
        if zlib.crc32(data) != stream_crc:
            raise ChecksumError("stream CRC mismatch (corrupted or truncated)")
        version, head_len = struct.unpack_from("<HI", data, 4)
        if version != VERSION:
            raise BitstreamError(f"unsupported .linr version {version}")
        pos = 10
        if pos + head_len + 6 > len(data):
            raise BitstreamError("truncated header")
        head = data[pos:pos + head_len]
        pos += head_len
        (head_crc,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if zlib.crc32(head) != head_crc:
            raise ChecksumError("header CRC mismatch")
        header = json.loads(head.decode("utf-8"))
        (n_sections,) = struct.unpack_from("<H", data, pos)
        pos += 2
        table = []
        for _ in range(n_sections):
            if pos + 1 > len(data):
                raise BitstreamError("truncated section table")
            n = data[pos]
            if pos + 1 + n + 12 > len(data):
                raise BitstreamError("truncated section table")
            name = data[pos + 1:pos + 1 + n].decode("ascii")
            offset, length, crc = struct.unpack_from("<III", data, pos + 1 + n)
            table.append((name, offset, length, crc))
            pos += 1 + n + 12
        sections, expected = {}, 0
        for name, offset, length, crc in table:
            if offset != expected:
                raise BitstreamError(f"section {name!r} offset {offset} != {expected}")
            payload = data[pos + offset:pos + offset + length]
            if len(payload) != length:
                raise BitstreamError(f"section {name!r} truncated")
            if zlib.crc32(payload) != crc:
                raise ChecksumError(f"CRC mismatch in section {name!r}")
            sections[name] = payload
            expected += length
        if pos + expected != len(data):
            raise BitstreamError(f"{len(data) - pos - expected} bytes beyond the section table")
        return cls(header, sections)


def _f32(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def quantize_model(model: LatentINR, bits: int = 8, quantize_hash_tables: bool = True) -> dict:
    """Quantised records for every parameter stored lossy, in parameter order.

    Records attached to a deserialised model are reused while the parameter
    still equals their dequantised value, so a decoded model re-encodes to
    the same bytes.
    """
    records = getattr(model, "quant_records", {}) or {}
    out = {}
    for name, p in model.named_parameters().items():
        if section_of(name, quantize_hash_tables) != "quantized":
            continue
        prev = records.get(name)
        if prev is not None and prev.bits == bits and np.array_equal(dequantize(prev), p.data):
            out[name] = prev
        else:
            out[name] = quantize(p.data, bits)
    return out


def serialize_model(model: LatentINR, bits: int = 8, quantize_hash_tables: bool = True) -> Bitstream:
    params = model.named_parameters()
    records = quantize_model(model, bits, quantize_hash_tables)
    tensors = [
        {"name": name, "shape": list(p.shape), "section": section_of(name, quantize_hash_tables)}
        for name, p in params.items()
    ]
    header = {
        "model": model.config.to_dict(),
        "n_frames": model.n_frames,
        "height": model.height,
        "width": model.width,
        "bits": bits,
        "holdout_alpha": model.holdout_alpha,
        "quantize_hash_tables": quantize_hash_tables,
        "tensors": tensors,
    }
    sections = {"latents": _f32(model.latents.data)}
    sections["base"] = b"".join(_f32(params[t["name"]].data) for t in tensors if t["section"] == "base")
    if model.projection is not None:
        sections["projection"] = _f32(model.projection.data)
    if records:
        sections["qparams"] = b"".join(struct.pack("<fff", q.phi_min, q.phi_max, q.scale) for q in records.values())
        symbols = np.concatenate([q.codes for q in records.values()])
        payload, book = huffman_encode(symbols)
        sections["codebook"] = book.to_bytes()
        sections["codes"] = struct.pack("<II", len(symbols), payload.n_bits) + payload.data
    return Bitstream(header, sections)


def _read_f32(buf: bytes, offset: int, shape) -> tuple[np.ndarray, int]:
    n = int(np.prod(shape, dtype=np.int64))
    if offset + 4 * n > len(buf):
        raise BitstreamError("section shorter than its tensors")
    arr = np.frombuffer(buf, dtype="<f4", count=n, offset=offset).astype(np.float64).reshape(shape)
    return arr, offset + 4 * n


def deserialize_model(stream) -> LatentINR:
    """Rebuild the (quantised) model; ``stream`` is a Bitstream or raw bytes."""
    if isinstance(stream, (bytes, bytearray, memoryview)):
        stream = Bitstream.from_bytes(bytes(stream))
    h = stream.header
    try:
        config = ModelConfig.from_dict(h["model"])
        model = LatentINR(config, h["n_frames"], h["height"], h["width"], seed=0)
        bits = int(h["bits"])
        tensors = h["tensors"]
    except (KeyError, TypeError, ValueError) as exc:
        raise BitstreamError(f"malformed header: {exc}") from exc
    dtype = config.np_dtype
    if any(t["name"] == "projection.weight" for t in tensors):
        shape = next(t["shape"] for t in tensors if t["name"] == "projection.weight")
        model.add_projection(shape[1])
    params = model.named_parameters()
    if [t["name"] for t in tensors] != list(params):
        raise BitstreamError("tensor list does not match the model layout")
    for t in tensors:
        if list(params[t["name"]].shape) != list(t["shape"]):
            raise BitstreamError(f"shape mismatch for {t['name']}")

    def need(name):
        if name not in stream.sections:
            raise BitstreamError(f"missing section {name!r}")
        return stream.sections[name]

    offsets = {"latents": 0, "base": 0, "projection": 0}
    quantized = [t for t in tensors if t["section"] == "quantized"]
    for t in tensors:
        sec = t["section"]
        if sec in FULL_PRECISION:
            arr, offsets[sec] = _read_f32(need(sec), offsets[sec], t["shape"])
            params[t["name"]].data = arr.astype(dtype)
    for sec, used in offsets.items():
        if sec in stream.sections and used != len(stream.sections[sec]):
            raise BitstreamError(f"section {sec!r} has {len(stream.sections[sec]) - used} unused bytes")

    records = {}
    if quantized:
        qparams = need("qparams")
        if len(qparams) != 12 * len(quantized):
            raise BitstreamError("qparams size does not match the quantised tensor count")
        codes_sec = need("codes")
        if len(codes_sec) < 8:
            raise BitstreamError("truncated codes section")
        n_symbols, n_bits = struct.unpack_from("<II", codes_sec, 0)
        book = Codebook.from_bytes(need("codebook"))
        if (n_bits + 7) // 8 != len(codes_sec) - 8:
            raise BitstreamError("codes payload length does not match its bit count")
        try:
            symbols = huffman_decode(BitString(codes_sec[8:], n_bits), book, n_symbols)
        except CorruptStreamError as exc:
            raise BitstreamError(f"entropy-coded payload is corrupt: {exc}") from exc
        pos = 0
        for i, t in enumerate(quantized):
            lo, hi, scale = struct.unpack_from("<fff", qparams, 12 * i)
            n = int(np.prod(t["shape"], dtype=np.int64))
            q = QuantizedTensor(symbols[pos:pos + n].copy(), lo, hi, scale, tuple(t["shape"]), bits)
            pos += n
            records[t["name"]] = q
            params[t["name"]].data = dequantize(q).astype(dtype)
        if pos != n_symbols:
            raise BitstreamError(f"{n_symbols - pos} surplus symbols in codes section")
    for p in params.values():
        p.grad = np.zeros_like(p.data)
    model.quant_records = records
    model.holdout_alpha = int(h.get("holdout_alpha", 0))
    return model


def compressed_copy(model: LatentINR, bits: int = 8, quantize_hash_tables: bool = True) -> LatentINR:
    """The model exactly as a decoder would reconstruct it, without a byte round trip."""
    out = copy.deepcopy(model)
    params = out.named_parameters()
    records = quantize_model(model, bits, quantize_hash_tables)
    for name, p in params.items():
        if name in records:
            p.data = dequantize(records[name]).astype(p.data.dtype)
        else:
            p.data = p.data.astype(np.float32).astype(p.data.dtype)
    out.quant_records = records
    return out


def save(model: LatentINR, path, bits: int = 8, quantize_hash_tables: bool = True) -> int:
    data = serialize_model(model, bits, quantize_hash_tables).to_bytes()
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)


def load(path) -> LatentINR:
    with open(path, "rb") as fh:
        return deserialize_model(fh.read())


def bpp(stream_bytes, n_frames: int, height: int, width: int) -> float:
    """Bits per pixel: ``8 * len(bytes) / (n_frames * H * W)``."""
    if n_frames <= 0 or height <= 0 or width <= 0:
        raise ValueError("frame count and dimensions must be positive")
    size = stream_bytes if isinstance(stream_bytes, int) else len(stream_bytes)
    return 8.0 * size / (n_frames * height * width)
