"""Canonical Huffman coding over non-negative integer symbols."""

from __future__ import annotations

import heapq
import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .. import kernels

MAX_CODE_LENGTH = 64


class CorruptStreamError(ValueError):
    pass


class BitString(NamedTuple):
    data: bytes
    n_bits: int


@dataclass
class Codebook:
    """Code length per symbol; the codewords follow from canonical ordering."""

    lengths: dict

    def ordered(self) -> list[tuple[int, int]]:
        """``(symbol, length)`` in canonical order: by length, then symbol."""
        return sorted(self.lengths.items(), key=lambda kv: (kv[1], kv[0]))

    def codes(self) -> dict:
        out, code, prev = {}, 0, 0
        for sym, length in self.ordered():
            code <<= length - prev
            out[sym] = code
            code += 1
            prev = length
        return out

    @property
    def max_length(self) -> int:
        return max(self.lengths.values())

    def tables(self, n_table: int | None = None):
        """Dense lookup arrays ``(codes, lengths)`` indexed by symbol."""
        size = n_table or (max(self.lengths) + 1)
        codes = np.zeros(size, dtype=np.uint64)
        lengths = np.zeros(size, dtype=np.uint8)
        for sym, code in self.codes().items():
            codes[sym] = code
            lengths[sym] = self.lengths[sym]
        return codes, lengths

    def decode_tables(self):
        counts = np.zeros(self.max_length + 1, dtype=np.int64)
        for length in self.lengths.values():
            counts[length] += 1
        symbols = np.array([s for s, _ in self.ordered()], dtype=np.int64)
        return counts, symbols

    def to_bytes(self) -> bytes:
        """``u32 count`` then ``count x (u16 symbol, u8 length)`` in canonical order."""
        items = self.ordered()
        parts = [struct.pack("<I", len(items))]
        for sym, length in items:
            if sym > 0xFFFF:
                raise ValueError("codebook serialisation supports symbols below 65536")
            parts.append(struct.pack("<HB", sym, length))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Codebook":
        if len(data) < 4:
            raise CorruptStreamError("truncated codebook")
        (count,) = struct.unpack_from("<I", data, 0)
        if len(data) != 4 + 3 * count:
            raise CorruptStreamError("codebook length does not match its entry count")
        lengths = {}
        for i in range(count):
            sym, length = struct.unpack_from("<HB", data, 4 + 3 * i)
            if length == 0 or length > MAX_CODE_LENGTH or sym in lengths:
                raise CorruptStreamError("invalid codebook entry")
            lengths[sym] = length
        book = cls(lengths)
        if count:
            _check_kraft(book)
        return book


def _check_kraft(book: Codebook) -> None:
    total = sum(2.0 ** -length for length in book.lengths.values())
    if total > 1.0 + 1e-12:
        raise CorruptStreamError("code lengths violate the Kraft inequality")


def code_lengths(frequencies: dict) -> dict:
    """Huffman code lengths; merges prefer lower frequency, then lower smallest symbol."""
    if not frequencies:
        raise ValueError("no symbols")
    if len(frequencies) == 1:
        return {next(iter(frequencies)): 1}
    leaves = sorted(frequencies)
    parent = [-1] * len(leaves)
    heap = [(frequencies[s], s, i) for i, s in enumerate(leaves)]
    heapq.heapify(heap)
    while len(heap) > 1:
        f1, s1, n1 = heapq.heappop(heap)
        f2, s2, n2 = heapq.heappop(heap)
        node = len(parent)
        parent.append(-1)
        parent[n1] = parent[n2] = node
        heapq.heappush(heap, (f1 + f2, min(s1, s2), node))
    # parents are created after their children, so walk nodes top-down
    node_depth = [0] * len(parent)
    for node in range(len(parent) - 2, -1, -1):
        node_depth[node] = node_depth[parent[node]] + 1
    depth = {s: node_depth[i] for i, s in enumerate(leaves)}
    if max(depth.values()) > MAX_CODE_LENGTH:
        raise ValueError("code length exceeds 64 bits")
    return depth


def build_codebook(symbols) -> Codebook:
    symbols = np.asarray(symbols)
    values, counts = np.unique(symbols, return_counts=True)
    return Codebook(code_lengths({int(v): int(c) for v, c in zip(values, counts)}))


def huffman_encode(symbols) -> tuple[BitString, Codebook]:
    """Pack ``symbols`` MSB-first with a canonical code built from their frequencies."""
    symbols = np.asarray(symbols, dtype=np.int64).ravel()
    if symbols.size == 0:
        raise ValueError("cannot encode an empty stream")
    if symbols.min() < 0:
        raise ValueError("symbols must be non-negative")
    book = build_codebook(symbols)
    codes, lengths = book.tables()
    data, n_bits = kernels.huffman_pack(symbols, codes, lengths)
    return BitString(data, n_bits), book


def huffman_decode(bits: BitString, book: Codebook, n_symbols: int) -> np.ndarray:
    counts, ordered = book.decode_tables()
    try:
        return kernels.huffman_unpack(bits.data, bits.n_bits, n_symbols, counts, ordered)
    except ValueError as exc:
        raise CorruptStreamError(str(exc)) from exc
