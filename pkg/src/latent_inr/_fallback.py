"""Pure numpy implementations of the hot kernels.

Signatures match the compiled ``_kernels`` module exactly; ``kernels.py``
picks one at import time.
"""

from __future__ import annotations

import numpy as np

PRIME_Y = np.uint64(2654435761)


def hashgrid_forward(coords, table, offsets, resolutions, sizes, dense):
    """Bilinear lookup of every coordinate at every level.

    Returns ``(features[B, L*F], indices[B, L, 4], weights[B, L, 4])``; the
    last two are kept for the backward scatter.  Corner order is
    (x0,y0), (x1,y0), (x0,y1), (x1,y1).
    """
    coords = np.asarray(coords, dtype=np.float64)
    n = coords.shape[0]
    n_levels = len(resolutions)
    n_feat = table.shape[1]
    idx = np.empty((n, n_levels, 4), dtype=np.int64)
    w = np.empty((n, n_levels, 4), dtype=np.float64)
    out = np.empty((n, n_levels * n_feat), dtype=table.dtype)
    for lvl in range(n_levels):
        res = int(resolutions[lvl])
        pos = coords * res
        cell = np.minimum(np.floor(pos), res - 1).astype(np.int64)
        cell = np.maximum(cell, 0)
        frac = pos - cell
        fx, fy = frac[:, 0], frac[:, 1]
        x0, y0 = cell[:, 0], cell[:, 1]
        corners = ((x0, y0), (x0 + 1, y0), (x0, y0 + 1), (x0 + 1, y0 + 1))
        weights = ((1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy)
        for k, (cx, cy) in enumerate(corners):
            if dense[lvl]:
                local = cy * (res + 1) + cx
            else:
                hx = cx.astype(np.uint64)
                hy = cy.astype(np.uint64) * PRIME_Y
                local = ((hx ^ hy) % np.uint64(sizes[lvl])).astype(np.int64)
            idx[:, lvl, k] = local + offsets[lvl]
            w[:, lvl, k] = weights[k]
        rows = table[idx[:, lvl, :]]  # [B, 4, F]
        out[:, lvl * n_feat:(lvl + 1) * n_feat] = np.einsum("bk,bkf->bf", w[:, lvl, :], rows)
    return out, idx, w


def hashgrid_backward(grad_out, idx, w, n_rows):
    n, n_levels, _ = idx.shape
    n_feat = grad_out.shape[1] // n_levels
    grad = np.zeros((n_rows, n_feat), dtype=grad_out.dtype)
    g = grad_out.reshape(n, n_levels, n_feat)
    flat = idx.reshape(-1)
    for f in range(n_feat):
        contrib = (w * g[:, :, f:f + 1]).reshape(-1)
        grad[:, f] += np.bincount(flat, weights=contrib, minlength=n_rows)
    return grad


def huffman_pack(symbols, codes, lengths):
    """Concatenate MSB-first codewords; returns ``(bytes, n_bits)``."""
    symbols = np.asarray(symbols, dtype=np.int64)
    lens = lengths[symbols].astype(np.int64)
    words = codes[symbols].astype(np.uint64)
    total = int(lens.sum())
    if total == 0:
        return b"", 0
    owner = np.repeat(np.arange(len(symbols)), lens)
    starts = np.cumsum(lens) - lens
    within = np.arange(total) - starts[owner]
    shift = (lens[owner] - 1 - within).astype(np.uint64)
    bits = ((words[owner] >> shift) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits).tobytes(), total


def huffman_unpack(data, n_bits, n_symbols, counts, sorted_symbols):
    """Canonical decoding; raises ValueError on truncated or invalid input."""
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    if n_bits > 8 * len(buf):
        raise ValueError("bit count exceeds payload length")
    bits = np.unpackbits(buf)[:n_bits].tolist()
    counts = [int(c) for c in counts]
    syms = [int(s) for s in sorted_symbols]
    max_len = len(counts) - 1
    out = np.empty(n_symbols, dtype=np.uint32)
    pos = 0
    for i in range(n_symbols):
        code = first = index = 0
        for length in range(1, max_len + 1):
            if pos >= n_bits:
                raise ValueError(f"bitstream truncated at symbol {i}")
            code |= bits[pos]
            pos += 1
            count = counts[length]
            if code - first < count:
                out[i] = syms[index + code - first]
                break
            index += count
            first = (first + count) << 1
            code <<= 1
        else:
            raise ValueError(f"invalid prefix at symbol {i}")
    if pos != n_bits:
        raise ValueError(f"{n_bits - pos} trailing bits after last symbol")
    return out
