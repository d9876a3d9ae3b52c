# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hash-grid and Huffman kernels.

Mirrors ``_fallback`` signature for signature; results are bit-identical
for the Huffman routines and agree to rounding for the hash grid.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor
from libc.stdint cimport int64_t, uint8_t, uint32_t, uint64_t

cnp.import_array()

ctypedef fused real_t:
    float
    double


def hashgrid_forward(coords, real_t[:, ::1] table, offsets, resolutions, sizes, dense):
    cdef double[:, ::1] c = np.ascontiguousarray(coords, dtype=np.float64)
    cdef int64_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef int64_t[::1] res_arr = np.ascontiguousarray(resolutions, dtype=np.int64)
    cdef uint64_t[::1] size_arr = np.ascontiguousarray(sizes, dtype=np.uint64)
    cdef uint8_t[::1] dense_arr = np.ascontiguousarray(dense, dtype=np.uint8)
    cdef Py_ssize_t n = c.shape[0]
    cdef Py_ssize_t n_levels = res_arr.shape[0]
    cdef Py_ssize_t n_feat = table.shape[1]
    dtype = np.float32 if real_t is float else np.float64
    out_np = np.empty((n, n_levels * n_feat), dtype=dtype)
    idx_np = np.empty((n, n_levels, 4), dtype=np.int64)
    w_np = np.empty((n, n_levels, 4), dtype=np.float64)
    cdef real_t[:, ::1] out = out_np
    cdef int64_t[:, :, ::1] idx = idx_np
    cdef double[:, :, ::1] w = w_np
    cdef Py_ssize_t b, lvl, k, f
    cdef int64_t res, x0, y0, cx, cy, local
    cdef double px, py, fx, fy, acc
    cdef double wk[4]
    cdef int64_t ik[4]
    with nogil:
        for b in range(n):
            for lvl in range(n_levels):
                res = res_arr[lvl]
                px = c[b, 0] * res
                py = c[b, 1] * res
                x0 = <int64_t>floor(px)
                y0 = <int64_t>floor(py)
                if x0 > res - 1:
                    x0 = res - 1
                if y0 > res - 1:
                    y0 = res - 1
                if x0 < 0:
                    x0 = 0
                if y0 < 0:
                    y0 = 0
                fx = px - x0
                fy = py - y0
                wk[0] = (1 - fx) * (1 - fy)
                wk[1] = fx * (1 - fy)
                wk[2] = (1 - fx) * fy
                wk[3] = fx * fy
                for k in range(4):
                    cx = x0 + (k & 1)
                    cy = y0 + (k >> 1)
                    if dense_arr[lvl]:
                        local = cy * (res + 1) + cx
                    else:
                        local = <int64_t>((<uint64_t>cx ^ (<uint64_t>cy * <uint64_t>2654435761ULL)) % size_arr[lvl])
                    ik[k] = local + off[lvl]
                    idx[b, lvl, k] = ik[k]
                    w[b, lvl, k] = wk[k]
                for f in range(n_feat):
                    acc = 0.0
                    for k in range(4):
                        acc = acc + wk[k] * table[ik[k], f]
                    out[b, lvl * n_feat + f] = <real_t>acc
    return out_np, idx_np, w_np


def hashgrid_backward(real_t[:, ::1] grad_out, int64_t[:, :, ::1] idx, double[:, :, ::1] w, Py_ssize_t n_rows):
    cdef Py_ssize_t n = idx.shape[0]
    cdef Py_ssize_t n_levels = idx.shape[1]
    cdef Py_ssize_t n_feat = grad_out.shape[1] // n_levels
    dtype = np.float32 if real_t is float else np.float64
    grad_np = np.zeros((n_rows, n_feat), dtype=dtype)
    cdef real_t[:, ::1] grad = grad_np
    cdef Py_ssize_t b, lvl, k, f
    cdef double g
    with nogil:
        for b in range(n):
            for lvl in range(n_levels):
                for f in range(n_feat):
                    g = grad_out[b, lvl * n_feat + f]
                    for k in range(4):
                        grad[idx[b, lvl, k], f] += <real_t>(w[b, lvl, k] * g)
    return grad_np


def huffman_pack(symbols, codes, lengths):
    cdef int64_t[::1] sym = np.ascontiguousarray(symbols, dtype=np.int64)
    cdef uint64_t[::1] code_tab = np.ascontiguousarray(codes, dtype=np.uint64)
    cdef uint8_t[::1] len_tab = np.ascontiguousarray(lengths, dtype=np.uint8)
    cdef Py_ssize_t n = sym.shape[0]
    cdef Py_ssize_t i
    cdef int64_t total = 0
    for i in range(n):
        total += len_tab[sym[i]]
    if total == 0:
        return b"", 0
    out_np = np.zeros((total + 7) // 8, dtype=np.uint8)
    cdef uint8_t[::1] out = out_np
    cdef int64_t pos = 0
    cdef int length, j
    cdef uint64_t word
    with nogil:
        for i in range(n):
            length = len_tab[sym[i]]
            word = code_tab[sym[i]]
            for j in range(length - 1, -1, -1):
                if (word >> j) & 1:
                    out[pos >> 3] |= <uint8_t>(0x80 >> (pos & 7))
                pos += 1
    return out_np.tobytes(), int(total)


def huffman_unpack(data, int64_t n_bits, Py_ssize_t n_symbols, counts, sorted_symbols):
    cdef const uint8_t[::1] buf = np.frombuffer(bytes(data), dtype=np.uint8)
    if n_bits > 8 * buf.shape[0]:
        raise ValueError("bit count exceeds payload length")
    cdef int64_t[::1] cnt = np.ascontiguousarray(counts, dtype=np.int64)
    cdef int64_t[::1] syms = np.ascontiguousarray(sorted_symbols, dtype=np.int64)
    cdef int max_len = cnt.shape[0] - 1
    out_np = np.empty(n_symbols, dtype=np.uint32)
    cdef uint32_t[::1] out = out_np
    cdef int64_t pos = 0
    cdef int64_t code, first, index, count
    cdef Py_ssize_t i
    cdef int length
    cdef int status = 0
    cdef Py_ssize_t bad = 0
    with nogil:
        for i in range(n_symbols):
            code = 0
            first = 0
            index = 0
            status = 1
            for length in range(1, max_len + 1):
                if pos >= n_bits:
                    status = 2
                    break
                code |= (buf[pos >> 3] >> (7 - (pos & 7))) & 1
                pos += 1
                count = cnt[length]
                if code - first < count:
                    out[i] = <uint32_t>syms[index + code - first]
                    status = 0
                    break
                index += count
                first = (first + count) << 1
                code <<= 1
            if status != 0:
                bad = i
                break
    if status == 2:
        raise ValueError(f"bitstream truncated at symbol {bad}")
    if status == 1:
        raise ValueError(f"invalid prefix at symbol {bad}")
    if pos != n_bits:
        raise ValueError(f"{n_bits - pos} trailing bits after last symbol")
    return out_np
