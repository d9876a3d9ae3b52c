"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--points 65536]
"""

from __future__ import annotations

import argparse
import json
import timeit

import numpy as np

from latent_inr import _fallback
from latent_inr.codec.huffman import build_codebook
from latent_inr.encoding import HashGrid, HashGridConfig

try:
    from latent_inr import _kernels as compiled
except ImportError:  # pure-Python install
    compiled = None


def cases(n_points: int, n_symbols: int):
    rng = np.random.default_rng(0)
    grid = HashGrid(HashGridConfig(levels=8, log2_table_size=14, features=2, base_resolution=16, max_resolution=512), rng)
    table = np.ascontiguousarray(grid.tables.data)
    meta = (grid.offsets, grid.resolutions, grid.sizes, grid.dense)
    coords = rng.uniform(0, 1, (n_points, 2))
    _, idx, w = _fallback.hashgrid_forward(coords, table, *meta)
    grad = rng.normal(size=(n_points, grid.out_dim))

    symbols = np.clip(rng.normal(128, 20, n_symbols), 0, 255).astype(np.int64)
    book = build_codebook(symbols)
    codes, lengths = book.tables()
    data, n_bits = _fallback.huffman_pack(symbols, codes, lengths)
    counts, ordered = book.decode_tables()

    return {
        "hashgrid_forward": lambda k: k.hashgrid_forward(coords, table, *meta),
        "hashgrid_backward": lambda k: k.hashgrid_backward(grad, idx, w, len(table)),
        "huffman_pack": lambda k: k.huffman_pack(symbols, codes, lengths),
        "huffman_unpack": lambda k: k.huffman_unpack(data, n_bits, len(symbols), counts, ordered),
    }


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--points", type=int, default=65536)
    parser.add_argument("--symbols", type=int, default=1_000_000)
    parser.add_argument("--json", action="store_true", help="print results as JSON")
    args = parser.parse_args(argv)

    backends = {"fallback": _fallback}
    if compiled is not None:
        backends["cython"] = compiled
    rows = []
    for name, fn in cases(args.points, args.symbols).items():
        row = {"kernel": name}
        for label, mod in backends.items():
            fn(mod)  # warm up
            row[label] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        if "cython" in row:
            row["speedup"] = row["fallback"] / row["cython"]
        rows.append(row)

    if args.json:
        print(json.dumps(rows, indent=2))
        return
    print(f"{'kernel':<20}{'fallback (s)':>14}{'cython (s)':>14}{'speedup':>10}")
    for row in rows:
        cy = f"{row['cython']:.4f}" if "cython" in row else "n/a"
        sp = f"{row['speedup']:.1f}x" if "speedup" in row else ""
        print(f"{row['kernel']:<20}{row['fallback']:>14.4f}{cy:>14}{sp:>10}")


if __name__ == "__main__":
    main()
