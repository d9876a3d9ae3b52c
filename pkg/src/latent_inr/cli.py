"""``latent-inr`` command line.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
Errors are printed to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import codec
from .config import RunConfig, load_run_config
from .io import FrameFormatError, load_frames, write_frames
from .model import ConfigError, init_model
from .numerics import NonFiniteError
from .tasks import build_index, label_predicate, psnr, query, recall_at_k, ssim
from .tasks.embeddings import EmbeddingFormatError, export_latents, frame_id, load_embeddings
from .tasks.interpolation import heldout_latents, interpolate_latents
from .training import AlignmentTarget, MissingEmbeddingError, TrainingDivergedError, fit

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4

log = logging.getLogger("latent_inr")


class UsageError(Exception):
    pass


def _single_thread(enabled: bool):
    if not enabled:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=1)


def _alignment_vectors(path, n_frames: int) -> np.ndarray:
    table = load_embeddings(path)
    wanted = [frame_id(t) for t in range(n_frames)]
    if set(wanted) <= set(table.ids):
        return np.stack([table.row(k) for k in wanted]).astype(np.float64)
    if len(table) != n_frames:
        raise MissingEmbeddingError(f"embedding table has {len(table)} rows for {n_frames} frames")
    return table.vectors.astype(np.float64)


def cmd_encode(args) -> dict:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.train.seed = args.seed
    if args.holdout_alpha is not None:
        cfg.train.holdout_alpha = args.holdout_alpha
    if args.steps is not None:
        cfg.train.steps = args.steps
    if args.bits is not None:
        cfg.codec.bits = args.bits
    if args.keep_hash_tables:
        cfg.codec.quantize_hash_tables = False
    cfg.train.validate()
    frames = load_frames(args.manifest)
    n, h, w, _ = frames.shape
    align = None
    if args.embeddings:
        weight = cfg.train.align_lambda if args.align_lambda is None else args.align_lambda
        align = AlignmentTarget(_alignment_vectors(args.embeddings, n), weight)
    elif args.align_lambda is not None:
        raise UsageError("--lambda needs --embeddings")
    with _single_thread(cfg.train.deterministic):
        model = init_model(cfg.model, n, h, w, seed=cfg.train.seed)
        history = fit(model, frames, cfg.train, align)
        size = codec.save(model, args.out, cfg.codec.bits, cfg.codec.quantize_hash_tables)
    if args.history:
        history.to_csv(args.history)
    return {
        "output": str(args.out),
        "bytes": size,
        "bpp": codec.bpp(size, n, h, w),
        "final_loss": history.losses[-1] if history.losses else None,
        "steps": cfg.train.steps,
    }


def cmd_decode(args) -> dict:
    model = codec.load(args.input)
    height = args.height or model.height
    width = args.width or model.width
    frames = [model.decode(t, height, width) for t in range(model.n_frames)]
    write_frames(args.out, frames)
    return {"output": str(args.out), "frames": len(frames), "height": height, "width": width}


def cmd_interp(args) -> dict:
    if args.alpha < 2:
        raise UsageError("--alpha must be >= 2")
    model = codec.load(args.input)
    z = model.latents.data
    if model.holdout_alpha:
        if args.alpha != model.holdout_alpha:
            raise ValueError(f"model was trained with holdout stride {model.holdout_alpha}, not {args.alpha}")
        items = sorted(heldout_latents(z, args.alpha).items())
        names = [frame_id(t) + ".ppm" for t, _ in items]
        frames = [model.decode_latent(latent) for _, (latent, _) in items]
    else:
        names, frames = [], []
        for t in range(model.n_frames - 1):
            for i, latent in enumerate(interpolate_latents(z[t], z[t + 1], args.alpha), start=1):
                names.append(frame_id(t * args.alpha + i) + ".ppm")
                frames.append(model.decode_latent(latent))
    if not frames:
        raise ValueError("nothing to interpolate")
    write_frames(args.out, frames, names)
    return {"output": str(args.out), "frames": len(frames), "names": names}


def cmd_eval(args) -> dict:
    data = Path(args.input).read_bytes()
    model = codec.deserialize_model(data)
    frames = load_frames(args.manifest)
    if frames.shape[:3] != (model.n_frames, model.height, model.width):
        raise FrameFormatError(f"manifest frames {frames.shape[:3]} do not match the stream")
    psnrs, ssims = [], []
    for t in range(model.n_frames):
        pred = model.decode(t)
        psnrs.append(psnr(pred, frames[t]))
        ssims.append(ssim(pred, frames[t]) if min(model.height, model.width) >= 11 else None)
    valid_ssim = [s for s in ssims if s is not None]
    return {
        "psnr_mean": float(np.mean(psnrs)),
        "psnr": psnrs,
        "ssim_mean": float(np.mean(valid_ssim)) if valid_ssim else None,
        "ssim": ssims,
        "bytes": len(data),
        "bpp": codec.bpp(len(data), model.n_frames, model.height, model.width),
        "n_frames": model.n_frames,
        "height": model.height,
        "width": model.width,
    }


def cmd_retrieve(args) -> dict:
    key_labels = json.loads(Path(args.key_labels).read_text()) if args.key_labels else {}
    vectors, ids, meta = [], [], []
    for path in args.inputs:
        model = codec.load(path)
        video = Path(path).stem
        z = model.latents.data
        if model.projection is not None:
            z = z @ model.projection.data
        for t in range(model.n_frames):
            key = f"{video}/{frame_id(t)}"
            ids.append(key)
            vectors.append(z[t])
            meta.append({"video": video, "frame": t, **key_labels.get(key, {})})
    vectors = np.stack(vectors)
    queries = load_embeddings(args.queries)
    if queries.dim != vectors.shape[1]:
        raise ValueError(f"query dim {queries.dim} does not match key dim {vectors.shape[1]}")
    index = build_index(vectors, ids, meta, pooling=args.pool)
    results = [
        {"query": qid, "ranked": [[key, score] for key, score in query(index, q, args.k)]}
        for qid, q in zip(queries.ids, queries.vectors)
    ]
    out = {"pooling": args.pool, "k": args.k, "results": results}
    if queries.labels:
        labels = [queries.labels.get(qid, {}) for qid in queries.ids]
        ks = sorted({1, 5, 10, args.k})
        res = recall_at_k(index, queries.vectors, label_predicate(labels, args.match), ks, queries.ids)
        out["recall"] = res.to_dict()
    return out


def cmd_export(args) -> dict:
    model = codec.load(args.input)
    table = export_latents(model, args.out)
    return {"output": str(args.out), "count": len(table), "dim": table.dim}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latent-inr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="train on a PPM sequence and write a .linr stream")
    p.add_argument("manifest")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings", help=".lemb table with one target vector per frame")
    p.add_argument("--lambda", dest="align_lambda", type=float)
    p.add_argument("--holdout-alpha", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--bits", type=int)
    p.add_argument("--keep-hash-tables", action="store_true", help="store hash tables at full precision")
    p.add_argument("--history", help="write the loss history as CSV")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="render every frame, optionally at another resolution")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("interp", help="synthesise frames by latent interpolation")
    p.add_argument("input")
    p.add_argument("--alpha", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_interp)

    p = sub.add_parser("eval", help="PSNR/SSIM/BPP report as JSON")
    p.add_argument("input")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("retrieve", help="rank frame or video latents against query embeddings")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--pool", choices=["frame", "video"], default="frame")
    p.add_argument("--match", default="video", help="label field deciding positives for recall")
    p.add_argument("--key-labels", help="JSON mapping key id to labels")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("export-latents", help="write the latent dictionary as a .lemb table")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def _fail(code: int, exc: Exception) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if getattr(args, "k", 1) < 1:
        return _fail(EXIT_USAGE, UsageError("--k must be >= 1"))
    try:
        result = args.func(args)
    except (UsageError, ConfigError) as exc:
        return _fail(EXIT_USAGE, exc)
    except (TrainingDivergedError, NonFiniteError) as exc:
        return _fail(EXIT_NUMERIC, exc)
    except (codec.BitstreamError, codec.CorruptStreamError, EmbeddingFormatError, FrameFormatError,
            MissingEmbeddingError, FileNotFoundError, ValueError, OSError) as exc:
        return _fail(EXIT_DATA, exc)
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
