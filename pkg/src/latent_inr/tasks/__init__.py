from .embeddings import EmbeddingTable, export_latents, load_embeddings, save_embeddings
from .interpolation import evaluate_interpolation, frame_hold, heldout_latents, interpolate_latents
from .metrics import psnr, ssim
from .retrieval import RetrievalIndex, build_index, label_predicate, query, recall_at_k

__all__ = [
    "EmbeddingTable",
    "RetrievalIndex",
    "build_index",
    "evaluate_interpolation",
    "export_latents",
    "frame_hold",
    "heldout_latents",
    "interpolate_latents",
    "label_predicate",
    "load_embeddings",
    "psnr",
    "query",
    "recall_at_k",
    "save_embeddings",
    "ssim",
]
