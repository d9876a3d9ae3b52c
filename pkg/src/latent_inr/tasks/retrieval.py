"""Exact cosine retrieval over frame or pooled video keys."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

NORM_EPS = 1e-12


class MissingMetadataError(KeyError):
    pass


def _normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norms <= NORM_EPS):
        raise ValueError("cannot normalise a zero vector")
    return v / norms


@dataclass
class RetrievalIndex:
    ids: list
    keys: np.ndarray
    metadata: list
    pooling: str = "frame"

    @property
    def dim(self) -> int:
        return self.keys.shape[1]

    def __len__(self) -> int:
        return len(self.ids)


def build_index(vectors, ids: list, metadata: list, pooling: str = "frame", projection=None) -> RetrievalIndex:
    """Index frame vectors (``pooling="frame"``) or per-video means (``"video"``).

    ``metadata`` holds one dict per vector; video pooling groups on its
    ``"video"`` entry.  ``projection`` (``[D, E]``) maps latents into the
    query space before normalisation.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if len(metadata) != len(vectors) or len(ids) != len(vectors):
        raise MissingMetadataError("ids and metadata must cover every vector")
    if projection is not None:
        vectors = vectors @ np.asarray(projection, dtype=np.float64)
    if pooling == "frame":
        return RetrievalIndex(list(ids), _normalize(vectors), [dict(m) for m in metadata], "frame")
    if pooling != "video":
        raise ValueError(f"unknown pooling {pooling!r}")
    groups: dict = {}
    for i, meta in enumerate(metadata):
        if "video" not in meta:
            raise MissingMetadataError(f"no video label for {ids[i]!r}")
        groups.setdefault(meta["video"], []).append(i)
    video_ids = list(groups)
    pooled = np.stack([vectors[groups[v]].mean(axis=0) for v in video_ids])
    meta = []
    for v in video_ids:
        first = dict(metadata[groups[v][0]])
        first.pop("frame", None)
        first["video"] = v
        meta.append(first)
    return RetrievalIndex([str(v) for v in video_ids], _normalize(pooled), meta, "video")


def scores(index: RetrievalIndex, q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (index.dim,):
        raise ValueError(f"query has shape {q.shape}, index dim is {index.dim}")
    return index.keys @ _normalize(q)


def query(index: RetrievalIndex, q, k: int) -> list[tuple[str, float]]:
    """Top-``k`` ``(id, score)`` by cosine; exhaustive, ties broken by id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    s = scores(index, q)
    order = sorted(range(len(s)), key=lambda i: (-s[i], index.ids[i]))[:k]
    return [(index.ids[i], float(s[i])) for i in order]


@dataclass
class RecallResult:
    recall: dict
    n_queries: int
    excluded: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"recall": {str(k): v for k, v in self.recall.items()}, "n_queries": self.n_queries,
                "excluded": self.excluded}


def recall_at_k(index: RetrievalIndex, queries, is_positive, ks=(1, 5, 10), query_ids=None) -> RecallResult:
    """Fraction of queries with a positive among their top ``k`` results.

    ``is_positive(i, key_meta)`` decides whether index entry with metadata
    ``key_meta`` answers query ``i``.  Queries without any positive are
    excluded (with a warning) rather than scored as misses.
    """
    queries = np.asarray(queries, dtype=np.float64)
    query_ids = list(query_ids) if query_ids is not None else list(range(len(queries)))
    hits = {k: 0 for k in ks}
    excluded, used = [], 0
    max_k = max(ks)
    for i, q in enumerate(queries):
        positives = {index.ids[j] for j, meta in enumerate(index.metadata) if is_positive(i, meta)}
        if not positives:
            excluded.append(query_ids[i])
            continue
        used += 1
        ranked = [key for key, _ in query(index, q, max_k)]
        for k in ks:
            if positives.intersection(ranked[:k]):
                hits[k] += 1
    if excluded:
        warnings.warn(f"{len(excluded)} queries had no positive in the index and were excluded", stacklevel=2)
    recall = {k: (hits[k] / used if used else float("nan")) for k in ks}
    return RecallResult(recall, used, excluded)


def label_predicate(query_labels: list, field_name: str):
    """Positive when the key's ``field_name`` label equals the query's."""

    def is_positive(i, meta):
        want = query_labels[i].get(field_name)
        return want is not None and meta.get(field_name) == want

    return is_positive
