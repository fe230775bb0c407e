"""Baseline rankers: BM25, MMR reranking and multi-query fusion."""

from __future__ import annotations

import enum
import math
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from coverkit.data import Document, RankedList, rank_key
from coverkit.encoder import tokenize
from coverkit.vectors import EmbeddingMatrix, cosine


@dataclass(frozen=True)
class Bm25Index:
    postings: dict[str, tuple[tuple[str, int], ...]]
    doc_lengths: dict[str, int]
    avg_length: float
    k1: float = 0.9
    b: float = 0.4

    @classmethod
    def build(cls, docs: Sequence[Document], k1: float = 0.9, b: float = 0.4) -> "Bm25Index":
        postings: dict[str, list[tuple[str, int]]] = defaultdict(list)
        lengths: dict[str, int] = {}
        for doc in sorted(docs, key=lambda d: d.doc_id):
            toks = tokenize(doc.full_text)
            lengths[doc.doc_id] = len(toks)
            for term, tf in sorted(Counter(toks).items()):
                postings[term].append((doc.doc_id, tf))
        avg = sum(lengths.values()) / len(lengths) if lengths else 0.0
        return cls({t: tuple(p) for t, p in postings.items()}, lengths, avg, k1, b)

    @property
    def doc_count(self) -> int:
        return len(self.doc_lengths)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        n = self.doc_count
        return math.log((n - df + 0.5) / (df + 0.5) + 1.0)


def bm25_search(index: Bm25Index, query: str, k: int, query_id: str = "", tag: str = "bm25") -> RankedList:
    """Robertson BM25 over unique query terms."""
    scores: dict[str, float] = defaultdict(float)
    avg = index.avg_length or 1.0
    for term in sorted(set(tokenize(query))):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for doc_id, tf in plist:
            norm = index.k1 * (1.0 - index.b + index.b * index.doc_lengths[doc_id] / avg)
            scores[doc_id] += idf * tf * (index.k1 + 1.0) / (tf + norm)
    items = sorted(scores.items(), key=lambda x: rank_key(*x))[:k]
    return RankedList(query_id, tuple(items), tag)


def mmr_rerank(
    base: RankedList,
    doc_vectors: EmbeddingMatrix,
    query_vector: np.ndarray,
    lam: float,
    k: int,
    tag: str = "mmr",
) -> RankedList:
    """Greedy maximal marginal relevance over the candidates of ``base``.

    Redundancy is ``max(0, max cosine to the selected set)``, so an empty
    selection contributes nothing and emitted marginal values never increase
    along the selection order.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must be in [0, 1]")
    pos = doc_vectors.index_of()
    cands = base.doc_ids
    for d in cands:
        if d not in pos:
            raise KeyError(f"no vector for document {d!r}")
    if not cands:
        return RankedList(base.query_id, (), tag)
    vecs = doc_vectors.rows[[pos[d] for d in cands]]
    rel = np.clip(vecs @ np.asarray(query_vector, dtype=np.float64), -1.0, 1.0)
    sims = np.clip(vecs @ vecs.T, -1.0, 1.0)
    max_sim = np.zeros(len(cands))
    remaining = sorted(range(len(cands)), key=lambda i: cands[i])
    chosen: list[tuple[str, float]] = []
    while remaining and len(chosen) < k:
        best, best_val = None, -math.inf
        for i in remaining:
            val = lam * rel[i] - (1.0 - lam) * max_sim[i]
            if val > best_val:
                best, best_val = i, val
        remaining.remove(best)
        chosen.append((cands[best], float(best_val)))
        max_sim = np.maximum(max_sim, sims[best])
    return RankedList(base.query_id, tuple(chosen), tag)


# ---------------------------------------------------------------------------
# fusion
# ---------------------------------------------------------------------------


class FusionMethod(str, enum.Enum):
    RRF = "rrf"
    SIMSUM = "simsum"
    ROUND_ROBIN = "rrb"


@dataclass(frozen=True)
class FusionConfig:
    method: FusionMethod = FusionMethod.RRF
    rrf_k: float = 60.0
    per_list_depth: int = 100

    def __post_init__(self):
        if self.rrf_k <= 0:
            raise ValueError("rrf_k must be positive")
        if self.per_list_depth <= 0:
            raise ValueError("per_list_depth must be positive")


def _query_id(lists: Sequence[RankedList]) -> str:
    return lists[0].query_id if lists else ""


def fuse_rrf(lists: Sequence[RankedList], rrf_k: float, k: int, tag: str = "rrf") -> RankedList:
    scores: dict[str, float] = defaultdict(float)
    for rl in lists:
        for rank, doc_id in enumerate(rl.doc_ids, start=1):
            scores[doc_id] += 1.0 / (rrf_k + rank)
    items = sorted(scores.items(), key=lambda x: rank_key(*x))[:k]
    return RankedList(_query_id(lists), tuple(items), tag)


def fuse_simsum(lists: Sequence[RankedList], k: int, tag: str = "simsum") -> RankedList:
    scores: dict[str, float] = defaultdict(float)
    for rl in lists:
        for doc_id, score in rl.items:
            scores[doc_id] += score
    items = sorted(scores.items(), key=lambda x: rank_key(*x))[:k]
    return RankedList(_query_id(lists), tuple(items), tag)


def fuse_round_robin(lists: Sequence[RankedList], k: int, tag: str = "rrb") -> RankedList:
    emitted: list[str] = []
    seen: set[str] = set()
    depth = max((len(rl) for rl in lists), default=0)
    for r in range(depth):
        for rl in lists:
            if r < len(rl.items) and len(emitted) < k:
                doc_id = rl.items[r][0]
                if doc_id not in seen:
                    seen.add(doc_id)
                    emitted.append(doc_id)
    return RankedList(_query_id(lists), tuple((d, 1.0 / (i + 1)) for i, d in enumerate(emitted)), tag)


def fuse(lists: Sequence[RankedList], cfg: FusionConfig, k: int) -> RankedList:
    if cfg.method == FusionMethod.RRF:
        return fuse_rrf(lists, cfg.rrf_k, k)
    if cfg.method == FusionMethod.SIMSUM:
        return fuse_simsum(lists, k)
    return fuse_round_robin(lists, k)


Retriever = Callable[[str, int], RankedList]


def multi_query_retrieve(
    sub_queries: Sequence[str],
    retriever: Retriever,
    fusion: FusionConfig,
    k: int,
    query_id: str = "",
    workers: int = 1,
) -> RankedList:
    """Retrieve once per sub-query, then fuse.  Feeding golden sub-questions gives OracleQ."""
    if not sub_queries:
        raise ValueError("multi-query retrieval needs at least one sub-query")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            lists = list(pool.map(lambda q: retriever(q, fusion.per_list_depth), sub_queries))
    else:
        lists = [retriever(q, fusion.per_list_depth) for q in sub_queries]
    fused = fuse(lists, fusion, k)
    return RankedList(query_id or fused.query_id, fused.items, f"multiq-{fusion.method.value}")


def dense_retriever(params, vocab, doc_vectors: EmbeddingMatrix) -> Retriever:
    """Retriever closure encoding each sub-query in query mode."""
    from coverkit.encoder import EncodeMode, encode
    from coverkit.vectors import knn_search

    def retrieve(text: str, depth: int) -> RankedList:
        qv = encode(params, vocab, text, EncodeMode.QUERY)
        q = EmbeddingMatrix(("q",), qv[None, :])
        return knn_search(q, doc_vectors, depth)[0].to_ranked_list()

    return retrieve


def bm25_retriever(index: Bm25Index) -> Retriever:
    return lambda text, depth: bm25_search(index, text, depth)


__all__ = [
    "Bm25Index",
    "FusionConfig",
    "FusionMethod",
    "bm25_search",
    "cosine",
    "fuse",
    "fuse_rrf",
    "fuse_round_robin",
    "fuse_simsum",
    "mmr_rerank",
    "multi_query_retrieve",
]
