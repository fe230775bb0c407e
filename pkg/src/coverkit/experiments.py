"""Desk-scale experiments on the synthetic planted-nugget data.

Covers the coverage-training trend (trained vs. untrained encoder on held-out
topics) and the sampling-range / distillation-weight ablation grid.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from coverkit.data import Document, RankedList, Topic
from coverkit.encoder import EncodeMode, EncoderParams, Vocabulary, encode_texts, init_params
from coverkit.metrics import EvalConfig, EvalTable, evaluate_run
from coverkit.objectives import QueryExample, TrainingConfig, train
from coverkit.scope import (
    REVERSED,
    CoverageConfig,
    CoverageRange,
    EPS,
    SyntheticDataset,
    TrainingPair,
    build_training_pairs,
    make_synthetic_dataset,
)
from coverkit.vectors import EmbeddingMatrix, knn_search

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ToyConfig:
    """Synthetic-data experiment settings.

    Temperature and distillation weight keep the library defaults; the
    learning rate and batch shape are rescaled for plain SGD on the toy model.
    """

    seed: int = 0
    n_train: int = 50
    n_heldout: int = 10
    n_docs: int = 500
    n_nuggets: int = 5
    hidden: int = 32
    dim: int = 32
    samples_per_query: int = 8
    training: TrainingConfig = field(
        default_factory=lambda: TrainingConfig(learning_rate=0.02, queries_per_batch=8, docs_per_query=8)
    )
    coverage: CoverageConfig = field(default_factory=CoverageConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    search_depth: int = 100


def build_vocabulary(corpus: Sequence[Document], pairs: Sequence[TrainingPair]) -> Vocabulary:
    texts = [d.full_text for d in corpus]
    for p in pairs:
        texts.append(p.query)
        texts.extend(p.sub_questions)
    return Vocabulary.build(texts)


def resolve_examples(pairs: Sequence[TrainingPair], corpus: Mapping[str, Document]) -> list[QueryExample]:
    def doc(doc_id: str) -> tuple[str, str]:
        if doc_id not in corpus:
            raise KeyError(f"training pair references unknown document {doc_id!r}")
        return doc_id, corpus[doc_id].full_text

    return [
        QueryExample(p.query, doc(p.positive_doc_id), tuple(doc(n) for n in p.negative_doc_ids), p.sub_questions, p.query_id)
        for p in pairs
    ]


def encode_corpus(params: EncoderParams, vocab: Vocabulary, corpus: Sequence[Document]) -> EmbeddingMatrix:
    return encode_texts(params, vocab, [d.doc_id for d in corpus], [d.full_text for d in corpus], EncodeMode.DOCUMENT)


def dense_search(
    params: EncoderParams,
    vocab: Vocabulary,
    doc_vectors: EmbeddingMatrix,
    topics: Sequence[Topic],
    k: int,
    workers: int = 1,
    tag: str = "dense",
) -> list[RankedList]:
    if not topics:
        return []
    qv = encode_texts(params, vocab, [t.query_id for t in topics], [t.query_text for t in topics], EncodeMode.QUERY)
    return [r.to_ranked_list(tag) for r in knn_search(qv, doc_vectors, k, workers=workers)]


def evaluate_params(
    params: EncoderParams, vocab: Vocabulary, ds: SyntheticDataset, topics: Sequence[Topic], cfg: ToyConfig
) -> EvalTable:
    dv = encode_corpus(params, vocab, ds.corpus)
    run = dense_search(params, vocab, dv, topics, cfg.search_depth)
    return evaluate_run(run, ds.qrels, ds.judgments, topics, cfg.eval)


@dataclass
class TrendResult:
    before: dict[str, float]
    after: dict[str, float]
    epoch_losses: list[float]
    n_pairs: int

    def delta(self, metric: str) -> float:
        return self.after[metric] - self.before[metric]

    def relative_gain(self, metric: str) -> float:
        b = self.before[metric]
        return math.inf if b == 0 else self.after[metric] / b - 1.0


@dataclass
class PreparedToy:
    ds: SyntheticDataset
    train_topics: list[Topic]
    heldout: list[Topic]


def prepare_toy(cfg: ToyConfig) -> PreparedToy:
    ds = make_synthetic_dataset(cfg.seed, cfg.n_train + cfg.n_heldout, cfg.n_nuggets, cfg.n_docs)
    train_topics, heldout = ds.split(cfg.n_train)
    return PreparedToy(ds, train_topics, heldout)


def run_trend(cfg: ToyConfig, prepared: PreparedToy | None = None) -> TrendResult:
    """Train on the training topics and compare held-out metrics before/after."""
    toy = prepared or prepare_toy(cfg)
    pairs, skips = build_training_pairs(
        toy.train_topics, toy.ds.judgments, toy.ds.candidates, cfg.coverage, cfg.seed, cfg.samples_per_query
    )
    if skips:
        log.info("%d training queries skipped", len(skips))
    vocab = build_vocabulary(toy.ds.corpus, pairs)
    params0 = init_params(cfg.seed, len(vocab), cfg.hidden, cfg.dim)
    before = evaluate_params(params0, vocab, toy.ds, toy.heldout, cfg).means()
    if not pairs:
        return TrendResult(before, before, [], 0)
    examples = resolve_examples(pairs, {d.doc_id: d for d in toy.ds.corpus})
    params1, trace = train(examples, params0, replace(cfg.training, seed=cfg.seed), vocab)
    after = evaluate_params(params1, vocab, toy.ds, toy.heldout, cfg).means()
    return TrendResult(before, after, trace.epoch_losses, len(pairs))


# ---------------------------------------------------------------------------
# ablation grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AblationVariant:
    name: str
    pos_range: CoverageRange
    neg_range: CoverageRange
    lambda_cd: float = 0.1


def _r(low: float, high: float) -> CoverageRange:
    return CoverageRange(low, high + EPS if math.isfinite(high) else high)


SAMPLING_GRID = (
    AblationVariant("pos[.75,1] neg{0}", _r(0.75, 1.0), _r(-math.inf, 0.0)),
    AblationVariant("pos[.5,1] neg{0}", _r(0.5, 1.0), _r(-math.inf, 0.0)),
    AblationVariant("pos[.25,1] neg{0}", _r(0.25, 1.0), _r(-math.inf, 0.0)),
    AblationVariant("pos[.5,1] neg[0,.25)", _r(0.5, 1.0), CoverageRange(-math.inf, 0.25)),
    AblationVariant("reversed", REVERSED["pos_range"], REVERSED["neg_range"]),
)

LAMBDA_GRID = tuple(
    AblationVariant(f"lambda_cd={lam:g}", _r(0.5, 1.0), _r(-math.inf, 0.0), lam) for lam in (0.0, 0.1, 0.25)
)


@dataclass(frozen=True)
class AblationConfig:
    seeds: tuple[int, ...] = (0,)
    variants: tuple[AblationVariant, ...] = SAMPLING_GRID + LAMBDA_GRID
    base: ToyConfig = field(default_factory=ToyConfig)


@dataclass
class AblationRow:
    name: str
    lambda_cd: float
    pos_range: CoverageRange
    neg_range: CoverageRange
    before: dict[str, float]
    after: dict[str, float]
    per_seed_after: list[dict[str, float]]

    def delta(self, metric: str) -> float:
        return self.after[metric] - self.before[metric]


def _fmt_range(r: CoverageRange) -> str:
    lo = "-inf" if math.isinf(r.low) else f"{r.low:g}"
    if math.isinf(r.high):
        return f"[{lo},inf)"
    inclusive = r.high - EPS
    if abs(inclusive - round(inclusive, 6)) < 1e-12:  # built by parse()/_r(): closed upper end
        return f"[{lo},{round(inclusive, 6):g}]"
    return f"[{lo},{r.high:g})"


def experiment_ablation(config: AblationConfig) -> list[AblationRow]:
    """Train every variant from the same initialization and report held-out deltas."""
    rows = []
    prepared = {s: prepare_toy(replace(config.base, seed=s)) for s in config.seeds}
    for v in config.variants:
        befores, afters = [], []
        for s in config.seeds:
            cfg = replace(
                config.base,
                seed=s,
                coverage=replace(config.base.coverage, pos_range=v.pos_range, neg_range=v.neg_range),
                training=replace(config.base.training, lambda_cd=v.lambda_cd),
            )
            res = run_trend(cfg, prepared[s])
            befores.append(res.before)
            afters.append(res.after)
            log.info("variant %s seed %d: Cov %.3f -> %.3f", v.name, s, res.before["Cov"], res.after["Cov"])
        mean = lambda ms: {k: float(np.mean([m[k] for m in ms])) for k in ms[0]}  # noqa: E731
        rows.append(AblationRow(v.name, v.lambda_cd, v.pos_range, v.neg_range, mean(befores), mean(afters), afters))
    return rows


def ablation_table(rows: Sequence[AblationRow]) -> str:
    """Tab-separated deltas vs. the untrained encoder, one row per variant."""
    head = "variant\tpos_range\tneg_range\tlambda_cd\tdelta_Cov@10\tdelta_alpha-nDCG@10\tdelta_nDCG@10\tCov@10"
    lines = [head]
    for r in rows:
        lines.append(
            f"{r.name}\t{_fmt_range(r.pos_range)}\t{_fmt_range(r.neg_range)}\t{r.lambda_cd:g}\t"
            f"{r.delta('Cov'):+.4f}\t{r.delta('alpha-nDCG'):+.4f}\t{r.delta('nDCG'):+.4f}\t{r.after['Cov']:.4f}"
        )
    return "\n".join(lines) + "\n"
