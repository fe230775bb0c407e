"""Coverage contrastive and coverage self-distillation objectives.

For a query with candidate documents D (its positive, its negatives, and every
other document in the minibatch):

- contrastive: ``-log softmax(s(q, D) / t)[positive]``
- teacher: ``softmax(mean_sq s(sq, D) / t)`` over the query's sub-questions
- distillation: ``lambda_cd * KL(student || teacher)`` where the student is the
  contrastive softmax itself.

Batch loss is the arithmetic mean of per-query losses.  Queries without
sub-questions contribute only the contrastive term.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from coverkit.encoder import EncodeMode, EncoderParams, Vocabulary, backward, featurize, forward

log = logging.getLogger(__name__)


@dataclass
class TrainingConfig:
    temperature: float = 0.02
    lambda_cd: float = 0.1
    learning_rate: float = 1e-4
    epochs: int = 3
    queries_per_batch: int = 64
    docs_per_query: int = 8
    teacher_stop_gradient: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.lambda_cd < 0:
            raise ValueError("lambda_cd must be non-negative")
        if self.learning_rate < 0 or self.epochs <= 0 or self.queries_per_batch <= 0:
            raise ValueError("learning_rate >= 0, epochs > 0 and queries_per_batch > 0 required")
        if self.docs_per_query < 2:
            raise ValueError("docs_per_query must be >= 2 (one positive plus negatives)")


@dataclass(frozen=True)
class QueryExample:
    """One query's share of a training batch, with resolved texts."""

    query: str
    positive: tuple[str, str]  # (doc_id, text)
    negatives: tuple[tuple[str, str], ...]
    sub_questions: tuple[str, ...] = ()
    query_id: str = ""


@dataclass(frozen=True)
class TrainingBatch:
    examples: tuple[QueryExample, ...]

    def __post_init__(self):
        if not self.examples:
            raise ValueError("empty training batch")


class TrainingDivergedError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# per-query losses
# ---------------------------------------------------------------------------


def _log_softmax(z: np.ndarray) -> np.ndarray:
    m = np.max(z)
    return z - (m + np.log(np.sum(np.exp(z - m))))


def softmax(z: np.ndarray) -> np.ndarray:
    return np.exp(_log_softmax(np.asarray(z, dtype=np.float64)))


def covcon_loss(scores: Sequence[float], positive_index: int, t: float) -> tuple[float, np.ndarray]:
    """Temperature-scaled softmax cross entropy and its gradient w.r.t. scores."""
    if t <= 0:
        raise ValueError("temperature must be positive")
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0 or not 0 <= positive_index < scores.size:
        raise ValueError("positive_index out of range")
    logp = _log_softmax(scores / t)
    # -log p_pos computed as log1p of the competitors' mass when the positive
    # dominates; keeps tiny losses (~1e-22) from rounding to zero
    others = np.delete(logp, positive_index)
    if others.size and logp[positive_index] > -0.5:
        loss = float(np.log1p(np.sum(np.exp(others - logp[positive_index]))))
    else:
        loss = float(-logp[positive_index])
    grad = np.exp(logp)
    grad[positive_index] -= 1.0
    return loss, grad / t


def teacher_distribution(sub_question_vectors, doc_vectors, t: float) -> np.ndarray:
    """Softmax over docs of the mean sub-question cosine, scaled by 1/t."""
    if t <= 0:
        raise ValueError("temperature must be positive")
    sq = np.atleast_2d(np.asarray(sub_question_vectors, dtype=np.float64))
    docs = np.atleast_2d(np.asarray(doc_vectors, dtype=np.float64))
    if sq.size == 0 or sq.shape[0] == 0:
        raise ValueError("teacher needs at least one sub-question")
    if docs.shape[0] == 0:
        raise ValueError("teacher needs at least one document")
    means = np.clip(sq @ docs.T, -1.0, 1.0).mean(axis=0)
    return softmax(means / t)


def covdistil_loss(student: Sequence[float], teacher: Sequence[float], lambda_cd: float) -> float:
    """``lambda_cd * KL(student || teacher)`` with ``0 * log(0 / x) = 0``."""
    p = np.asarray(student, dtype=np.float64)
    q = np.asarray(teacher, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("student and teacher lengths differ")
    for name, v in (("student", p), ("teacher", q)):
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} is not a probability vector")
    support = p > 0
    if np.any(q[support] <= 0):
        raise ValueError("teacher assigns zero mass where the student is positive")
    if lambda_cd == 0:
        return 0.0
    return float(lambda_cd * np.sum(p[support] * (np.log(p[support]) - np.log(q[support]))))


def kl_from_logits(z_student: np.ndarray, z_teacher: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """KL(softmax(zs) || softmax(zt)) and its gradients w.r.t. both logit vectors."""
    lp = _log_softmax(z_student)
    lq = _log_softmax(z_teacher)
    p = np.exp(lp)
    q = np.exp(lq)
    kl = float(np.sum(p * (lp - lq)))
    return kl, p * (lp - lq - kl), q - p


# ---------------------------------------------------------------------------
# batch loss
# ---------------------------------------------------------------------------


@dataclass
class LossTerms:
    covcon: float = 0.0
    covdistil: float = 0.0

    @property
    def total(self) -> float:
        return self.covcon + self.covdistil


@dataclass
class BatchResult:
    loss: float
    grads: EncoderParams
    terms: LossTerms = field(default_factory=LossTerms)
    scores: np.ndarray | None = None


@dataclass(frozen=True)
class PreparedBatch:
    """A batch featurized once; reusable across parameter values."""

    queries: object
    docs: object
    subqs: object
    doc_ids: tuple[str, ...]
    positive_cols: np.ndarray
    sq_owner: np.ndarray  # owning query index of each sub-question row
    sq_counts: np.ndarray  # sub-questions per query


def prepare_batch(batch: TrainingBatch, vocab: Vocabulary) -> PreparedBatch:
    """Featurize texts; documents shared between queries are deduplicated by id."""
    doc_ids: list[str] = []
    doc_texts: list[str] = []
    col_of: dict[str, int] = {}
    positive_cols = []
    for ex in batch.examples:
        for j, (doc_id, text) in enumerate((ex.positive, *ex.negatives)):
            if doc_id not in col_of:
                col_of[doc_id] = len(doc_ids)
                doc_ids.append(doc_id)
                doc_texts.append(text)
            if j == 0:
                positive_cols.append(col_of[doc_id])
    sq_texts, owner = [], []
    for i, ex in enumerate(batch.examples):
        sq_texts.extend(ex.sub_questions)
        owner.extend([i] * len(ex.sub_questions))
    # sub-questions are always encoded in query mode
    return PreparedBatch(
        queries=featurize(vocab, [ex.query for ex in batch.examples], EncodeMode.QUERY),
        docs=featurize(vocab, doc_texts, EncodeMode.DOCUMENT),
        subqs=featurize(vocab, sq_texts, EncodeMode.QUERY),
        doc_ids=tuple(doc_ids),
        positive_cols=np.array(positive_cols, dtype=np.int64),
        sq_owner=np.array(owner, dtype=np.int64),
        sq_counts=np.bincount(np.array(owner, dtype=np.int64), minlength=len(batch.examples)),
    )


def prepared_loss(
    prep: PreparedBatch,
    params: EncoderParams,
    cfg: TrainingConfig,
    use_covcon: bool = True,
    fixed_teacher: np.ndarray | None = None,
) -> BatchResult:
    """Loss and gradient of a prepared batch.

    ``fixed_teacher`` (Q x D) replaces the teacher distributions by constants;
    used by the finite-difference checks of the detached teacher.
    """
    t = cfg.temperature
    fq = forward(params, prep.queries)
    fd = forward(params, prep.docs, prep.doc_ids)
    n_q = len(prep.queries)
    scores = fq.vectors @ fd.vectors.T
    d_scores = np.zeros_like(scores)
    terms = LossTerms()

    has_sq = len(prep.subqs) > 0 and cfg.lambda_cd > 0
    if has_sq:
        fs = forward(params, prep.subqs)
        sq_scores = fs.vectors @ fd.vectors.T
        mean_sq = np.zeros_like(scores)
        np.add.at(mean_sq, prep.sq_owner, sq_scores)
        counts = np.maximum(prep.sq_counts, 1)[:, None]
        mean_sq /= counts
        d_mean = np.zeros_like(scores)

    for i in range(n_q):
        row = scores[i]
        if use_covcon:
            loss, grad = covcon_loss(row, int(prep.positive_cols[i]), t)
            terms.covcon += loss / n_q
            d_scores[i] += grad / n_q
        if has_sq and prep.sq_counts[i] > 0:
            if fixed_teacher is not None:
                zt = np.log(fixed_teacher[i])
            else:
                zt = mean_sq[i] / t
            kl, g_student, g_teacher = kl_from_logits(row / t, zt)
            w = cfg.lambda_cd / n_q
            terms.covdistil += w * kl
            d_scores[i] += w * g_student / t
            if not cfg.teacher_stop_gradient and fixed_teacher is None:
                d_mean[i] += w * g_teacher / t

    grads = params.zeros_like()
    d_docs = d_scores.T @ fq.vectors
    backward(params, fq, d_scores @ fd.vectors, grads)
    if has_sq and not cfg.teacher_stop_gradient and fixed_teacher is None:
        d_sq_scores = (d_mean / counts)[prep.sq_owner]
        d_docs += d_sq_scores.T @ fs.vectors
        backward(params, fs, d_sq_scores @ fd.vectors, grads)
    backward(params, fd, d_docs, grads)
    return BatchResult(terms.total, grads, terms, scores)


def teacher_matrix(prep: PreparedBatch, params: EncoderParams, t: float) -> np.ndarray:
    """Teacher distributions (Q x D); rows for queries without sub-questions are uniform."""
    fd = forward(params, prep.docs, prep.doc_ids)
    out = np.full((len(prep.queries), len(prep.doc_ids)), 1.0 / len(prep.doc_ids))
    if len(prep.subqs):
        fs = forward(params, prep.subqs)
        for i in range(len(prep.queries)):
            rows = fs.vectors[prep.sq_owner == i]
            if len(rows):
                out[i] = teacher_distribution(rows, fd.vectors, t)
    return out


def batch_loss(batch: TrainingBatch, params: EncoderParams, cfg: TrainingConfig, vocab: Vocabulary) -> BatchResult:
    return prepared_loss(prepare_batch(batch, vocab), params, cfg)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainingTrace:
    batch_losses: list[float] = field(default_factory=list)
    epoch_losses: list[float] = field(default_factory=list)


def _select_negatives(ex: QueryExample, n: int, rng: np.random.Generator) -> QueryExample:
    if len(ex.negatives) <= n:
        return ex
    pick = np.sort(rng.choice(len(ex.negatives), size=n, replace=False))
    return QueryExample(ex.query, ex.positive, tuple(ex.negatives[i] for i in pick), ex.sub_questions, ex.query_id)


def train(
    dataset: Sequence[QueryExample],
    params: EncoderParams,
    cfg: TrainingConfig,
    vocab: Vocabulary,
) -> tuple[EncoderParams, TrainingTrace]:
    """Plain minibatch gradient descent with a seeded per-epoch shuffle."""
    if not dataset:
        raise ValueError("empty training dataset")
    rng = np.random.default_rng(cfg.seed)
    params = params.copy()
    trace = TrainingTrace()
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(dataset))
        epoch_losses = []
        for start in range(0, len(order), cfg.queries_per_batch):
            examples = tuple(
                _select_negatives(dataset[i], cfg.docs_per_query - 1, rng)
                for i in order[start : start + cfg.queries_per_batch]
            )
            result = batch_loss(TrainingBatch(examples), params, cfg, vocab)
            if not math.isfinite(result.loss) or not result.grads.all_finite():
                bad = result.scores[~np.isfinite(result.scores)] if result.scores is not None else []
                raise TrainingDivergedError(
                    f"non-finite loss {result.loss!r} at batch {step} (epoch {epoch}); "
                    f"offending score {bad[0] if len(bad) else 'n/a'}"
                )
            trace.batch_losses.append(result.loss)
            epoch_losses.append(result.loss)
            params = params.add_scaled(result.grads, -cfg.learning_rate)
            step += 1
        trace.epoch_losses.append(float(np.mean(epoch_losses)))
        log.info("epoch %d mean loss %.6f", epoch + 1, trace.epoch_losses[-1])
    return params, trace
