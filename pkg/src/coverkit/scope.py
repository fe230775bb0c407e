"""Coverage training signals from graded answerability judgments.

Coverage of a document for a query is the fraction of the query's
sub-questions it answers at grade >= eta.  Positives are drawn from the
high-coverage group, negatives from the low-coverage group, topped up with
low-ranked candidates when the latter is short.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from coverkit.data import Document, NuggetJudgmentSet, ParseError, Qrels, RankedList, Topic, _json_records, _require_str

log = logging.getLogger(__name__)

EPS = 1e-9


@dataclass(frozen=True)
class CoverageRange:
    """Half-open interval ``[low, high)`` of coverage values."""

    low: float
    high: float

    def __contains__(self, value: float) -> bool:
        return self.low <= value < self.high

    def overlaps(self, other: "CoverageRange") -> bool:
        return self.low < other.high and other.low < self.high

    @classmethod
    def parse(cls, spec: str) -> "CoverageRange":
        """Parse ``a:b`` with both ends inclusive; empty ends are unbounded."""
        try:
            lo_s, hi_s = spec.split(":")
            low = float(lo_s) if lo_s.strip() else -math.inf
            high = float(hi_s) + EPS if hi_s.strip() else math.inf
        except ValueError:
            raise ValueError(f"bad coverage range {spec!r}; expected 'low:high'") from None
        return cls(low, high)


@dataclass(frozen=True)
class CoverageConfig:
    eta: int = 4
    pos_range: CoverageRange = CoverageRange(0.5, 1.0 + EPS)
    neg_range: CoverageRange = CoverageRange(-math.inf, 0.0 + EPS)
    negatives_per_query: int = 16
    supplement_rank_floor: int = 50

    def __post_init__(self):
        if not 0 <= self.eta <= 5:
            raise ValueError("eta must be in 0..5")
        if self.pos_range.overlaps(self.neg_range):
            raise ValueError("positive and negative coverage ranges overlap")
        if self.negatives_per_query <= 0:
            raise ValueError("negatives_per_query must be positive")


REVERSED = dict(pos_range=CoverageRange(-math.inf, 0.0 + EPS), neg_range=CoverageRange(0.75, 1.0 + EPS))


@dataclass(frozen=True)
class CandidateList:
    """Upstream-ranked candidates; ranks are 1-based and consecutive."""

    query_id: str
    doc_ids: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise ValueError(f"duplicate candidates for {self.query_id!r}")

    @classmethod
    def from_ranked_list(cls, rl: RankedList) -> "CandidateList":
        return cls(rl.query_id, tuple(rl.doc_ids))

    def ranked(self) -> Iterable[tuple[int, str]]:
        return enumerate(self.doc_ids, start=1)


@dataclass(frozen=True)
class CoverageScoreTable:
    query_id: str
    scores: Mapping[str, float]


@dataclass(frozen=True)
class TrainingPair:
    """A sampled record in the training-data JSONL schema."""

    query_id: str
    query: str
    sub_questions: tuple[str, ...]
    positive_doc_id: str
    negative_doc_ids: tuple[str, ...]

    def to_json(self) -> str:
        return json.dumps(
            {
                "query_id": self.query_id,
                "query": self.query,
                "sub_questions": list(self.sub_questions),
                "positive_doc_id": self.positive_doc_id,
                "negative_doc_ids": list(self.negative_doc_ids),
            },
            ensure_ascii=False,
        )


def _str_list(rec: dict, key: str, line_no: int) -> tuple[str, ...]:
    value = rec.get(key)
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ParseError(line_no, f"{key!r} must be a list of strings")
    return tuple(value)


def parse_training_pairs(lines: Iterable[str] | str) -> list[TrainingPair]:
    out = []
    for line_no, rec in _json_records(lines):
        negs = _str_list(rec, "negative_doc_ids", line_no)
        if not negs:
            raise ParseError(line_no, "training pair has no negatives")
        out.append(
            TrainingPair(
                _require_str(rec, "query_id", line_no),
                _require_str(rec, "query", line_no),
                _str_list(rec, "sub_questions", line_no),
                _require_str(rec, "positive_doc_id", line_no),
                negs,
            )
        )
    return out


def serialize_training_pairs(pairs: Iterable[TrainingPair]) -> str:
    return "".join(p.to_json() + "\n" for p in pairs)


@dataclass(frozen=True)
class SkipRecord:
    query_id: str
    reason: str


def coverage_score(judgments: NuggetJudgmentSet, topic: Topic, doc_id: str, eta: int) -> float:
    if not topic.sub_questions:
        raise ValueError(f"topic {topic.query_id!r} has no sub-questions")
    answered = sum(1 for sq_id in topic.sq_ids if judgments.grade(doc_id, sq_id) >= eta)
    return answered / len(topic.sub_questions)


def coverage_table(
    judgments: NuggetJudgmentSet, topic: Topic, doc_ids: Iterable[str], eta: int
) -> CoverageScoreTable:
    return CoverageScoreTable(topic.query_id, {d: coverage_score(judgments, topic, d, eta) for d in doc_ids})


def sample_pairs(
    table: CoverageScoreTable,
    candidates: CandidateList,
    cfg: CoverageConfig,
    seed: int,
    topic: Topic | None = None,
) -> TrainingPair | SkipRecord:
    """Draw one positive from the high-coverage group and negatives from the low one."""
    rng = np.random.default_rng(seed)
    pool = list(candidates.doc_ids) + sorted(set(table.scores) - set(candidates.doc_ids))
    cov = {d: table.scores.get(d, 0.0) for d in pool}
    high = [d for d in pool if cov[d] in cfg.pos_range]
    low = [d for d in pool if cov[d] in cfg.neg_range]
    if not high:
        log.info("skipping %s: no document in the positive coverage range", table.query_id)
        return SkipRecord(table.query_id, "empty high-coverage group")
    positive = high[int(rng.integers(len(high)))]
    n = cfg.negatives_per_query
    if len(low) >= n:
        pick = np.sort(rng.choice(len(low), size=n, replace=False))
        negatives = [low[i] for i in pick]
    else:
        negatives = list(low)
        taken = set(negatives) | set(high)
        for rank, doc_id in candidates.ranked():
            if len(negatives) >= n:
                break
            if rank > cfg.supplement_rank_floor and doc_id not in taken:
                negatives.append(doc_id)
                taken.add(doc_id)
    return TrainingPair(
        table.query_id,
        topic.query_text if topic else "",
        tuple(topic.sq_texts) if topic else (),
        positive,
        tuple(negatives),
    )


def build_training_pairs(
    topics: Sequence[Topic],
    judgments: Mapping[str, NuggetJudgmentSet],
    candidates: Mapping[str, CandidateList],
    cfg: CoverageConfig,
    seed: int,
    samples_per_query: int = 1,
) -> tuple[list[TrainingPair], list[SkipRecord]]:
    pairs: list[TrainingPair] = []
    skips: list[SkipRecord] = []
    for qi, topic in enumerate(topics):
        if not topic.sub_questions or topic.query_id not in candidates:
            skips.append(SkipRecord(topic.query_id, "no sub-questions or candidates"))
            continue
        js = judgments.get(topic.query_id, NuggetJudgmentSet(topic.query_id, {}))
        cands = candidates[topic.query_id]
        table = coverage_table(js, topic, set(cands.doc_ids) | set(js.doc_ids), cfg.eta)
        for s in range(samples_per_query):
            rec = sample_pairs(table, cands, cfg, seed=seed * 1_000_003 + qi * 1009 + s, topic=topic)
            if isinstance(rec, SkipRecord):
                skips.append(rec)
                break
            pairs.append(rec)
    return pairs, skips


def accumulated_coverage_curve(
    answered: Mapping[str, frozenset[str] | set[str]],
    candidates: Sequence[str],
    n_sub_questions: int,
    k_max: int,
) -> list[tuple[int, float]]:
    """Coverage of the union of answered sub-questions over the top-k candidates.

    ``answered`` maps doc_id to the sub-questions it answers at the chosen
    threshold; see :func:`answered_sets`.
    """
    if n_sub_questions <= 0:
        raise ValueError("coverage curve needs at least one sub-question")
    covered: set[str] = set()
    curve = []
    for k, doc_id in enumerate(candidates[:k_max], start=1):
        covered |= answered.get(doc_id, frozenset())
        curve.append((k, len(covered) / n_sub_questions))
    return curve


def answered_sets(judgments: NuggetJudgmentSet, topic: Topic, tau: int) -> dict[str, frozenset[str]]:
    if not 0 <= tau <= 5:
        raise ValueError("tau must be in 0..5")
    sqs = set(topic.sq_ids)
    out: dict[str, set[str]] = {}
    for (doc_id, sq_id), grade in judgments.entries.items():
        if grade >= tau and sq_id in sqs:
            out.setdefault(doc_id, set()).add(sq_id)
    return {d: frozenset(s) for d, s in out.items()}


def coverage_curve_for_topic(
    judgments: NuggetJudgmentSet, topic: Topic, candidates: CandidateList, tau: int, k_max: int
) -> list[tuple[int, float]]:
    return accumulated_coverage_curve(
        answered_sets(judgments, topic, tau), candidates.doc_ids, len(topic.sub_questions), k_max
    )


def mean_curve(curves: Sequence[Sequence[tuple[int, float]]]) -> list[tuple[int, float]]:
    """Average curves pointwise; shorter curves hold their last value."""
    if not curves:
        return []
    k_max = max(len(c) for c in curves)
    out = []
    for k in range(1, k_max + 1):
        vals = [c[min(k, len(c)) - 1][1] for c in curves if c]
        out.append((k, float(np.mean(vals))))
    return out


# ---------------------------------------------------------------------------
# synthetic planted-nugget data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    """Vocabulary and composition knobs of the synthetic generator."""

    topic_words: int = 3
    topic_pool: int = 40
    nugget_tokens: int = 2
    aspect_pool: int = 100
    filler_pool: int = 150
    filler_per_doc: tuple[int, int] = (6, 14)
    distractor_fraction: float = 0.35
    partial_mention_prob: float = 0.0
    # judge-style grade noise, drawn from a separate stream (texts unaffected);
    # off by default so coverage equals the planted fraction at every eta
    grade4_fraction: float = 0.0
    weak_grade_prob: float = 0.0
    candidate_depth: int = 100


@dataclass
class SyntheticDataset:
    corpus: list[Document]
    topics: list[Topic]
    judgments: dict[str, NuggetJudgmentSet]
    candidates: dict[str, CandidateList]
    qrels: dict[str, Qrels]
    doc_nuggets: dict[str, frozenset[tuple[str, str]]] = field(default_factory=dict)

    def split(self, n_train: int) -> tuple[list[Topic], list[Topic]]:
        return self.topics[:n_train], self.topics[n_train:]


def make_synthetic_dataset(
    seed: int,
    n_queries: int,
    n_nuggets_per_query: int,
    n_docs: int,
    spec: SynthSpec = SynthSpec(),
) -> SyntheticDataset:
    """Planted-nugget corpus whose ground-truth coverage is known by construction.

    Each topic owns ``n_nuggets_per_query`` token groups drawn from a shared
    aspect pool.  Documents belong to one topic and are either nugget documents
    (topic words + a random subset of the topic's nugget groups + filler) or
    distractors (topic words repeated + filler, no nuggets).  A document that
    contains every token of a nugget group is graded 5 for that sub-question
    and 0 for the topic's others; ``grade4_fraction`` / ``weak_grade_prob``
    degrade some of these to 4 and 1-3 respectively.  With ``partial_mention_prob`` > 0,
    documents may also carry half of another nugget's tokens, graded 2 or 3.
    """
    if min(n_queries, n_nuggets_per_query, n_docs) <= 0:
        raise ValueError("sizes must be positive")
    for name in ("distractor_fraction", "partial_mention_prob", "grade4_fraction", "weak_grade_prob"):
        if not 0.0 <= getattr(spec, name) <= 1.0:
            raise ValueError(f"{name} must be in [0, 1]")
    rng = np.random.default_rng(seed)
    topic_vocab = [f"topic{i}" for i in range(spec.topic_pool)]
    aspect_vocab = [f"aspect{i}" for i in range(spec.aspect_pool)]
    filler_vocab = [f"filler{i}" for i in range(spec.filler_pool)]
    question_words = ["what", "how", "why", "which", "when"]

    topics: list[Topic] = []
    nuggets: dict[str, list[tuple[str, ...]]] = {}
    topic_words: dict[str, list[str]] = {}
    width = len(str(n_queries - 1))
    for qi in range(n_queries):
        qid = f"q{qi:0{width}d}"
        words = [topic_vocab[i] for i in rng.choice(spec.topic_pool, size=spec.topic_words, replace=False)]
        need = n_nuggets_per_query * spec.nugget_tokens
        aspects = [aspect_vocab[i] for i in rng.choice(spec.aspect_pool, size=need, replace=False)]
        groups = [tuple(aspects[j * spec.nugget_tokens : (j + 1) * spec.nugget_tokens]) for j in range(n_nuggets_per_query)]
        sqs = tuple(
            (f"{qid}-sq{j}", f"{question_words[j % len(question_words)]} {' '.join(words[:1])} {' '.join(g)}")
            for j, g in enumerate(groups)
        )
        topics.append(Topic(qid, " ".join(words), sqs))
        nuggets[qid] = groups
        topic_words[qid] = words

    owners = np.resize(np.arange(n_queries), n_docs)
    rng.shuffle(owners)
    dwidth = len(str(n_docs - 1))
    corpus: list[Document] = []
    grades: dict[str, dict[tuple[str, str], int]] = {t.query_id: {} for t in topics}
    doc_nuggets: dict[str, frozenset[tuple[str, str]]] = {}
    for di, owner in enumerate(owners):
        topic = topics[owner]
        qid = topic.query_id
        doc_id = f"d{di:0{dwidth}d}"
        words = topic_words[qid]
        n_fill = int(rng.integers(spec.filler_per_doc[0], spec.filler_per_doc[1] + 1))
        tokens = [filler_vocab[i] for i in rng.integers(spec.filler_pool, size=n_fill)]
        contained: list[int] = []
        if rng.random() < spec.distractor_fraction:
            tokens += list(np.repeat(words, rng.integers(2, 4, size=len(words))))
        else:
            size = int(rng.integers(1, n_nuggets_per_query + 1))
            contained = sorted(rng.choice(n_nuggets_per_query, size=size, replace=False).tolist())
            n_topic = int(rng.integers(1, len(words) + 1))
            tokens += [words[i] for i in rng.choice(len(words), size=n_topic, replace=False)]
            for j in contained:
                tokens += list(nuggets[qid][j])
            missing = [j for j in range(n_nuggets_per_query) if j not in contained]
            if missing and spec.partial_mention_prob > 0 and rng.random() < spec.partial_mention_prob:
                j = missing[int(rng.integers(len(missing)))]
                half = max(1, spec.nugget_tokens // 2)
                tokens += list(nuggets[qid][j][:half])
                grades[qid][(doc_id, topic.sq_ids[j])] = int(rng.integers(2, 4))
        rng.shuffle(tokens)
        for j in contained:
            grades[qid][(doc_id, topic.sq_ids[j])] = 5
        doc_nuggets[doc_id] = frozenset((qid, topic.sq_ids[j]) for j in contained)
        corpus.append(Document(doc_id, "", " ".join(tokens)))

    # Contained nuggets are sometimes graded 4 instead of 5; other sub-questions
    # of nugget docs are judged too, mostly 0 with occasional weak grades 1-3.
    grade_rng = np.random.default_rng([seed, 1])
    for doc in corpus:
        qids = sorted({qid for qid, _ in doc_nuggets[doc.doc_id]})
        for qid in qids:
            topic = topics[int(qid[1:])]
            for sq_id in topic.sq_ids:
                key = (doc.doc_id, sq_id)
                if grades[qid].get(key) == 5:
                    if grade_rng.random() < spec.grade4_fraction:
                        grades[qid][key] = 4
                elif key not in grades[qid]:
                    weak = grade_rng.random() < spec.weak_grade_prob
                    grades[qid][key] = int(grade_rng.integers(1, 4)) if weak else 0

    judgments = {qid: NuggetJudgmentSet(qid, g) for qid, g in grades.items()}
    qrels = {}
    for t in topics:
        rel = {}
        for (doc_id, _), g in judgments[t.query_id].entries.items():
            if g >= 4:
                rel[doc_id] = 1
        qrels[t.query_id] = Qrels(t.query_id, dict(sorted(rel.items())))

    from coverkit.rankers import Bm25Index, bm25_search

    index = Bm25Index.build(corpus)
    candidates = {
        t.query_id: CandidateList.from_ranked_list(bm25_search(index, t.query_text, spec.candidate_depth, t.query_id))
        for t in topics
    }
    return SyntheticDataset(corpus, topics, judgments, candidates, qrels, doc_nuggets)
