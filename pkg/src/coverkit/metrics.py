"""Relevance and nugget-coverage metrics over ranked lists.

P@k and nDCG@k use graded qrels; Cov@k (subtopic recall) and alpha-nDCG@k use a
binary doc x nugget matrix derived from answerability grades.
"""

from __future__ import annotations

import enum
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import betainc

from coverkit.data import NuggetJudgmentSet, Qrels, RankedList, Topic

log = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 8


class IdealMode(str, enum.Enum):
    GREEDY = "greedy"
    EXHAUSTIVE = "exhaustive"


@dataclass(frozen=True)
class EvalConfig:
    k: int = 10
    alpha: float = 0.5
    answerability_threshold: int = 4
    relevance_binarization: int = 1
    ideal_mode: IdealMode = IdealMode.GREEDY
    linear_gain: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("cutoff k must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")


@dataclass(frozen=True)
class NuggetMatrix:
    """Binary doc x nugget containment for one query."""

    query_id: str
    nuggets: tuple[str, ...]
    docs: Mapping[str, frozenset[str]]

    @classmethod
    def from_judgments(cls, topic: Topic, judgments: NuggetJudgmentSet | None, threshold: int) -> "NuggetMatrix":
        sqs = set(topic.sq_ids)
        docs: dict[str, set[str]] = {}
        if judgments is not None:
            for (doc_id, sq_id), grade in judgments.entries.items():
                if sq_id in sqs:
                    bucket = docs.setdefault(doc_id, set())
                    if grade >= threshold:
                        bucket.add(sq_id)
        return cls(topic.query_id, tuple(topic.sq_ids), {d: frozenset(s) for d, s in docs.items()})

    def of(self, doc_id: str) -> frozenset[str]:
        return self.docs.get(doc_id, frozenset())


def _discount(i: int) -> float:
    """Discount of 1-based rank i."""
    return math.log2(i + 1)


def precision_at_k(ranking: RankedList, qrels: Qrels | None, cfg: EvalConfig) -> float:
    if qrels is None:
        return 0.0
    rel = sum(1 for d in ranking.doc_ids[: cfg.k] if qrels.entries.get(d, 0) >= cfg.relevance_binarization)
    return rel / cfg.k


def _gain(grade: int, linear: bool) -> float:
    return float(grade) if linear else 2.0**grade - 1.0


def ndcg_at_k(ranking: RankedList, qrels: Qrels | None, cfg: EvalConfig) -> float:
    if qrels is None:
        return 0.0
    dcg = sum(
        _gain(qrels.entries.get(d, 0), cfg.linear_gain) / _discount(i)
        for i, d in enumerate(ranking.doc_ids[: cfg.k], start=1)
    )
    ideal_grades = sorted(qrels.entries.values(), reverse=True)[: cfg.k]
    ideal = sum(_gain(g, cfg.linear_gain) / _discount(i) for i, g in enumerate(ideal_grades, start=1))
    return dcg / ideal if ideal > 0 else 0.0


def cov_at_k(ranking: RankedList, nuggets: NuggetMatrix, cfg: EvalConfig) -> float:
    if not nuggets.nuggets:
        raise ValueError(f"query {nuggets.query_id!r} has no nuggets")
    covered: set[str] = set()
    for d in ranking.doc_ids[: cfg.k]:
        covered |= nuggets.of(d)
    return len(covered) / len(nuggets.nuggets)


def alpha_dcg(doc_nuggets: Sequence[frozenset[str]], alpha: float, k: int) -> float:
    seen: dict[str, int] = {}
    total = 0.0
    for i, ns in enumerate(doc_nuggets[:k], start=1):
        gain = 0.0
        for n in sorted(ns):
            c = seen.get(n, 0)
            gain += (1.0 - alpha) ** c
            seen[n] = c + 1
        total += gain / _discount(i)
    return total


def _greedy_ideal(nuggets: NuggetMatrix, alpha: float, k: int) -> float:
    pool = sorted(d for d, ns in nuggets.docs.items() if ns)
    seen: dict[str, int] = {}
    total = 0.0
    for i in range(1, min(k, len(pool)) + 1):
        best, best_gain = None, -1.0
        for d in pool:
            g = sum((1.0 - alpha) ** seen.get(n, 0) for n in sorted(nuggets.docs[d]))
            if g > best_gain:
                best, best_gain = d, g
        pool.remove(best)
        for n in nuggets.docs[best]:
            seen[n] = seen.get(n, 0) + 1
        total += best_gain / _discount(i)
    return total


def _exhaustive_ideal(nuggets: NuggetMatrix, alpha: float, k: int) -> float:
    pool = sorted(d for d, ns in nuggets.docs.items() if ns)
    if len(pool) > EXHAUSTIVE_LIMIT:
        raise ValueError(f"exhaustive ideal limited to {EXHAUSTIVE_LIMIT} judged documents, got {len(pool)}")
    sets = [nuggets.docs[d] for d in pool]
    best = 0.0
    for perm in itertools.permutations(sets, min(k, len(sets))):
        best = max(best, alpha_dcg(perm, alpha, k))
    return best


def ideal_alpha_dcg(nuggets: NuggetMatrix, cfg: EvalConfig) -> float:
    if cfg.ideal_mode == IdealMode.EXHAUSTIVE:
        return _exhaustive_ideal(nuggets, cfg.alpha, cfg.k)
    return _greedy_ideal(nuggets, cfg.alpha, cfg.k)


def alpha_ndcg_at_k(ranking: RankedList, nuggets: NuggetMatrix, cfg: EvalConfig) -> float:
    if not nuggets.nuggets:
        raise ValueError(f"query {nuggets.query_id!r} has no nuggets")
    ideal = ideal_alpha_dcg(nuggets, cfg)
    if ideal <= 0:
        return 0.0
    return alpha_dcg([nuggets.of(d) for d in ranking.doc_ids], cfg.alpha, cfg.k) / ideal


# ---------------------------------------------------------------------------
# significance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    n: int
    infinite_t: bool = False

    @property
    def significant(self) -> bool:
        return self.p < 0.05


def t_sf_two_sided(t: float, df: int) -> float:
    """Two-sided tail probability of Student's t via the regularized incomplete beta."""
    x = df / (df + t * t)
    return float(betainc(df / 2.0, 0.5, x))


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("score vectors differ in length")
    n = a.size
    if n < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, n)
        return TTestResult(math.copysign(math.inf, mean), 0.0, n, infinite_t=True)
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t, t_sf_two_sided(t, n - 1), n)


# ---------------------------------------------------------------------------
# run evaluation
# ---------------------------------------------------------------------------

METRICS = ("P", "nDCG", "alpha-nDCG", "Cov")


@dataclass
class EvalTable:
    per_query: dict[str, dict[str, float]] = field(default_factory=dict)
    k: int = 10

    def mean(self, metric: str) -> float:
        vals = [m[metric] for m in self.per_query.values() if not math.isnan(m[metric])]
        return float(np.mean(vals)) if vals else 0.0

    def means(self) -> dict[str, float]:
        return {m: self.mean(m) for m in METRICS}

    def column(self, metric: str, qids: Sequence[str]) -> list[float]:
        return [self.per_query[q][metric] for q in qids]


def _score_query(
    ranking: RankedList, topic: Topic, qrels: Qrels | None, judgments: NuggetJudgmentSet | None, cfg: EvalConfig
) -> dict[str, float]:
    row = {"P": precision_at_k(ranking, qrels, cfg), "nDCG": ndcg_at_k(ranking, qrels, cfg)}
    if topic.sub_questions:
        nm = NuggetMatrix.from_judgments(topic, judgments, cfg.answerability_threshold)
        row["alpha-nDCG"] = alpha_ndcg_at_k(ranking, nm, cfg)
        row["Cov"] = cov_at_k(ranking, nm, cfg)
    else:
        row["alpha-nDCG"] = row["Cov"] = math.nan
    return row


def evaluate_run(
    run: Sequence[RankedList],
    qrels: Mapping[str, Qrels],
    judgments: Mapping[str, NuggetJudgmentSet],
    topics: Sequence[Topic],
    cfg: EvalConfig,
    workers: int = 1,
) -> EvalTable:
    """All four metrics per judged query; queries missing from the run score 0.

    A query is judged when it has qrels or nugget judgments.  Coverage metrics
    are undefined (NaN, left out of means) for topics without sub-questions.
    """
    by_qid = {rl.query_id: rl for rl in run}
    topic_of = {t.query_id: t for t in topics}
    judged = [t.query_id for t in topics if t.query_id in qrels or t.query_id in judgments]
    for qid in by_qid:
        if qid not in judged:
            log.warning("query %s in run has no judgments; excluded", qid)

    def score(qid: str) -> dict[str, float]:
        ranking = by_qid.get(qid, RankedList(qid))
        return _score_query(ranking, topic_of[qid], qrels.get(qid), judgments.get(qid), cfg)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(score, judged))
    else:
        rows = [score(q) for q in judged]
    return EvalTable(dict(zip(judged, rows)), cfg.k)


def format_table(tables: Mapping[str, EvalTable], sig: Mapping[str, Mapping[str, TTestResult]] | None = None) -> str:
    """Aligned text table of mean metrics, one row per run; ``*`` marks p < 0.05."""
    k = next(iter(tables.values())).k if tables else 10
    headers = ["run"] + [f"{m}@{k}" for m in METRICS]
    rows = []
    for name, table in tables.items():
        cells = [name]
        for m in METRICS:
            mark = "*" if sig and name in sig and sig[name][m].significant else ""
            cells.append(f"{table.mean(m):.4f}{mark}")
        rows.append(cells)
    widths = [max(len(r[i]) for r in [headers] + rows) for i in range(len(headers))]
    lines = ["  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(headers, widths)))]
    for r in rows:
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))))
    return "\n".join(lines) + "\n"


def per_query_tsv(table: EvalTable) -> str:
    out = ["query_id\t" + "\t".join(METRICS)]
    for qid, row in table.per_query.items():
        out.append(qid + "\t" + "\t".join("nan" if math.isnan(row[m]) else f"{row[m]:.6f}" for m in METRICS))
    return "\n".join(out) + "\n"
