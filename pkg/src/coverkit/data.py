"""Domain records and parsers/serializers for the exchange formats.

Formats:
- TREC run: ``qid Q0 docid rank score tag`` (whitespace separated)
- qrels: ``qid 0 docid grade``
- topics JSONL: ``{"query_id", "query", "sub_questions": [{"sq_id", "text"}]}``
- nugget judgments JSONL: ``{"query_id", "doc_id", "sq_id", "grade"}``
- corpus JSONL: ``{"doc_id", "title", "text"}``

Parsers reject malformed input instead of repairing it; every error message
carries the 1-based line number.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence


class ParseError(ValueError):
    """Malformed record in an input stream."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _lines(stream: Iterable[str] | str) -> Iterator[tuple[int, str]]:
    if isinstance(stream, str):
        # not splitlines(): JSON text may legitimately contain U+0085 / U+2028
        stream = stream.split("\n")
    for i, raw in enumerate(stream, start=1):
        line = raw.strip()
        if line:
            yield i, line


def rank_key(doc_id: str, score: float) -> tuple[float, str]:
    """Global tie-break: descending score, then ascending doc_id."""
    return (-score, doc_id)


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    text: str

    def __post_init__(self):
        if not self.doc_id or any(c.isspace() for c in self.doc_id):
            raise ValueError(f"invalid doc_id {self.doc_id!r}")

    @property
    def full_text(self) -> str:
        return f"{self.title} {self.text}" if self.title else self.text


@dataclass(frozen=True)
class Topic:
    query_id: str
    query_text: str
    sub_questions: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sub_questions", tuple((str(a), str(b)) for a, b in self.sub_questions))
        ids = [sq_id for sq_id, _ in self.sub_questions]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate sq_id in topic {self.query_id!r}")

    @property
    def sq_ids(self) -> list[str]:
        return [sq_id for sq_id, _ in self.sub_questions]

    @property
    def sq_texts(self) -> list[str]:
        return [text for _, text in self.sub_questions]


@dataclass(frozen=True)
class NuggetJudgmentSet:
    """Graded answerability J(doc, sub-question) in 0..5 for one query."""

    query_id: str
    entries: Mapping[tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self):
        for key, grade in self.entries.items():
            if isinstance(grade, bool) or not isinstance(grade, int) or not 0 <= grade <= 5:
                raise ValueError(f"grade {grade!r} for {key} outside 0..5")
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    def grade(self, doc_id: str, sq_id: str) -> int:
        """Unjudged pairs count as grade 0."""
        return self.entries.get((doc_id, sq_id), 0)

    @property
    def doc_ids(self) -> list[str]:
        return sorted({d for d, _ in self.entries})

    def answered(self, doc_id: str, threshold: int) -> frozenset[str]:
        return frozenset(sq for (d, sq), g in self.entries.items() if d == doc_id and g >= threshold)


@dataclass(frozen=True)
class Qrels:
    query_id: str
    entries: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for doc_id, grade in self.entries.items():
            if grade < 0:
                raise ValueError(f"negative grade for {doc_id!r}")
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))


@dataclass(frozen=True)
class RankedList:
    """Ordered (doc_id, score) pairs for one query.

    Construction normalizes the ordering to descending score with ascending
    doc_id tie-break.
    """

    query_id: str
    items: tuple[tuple[str, float], ...] = ()
    tag: str = "run"

    def __post_init__(self):
        items = sorted(((str(d), float(s)) for d, s in self.items), key=lambda x: rank_key(*x))
        ids = [d for d, _ in items]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate doc_id in ranked list for {self.query_id!r}")
        object.__setattr__(self, "items", tuple(items))

    @property
    def doc_ids(self) -> list[str]:
        return [d for d, _ in self.items]

    def truncate(self, k: int) -> "RankedList":
        return RankedList(self.query_id, self.items[:k], self.tag)

    def __len__(self) -> int:
        return len(self.items)


# ---------------------------------------------------------------------------
# TREC run
# ---------------------------------------------------------------------------


def parse_trec_run(lines: Iterable[str] | str) -> list[RankedList]:
    """Parse a TREC run; stored ranks are ignored in favor of score order."""
    grouped: dict[str, list[tuple[str, float]]] = {}
    seen: dict[str, set[str]] = {}
    tags: dict[str, str] = {}
    for line_no, line in _lines(lines):
        parts = line.split()
        if len(parts) != 6:
            raise ParseError(line_no, f"expected 6 fields, got {len(parts)}")
        qid, _, doc_id, _, score_s, tag = parts
        try:
            score = float(score_s)
        except ValueError:
            raise ParseError(line_no, f"non-numeric score {score_s!r}") from None
        if not math.isfinite(score):
            raise ParseError(line_no, f"non-finite score {score_s!r}")
        ids = seen.setdefault(qid, set())
        if doc_id in ids:
            raise ParseError(line_no, f"duplicate doc_id {doc_id!r} for query {qid!r}")
        ids.add(doc_id)
        grouped.setdefault(qid, []).append((doc_id, score))
        tags.setdefault(qid, tag)
    return [RankedList(qid, tuple(items), tags[qid]) for qid, items in grouped.items()]


def serialize_trec_run(lists: Sequence[RankedList]) -> str:
    out = []
    for rl in lists:
        for rank, (doc_id, score) in enumerate(rl.items, start=1):
            out.append(f"{rl.query_id} Q0 {doc_id} {rank} {score:.6f} {rl.tag}\n")
    return "".join(out)


# ---------------------------------------------------------------------------
# qrels
# ---------------------------------------------------------------------------


def parse_qrels(lines: Iterable[str] | str) -> dict[str, Qrels]:
    grouped: dict[str, dict[str, int]] = {}
    for line_no, line in _lines(lines):
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(line_no, f"expected 4 fields, got {len(parts)}")
        qid, _, doc_id, grade_s = parts
        try:
            grade = int(grade_s)
        except ValueError:
            raise ParseError(line_no, f"non-integer grade {grade_s!r}") from None
        if grade < 0:
            raise ParseError(line_no, f"negative grade {grade}")
        entries = grouped.setdefault(qid, {})
        if doc_id in entries:
            raise ParseError(line_no, f"duplicate qrels entry for ({qid}, {doc_id})")
        entries[doc_id] = grade
    return {qid: Qrels(qid, e) for qid, e in grouped.items()}


def serialize_qrels(qrels: Iterable[Qrels]) -> str:
    return "".join(f"{q.query_id} 0 {d} {g}\n" for q in qrels for d, g in q.entries.items())


# ---------------------------------------------------------------------------
# JSONL records
# ---------------------------------------------------------------------------


def _json_records(lines: Iterable[str] | str) -> Iterator[tuple[int, dict]]:
    for line_no, line in _lines(lines):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(line_no, f"invalid JSON: {e.msg}") from None
        if not isinstance(rec, dict):
            raise ParseError(line_no, "record is not a JSON object")
        yield line_no, rec


def _require_str(rec: dict, key: str, line_no: int, allow_empty: bool = False) -> str:
    value = rec.get(key)
    if not isinstance(value, str) or (not allow_empty and not value):
        raise ParseError(line_no, f"missing or invalid {key!r}")
    return value


def parse_topics(lines: Iterable[str] | str) -> list[Topic]:
    topics: list[Topic] = []
    seen: set[str] = set()
    for line_no, rec in _json_records(lines):
        qid = _require_str(rec, "query_id", line_no)
        query = _require_str(rec, "query", line_no)
        if qid in seen:
            raise ParseError(line_no, f"duplicate query_id {qid!r}")
        seen.add(qid)
        raw_sqs = rec.get("sub_questions") or []
        if not isinstance(raw_sqs, list):
            raise ParseError(line_no, "sub_questions must be a list")
        sqs = []
        for sq in raw_sqs:
            if not isinstance(sq, dict):
                raise ParseError(line_no, "sub-question must be an object")
            sqs.append((_require_str(sq, "sq_id", line_no), _require_str(sq, "text", line_no)))
        try:
            topics.append(Topic(qid, query, tuple(sqs)))
        except ValueError as e:
            raise ParseError(line_no, str(e)) from None
    return topics


def serialize_topics(topics: Iterable[Topic]) -> str:
    out = []
    for t in topics:
        rec = {
            "query_id": t.query_id,
            "query": t.query_text,
            "sub_questions": [{"sq_id": a, "text": b} for a, b in t.sub_questions],
        }
        out.append(json.dumps(rec, ensure_ascii=False) + "\n")
    return "".join(out)


def parse_nugget_judgments(lines: Iterable[str] | str) -> list[NuggetJudgmentSet]:
    grouped: dict[str, dict[tuple[str, str], int]] = {}
    for line_no, rec in _json_records(lines):
        qid = _require_str(rec, "query_id", line_no)
        doc_id = _require_str(rec, "doc_id", line_no)
        sq_id = _require_str(rec, "sq_id", line_no)
        grade = rec.get("grade")
        if isinstance(grade, bool) or not isinstance(grade, int):
            raise ParseError(line_no, f"grade must be an integer, got {grade!r}")
        if not 0 <= grade <= 5:
            raise ParseError(line_no, f"grade {grade} outside 0..5")
        entries = grouped.setdefault(qid, {})
        if (doc_id, sq_id) in entries:
            raise ParseError(line_no, f"duplicate judgment for ({qid}, {doc_id}, {sq_id})")
        entries[(doc_id, sq_id)] = grade
    return [NuggetJudgmentSet(qid, e) for qid, e in grouped.items()]


def serialize_nugget_judgments(sets: Iterable[NuggetJudgmentSet]) -> str:
    out = []
    for js in sets:
        for (doc_id, sq_id), grade in js.entries.items():
            rec = {"query_id": js.query_id, "doc_id": doc_id, "sq_id": sq_id, "grade": grade}
            out.append(json.dumps(rec) + "\n")
    return "".join(out)


def parse_corpus(lines: Iterable[str] | str) -> list[Document]:
    docs: list[Document] = []
    seen: set[str] = set()
    for line_no, rec in _json_records(lines):
        doc_id = _require_str(rec, "doc_id", line_no)
        title = rec.get("title", "")
        if not isinstance(title, str):
            raise ParseError(line_no, "title must be a string")
        text = _require_str(rec, "text", line_no, allow_empty=True)
        if doc_id in seen:
            raise ParseError(line_no, f"duplicate doc_id {doc_id!r}")
        seen.add(doc_id)
        try:
            docs.append(Document(doc_id, title, text))
        except ValueError as e:
            raise ParseError(line_no, str(e)) from None
    return docs


def serialize_corpus(docs: Iterable[Document]) -> str:
    return "".join(
        json.dumps({"doc_id": d.doc_id, "title": d.title, "text": d.text}, ensure_ascii=False) + "\n"
        for d in docs
    )


def read_text(path) -> str:
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def write_text(path, content: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(content)
