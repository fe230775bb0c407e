"""Rubric-based answerability judgments from a chat-completion endpoint.

The endpoint URL, model name and bearer token come from the environment
(``COVERKIT_JUDGE_URL``, ``COVERKIT_JUDGE_MODEL``, ``COVERKIT_JUDGE_TOKEN``)
unless passed explicitly.  Any reply that is not a bare integer 0-5 is graded 0;
transport failures are retried with exponential backoff and surface as
:class:`JudgeTransportError` once attempts run out.
"""

from __future__ import annotations

import logging
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import httpx

log = logging.getLogger(__name__)

ANSWERABILITY_PROMPT = (
    "Instruction: Determine whether the question can be answered based on the provided context? "
    "Rate the context with on a scale from 0 to 5 according to the guideline below. "
    "Do not write anything except the rating.\n"
    "\n"
    "Guideline:\n"
    "5: The context is highly relevant, complete, and accurate.\n"
    "4: The context is mostly relevant and complete but may have minor gaps or inaccuracies.\n"
    "3: The context is partially relevant and complete, with noticeable gaps or inaccuracies.\n"
    "2: The context has limited relevance and completeness, with significant gaps or inaccuracies.\n"
    "1: The context is minimally relevant or complete, with substantial shortcomings.\n"
    "0: The context is not relevant or complete at all.\n"
    "\n"
    "Question: {q}\n"
    "Context: {c}\n"
    "Rating:"
)

# Template only; sub-question generation itself is not performed by this package.
SUBQUESTION_PROMPT = (
    "Instruction: Write 10 diverse sub-questions that can reveal the information required to answer "
    "the given report request. Each sub-question should be self-contained and include the necessary "
    "context. Collectively, the sub-questions should fully cover the scope of the report request. "
    "Write each sub-question within '<q>' and '</q>' tags.\n"
    "\n"
    "Report request: {query}\n"
    "Sub-questions: <q>"
)

_GRADE_RE = re.compile(r"[0-5]")


class JudgeTransportError(RuntimeError):
    pass


@dataclass(frozen=True)
class JudgeEndpoint:
    url: str
    model: str = "judge"
    token: str | None = None
    timeout: float = 60.0
    attempts: int = 3
    backoff: float = 0.5

    @classmethod
    def from_env(cls, url: str | None = None, model: str | None = None, **kw) -> "JudgeEndpoint":
        url = url or os.environ.get("COVERKIT_JUDGE_URL")
        if not url:
            raise ValueError("judge endpoint URL not set (pass --endpoint or COVERKIT_JUDGE_URL)")
        return cls(
            url=url,
            model=model or os.environ.get("COVERKIT_JUDGE_MODEL", "judge"),
            token=os.environ.get("COVERKIT_JUDGE_TOKEN"),
            **kw,
        )


def build_prompt(sub_question: str, document: str) -> str:
    return ANSWERABILITY_PROMPT.format(q=sub_question, c=document)


def request_body(endpoint: JudgeEndpoint, sub_question: str, document: str) -> dict:
    return {
        "model": endpoint.model,
        "messages": [{"role": "user", "content": build_prompt(sub_question, document)}],
        "temperature": 0.0,
    }


def parse_grade(text: str | None) -> int:
    """Bare integer 0-5, anything else 0."""
    if text is None:
        return 0
    s = text.strip()
    return int(s) if _GRADE_RE.fullmatch(s) else 0


def _reply_text(payload) -> str | None:
    try:
        return payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        return None


def judge_remote(
    endpoint: JudgeEndpoint, sub_question: str, document: str, client: httpx.Client | None = None
) -> int:
    headers = {"Authorization": f"Bearer {endpoint.token}"} if endpoint.token else {}
    body = request_body(endpoint, sub_question, document)
    own = client is None
    client = client or httpx.Client(timeout=endpoint.timeout)
    try:
        last: Exception | None = None
        for attempt in range(endpoint.attempts):
            if attempt:
                time.sleep(endpoint.backoff * 2 ** (attempt - 1))
            try:
                resp = client.post(endpoint.url, json=body, headers=headers)
            except httpx.TransportError as e:
                last = e
                log.warning("judge request failed (attempt %d): %s", attempt + 1, e)
                continue
            if resp.status_code >= 500 or resp.status_code == 429:
                last = RuntimeError(f"HTTP {resp.status_code}")
                log.warning("judge returned HTTP %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise JudgeTransportError(f"judge rejected request: HTTP {resp.status_code}")
            try:
                payload = resp.json()
            except ValueError:
                return 0
            return parse_grade(_reply_text(payload))
        raise JudgeTransportError(f"judge unreachable after {endpoint.attempts} attempts: {last}")
    finally:
        if own:
            client.close()


@dataclass(frozen=True)
class JudgeTask:
    query_id: str
    doc_id: str
    sq_id: str
    sub_question: str
    document: str


def judge_many(endpoint: JudgeEndpoint, tasks: Sequence[JudgeTask], max_in_flight: int = 4) -> dict[tuple[str, str, str], int]:
    """Grades keyed by (query_id, doc_id, sq_id); completion order does not matter."""
    with httpx.Client(timeout=endpoint.timeout) as client:

        def one(task: JudgeTask) -> tuple[tuple[str, str, str], int]:
            return (task.query_id, task.doc_id, task.sq_id), judge_remote(endpoint, task.sub_question, task.document, client)

        if max_in_flight > 1:
            with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
                results: Iterable = list(pool.map(one, tasks))
        else:
            results = [one(t) for t in tasks]
    return dict(results)
