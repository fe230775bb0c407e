"""Desk-scale trainable bi-encoder.

A text is encoded as::

    pooled = (mode_vector + sum of token embeddings) / (n_tokens + 1)
    v      = normalize(projection^T @ pooled)

The mode vector (one for queries, one for documents) stands in for the
``search_query:`` / ``search_document:`` prefixes of a transformer encoder and
guarantees the pooled set is never empty.  Out-of-vocabulary tokens are
skipped.  Gradients are analytic and include the normalization Jacobian.
"""

from __future__ import annotations

import enum
import re
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from coverkit.vectors import EmbeddingMatrix, ZeroNormError

MAX_QUERY_TOKENS = 180
MAX_DOC_TOKENS = 512

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class EncodeMode(enum.IntEnum):
    QUERY = 0
    DOCUMENT = 1


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


class Vocabulary:
    def __init__(self, tokens: Iterable[str]):
        self.tokens: tuple[str, ...] = tuple(tokens)
        self.index: dict[str, int] = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    @classmethod
    def build(cls, texts: Iterable[str]) -> "Vocabulary":
        seen: set[str] = set()
        for text in texts:
            seen.update(tokenize(text))
        return cls(sorted(seen))

    def __len__(self) -> int:
        return len(self.tokens)

    def ids(self, text: str, max_tokens: int | None = None) -> list[int]:
        toks = tokenize(text)
        if max_tokens is not None:
            toks = toks[:max_tokens]
        return [self.index[t] for t in toks if t in self.index]


@dataclass
class EncoderParams:
    token_table: np.ndarray  # V x h
    mode_vectors: np.ndarray  # 2 x h
    projection: np.ndarray  # h x dim

    def __post_init__(self):
        v, h = self.token_table.shape
        if self.mode_vectors.shape != (2, h) or self.projection.shape[0] != h:
            raise ValueError("inconsistent parameter shapes")

    @property
    def hidden(self) -> int:
        return self.token_table.shape[1]

    @property
    def dim(self) -> int:
        return self.projection.shape[1]

    def blocks(self) -> dict[str, np.ndarray]:
        return {"token_table": self.token_table, "mode_vectors": self.mode_vectors, "projection": self.projection}

    def copy(self) -> "EncoderParams":
        return EncoderParams(self.token_table.copy(), self.mode_vectors.copy(), self.projection.copy())

    def zeros_like(self) -> "EncoderParams":
        return EncoderParams(*(np.zeros_like(b) for b in self.blocks().values()))

    def add_scaled(self, other: "EncoderParams", scale: float) -> "EncoderParams":
        return EncoderParams(
            self.token_table + scale * other.token_table,
            self.mode_vectors + scale * other.mode_vectors,
            self.projection + scale * other.projection,
        )

    def flat(self) -> np.ndarray:
        return np.concatenate([b.ravel() for b in self.blocks().values()])

    def all_finite(self) -> bool:
        return all(np.isfinite(b).all() for b in self.blocks().values())


def init_params(seed: int, vocab_size: int, hidden: int, dim: int) -> EncoderParams:
    if min(vocab_size, hidden, dim) <= 0:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    return EncoderParams(
        rng.uniform(-0.1, 0.1, size=(vocab_size, hidden)),
        rng.uniform(-0.1, 0.1, size=(2, hidden)),
        rng.uniform(-0.1, 0.1, size=(hidden, dim)),
    )


@dataclass(frozen=True)
class TextBatch:
    """Bag-of-token featurization of several texts.

    ``counts`` is dense over ``columns`` only (the union of token ids used),
    which keeps both passes cheap for large vocabularies.
    """

    columns: np.ndarray  # (u,) token ids
    counts: np.ndarray  # (n, u)
    n_tokens: np.ndarray  # (n,)
    modes: np.ndarray  # (n,)

    def __len__(self) -> int:
        return self.counts.shape[0]


def featurize(vocab: Vocabulary, texts: Sequence[str], mode: EncodeMode | Sequence[EncodeMode]) -> TextBatch:
    modes = [mode] * len(texts) if isinstance(mode, EncodeMode) else list(mode)
    if len(modes) != len(texts):
        raise ValueError("one mode per text required")
    id_lists = [
        vocab.ids(text, MAX_QUERY_TOKENS if m == EncodeMode.QUERY else MAX_DOC_TOKENS)
        for text, m in zip(texts, modes)
    ]
    columns = np.array(sorted({i for ids in id_lists for i in ids}), dtype=np.int64)
    col_of = {c: j for j, c in enumerate(columns.tolist())}
    counts = np.zeros((len(texts), len(columns)))
    for r, ids in enumerate(id_lists):
        for i in ids:
            counts[r, col_of[i]] += 1.0
    n_tokens = np.array([len(ids) for ids in id_lists], dtype=np.float64)
    return TextBatch(columns, counts, n_tokens, np.array([int(m) for m in modes], dtype=np.int64))


@dataclass
class Forward:
    """Intermediate values of a batched forward pass, kept for backward."""

    batch: TextBatch
    pooled: np.ndarray
    norms: np.ndarray
    vectors: np.ndarray


def forward(params: EncoderParams, batch: TextBatch, ids: Sequence[str] | None = None) -> Forward:
    summed = params.mode_vectors[batch.modes] + batch.counts @ params.token_table[batch.columns]
    pooled = summed / (batch.n_tokens + 1.0)[:, None]
    u = pooled @ params.projection
    norms = np.sqrt(np.einsum("ij,ij->i", u, u))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroNormError(ids[zero[0]] if ids is not None else f"text #{zero[0]}")
    return Forward(batch, pooled, norms, u / norms[:, None])


def backward(params: EncoderParams, fwd: Forward, upstream: np.ndarray, grads: EncoderParams) -> None:
    """Accumulate d(sum(upstream * vectors))/d(params) into ``grads``."""
    v = fwd.vectors
    gu = (upstream - v * np.einsum("ij,ij->i", v, upstream)[:, None]) / fwd.norms[:, None]
    grads.projection += fwd.pooled.T @ gu
    scaled = (gu @ params.projection.T) / (fwd.batch.n_tokens + 1.0)[:, None]
    grads.token_table[fwd.batch.columns] += fwd.batch.counts.T @ scaled
    np.add.at(grads.mode_vectors, fwd.batch.modes, scaled)


def encode(params: EncoderParams, vocab: Vocabulary, text: str, mode: EncodeMode) -> np.ndarray:
    return forward(params, featurize(vocab, [text], mode)).vectors[0]


def encode_grad(
    params: EncoderParams, vocab: Vocabulary, text: str, mode: EncodeMode, upstream: np.ndarray
) -> EncoderParams:
    fwd = forward(params, featurize(vocab, [text], mode))
    grads = params.zeros_like()
    backward(params, fwd, np.asarray(upstream, dtype=np.float64)[None, :], grads)
    return grads


def encode_texts(
    params: EncoderParams, vocab: Vocabulary, ids: Sequence[str], texts: Sequence[str], mode: EncodeMode,
    chunk: int = 1024,
) -> EmbeddingMatrix:
    rows = [np.empty((0, params.dim))]
    for s in range(0, len(texts), chunk):
        rows.append(forward(params, featurize(vocab, texts[s : s + chunk], mode), ids[s : s + chunk]).vectors)
    return EmbeddingMatrix(tuple(ids), np.vstack(rows))


# ---------------------------------------------------------------------------
# parameter files: b"COVP" | u8 version | u32 section count | sections
# section: u16 name_len | name | u8 kind | payload
#   kind 0 (matrix): u32 rows | u32 cols | rows*cols f64
#   kind 1 (strings): u64 count | count x (u16 len | UTF-8 bytes)
# ---------------------------------------------------------------------------

PARAMS_MAGIC = b"COVP"
PARAMS_VERSION = 1


def write_params(params: EncoderParams, vocab: Vocabulary, sink: BinaryIO) -> None:
    sink.write(PARAMS_MAGIC)
    sink.write(struct.pack("<BI", PARAMS_VERSION, 4))

    def name(n: str, kind: int) -> None:
        raw = n.encode()
        sink.write(struct.pack("<H", len(raw)) + raw + struct.pack("<B", kind))

    name("vocab", 1)
    sink.write(struct.pack("<Q", len(vocab)))
    for tok in vocab.tokens:
        raw = tok.encode("utf-8")
        sink.write(struct.pack("<H", len(raw)) + raw)
    for key, block in params.blocks().items():
        name(key, 0)
        sink.write(struct.pack("<II", *block.shape))
        sink.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def read_params(source: BinaryIO) -> tuple[EncoderParams, Vocabulary]:
    from coverkit.vectors import BadMagicError, TruncatedFileError, VersionMismatchError

    def take(n: int) -> bytes:
        buf = source.read(n)
        if len(buf) != n:
            raise TruncatedFileError("truncated parameter file")
        return buf

    if take(4) != PARAMS_MAGIC:
        raise BadMagicError("not a parameter file")
    version, n_sections = struct.unpack("<BI", take(5))
    if version != PARAMS_VERSION:
        raise VersionMismatchError(f"unsupported parameter file version {version}")
    vocab = None
    blocks: dict[str, np.ndarray] = {}
    for _ in range(n_sections):
        (nlen,) = struct.unpack("<H", take(2))
        sec = take(nlen).decode()
        (kind,) = struct.unpack("<B", take(1))
        if kind == 1:
            (count,) = struct.unpack("<Q", take(8))
            toks = []
            for _ in range(count):
                (tlen,) = struct.unpack("<H", take(2))
                toks.append(take(tlen).decode("utf-8"))
            vocab = Vocabulary(toks)
        else:
            rows, cols = struct.unpack("<II", take(8))
            blocks[sec] = np.frombuffer(take(8 * rows * cols), dtype="<f8").reshape(rows, cols).astype(np.float64)
    missing = {"token_table", "mode_vectors", "projection"} - set(blocks)
    if vocab is None or missing:
        raise ValueError(f"parameter file missing sections: {sorted(missing) or ['vocab']}")
    return EncoderParams(blocks["token_table"], blocks["mode_vectors"], blocks["projection"]), vocab


def save_params(params: EncoderParams, vocab: Vocabulary, path) -> None:
    with open(path, "wb") as f:
        write_params(params, vocab, f)


def load_params(path) -> tuple[EncoderParams, Vocabulary]:
    with open(path, "rb") as f:
        return read_params(f)
