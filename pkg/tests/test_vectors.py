import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coverkit.vectors import (
    BadMagicError,
    EmbeddingMatrix,
    TruncatedFileError,
    VersionMismatchError,
    ZeroNormError,
    cosine,
    knn_search,
    normalize_rows,
    read_vectors,
    write_vectors,
)


def random_matrix(rng, n, d, prefix="d"):
    return normalize_rows([f"{prefix}{i:03d}" for i in range(n)], rng.normal(size=(n, d)))


class TestNormalize:
    def test_three_four_five(self):
        m = normalize_rows(["a"], [[3.0, 4.0]])
        assert m.rows[0].tolist() == [0.6, 0.8]

    def test_idempotent(self):
        m = random_matrix(np.random.default_rng(0), 5, 4)
        again = normalize_rows(m.ids, m.rows)
        assert np.max(np.abs(again.rows - m.rows)) < 1e-12

    def test_zero_row(self):
        with pytest.raises(ZeroNormError) as e:
            normalize_rows(["a", "b"], [[1.0, 0.0], [0.0, 0.0]])
        assert e.value.row_id == "b"

    def test_rows_read_only(self):
        m = normalize_rows(["a"], [[1.0, 1.0]])
        with pytest.raises(ValueError):
            m.rows[0, 0] = 2.0

    def test_non_unit_rejected(self):
        with pytest.raises(ValueError):
            EmbeddingMatrix(("a",), np.array([[1.0, 1.0]]))


class TestCosine:
    def test_identity(self):
        v = np.array([0.6, 0.8])
        assert cosine(v, v) == 1.0

    def test_orthogonal(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_antipodal(self):
        assert cosine(np.array([1.0, 0.0]), np.array([-1.0, 0.0])) == -1.0

    def test_symmetric_exactly(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            a, b = rng.normal(size=(2, 17))
            a /= np.linalg.norm(a)
            b /= np.linalg.norm(b)
            assert cosine(a, b) == cosine(b, a)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cosine(np.ones(2), np.ones(3))


class TestKnn:
    def test_k_larger_than_corpus(self):
        q = normalize_rows(["q"], [[1.0, 0.0]])
        d = normalize_rows(["d"], [[0.0, 1.0]])
        assert len(knn_search(q, d, 5)[0].items) == 1

    def test_query_equal_to_doc(self):
        rng = np.random.default_rng(2)
        d = random_matrix(rng, 10, 4)
        q = EmbeddingMatrix(("q",), d.rows[3:4].copy())
        top = knn_search(q, d, 3)[0].items[0]
        assert top == (d.ids[3], 1.0)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_full_sort_oracle(self, seed):
        rng = np.random.default_rng(seed)
        # coarse grid values force exact score ties
        raw = rng.integers(-2, 3, size=(20, 3)).astype(float)
        raw[np.all(raw == 0, axis=1)] = 1.0
        ids = [f"d{i}" for i in rng.permutation(20)]
        d = normalize_rows(ids, raw)
        q = normalize_rows(["q0", "q1"], rng.integers(-2, 3, size=(2, 3)).astype(float) + 0.5)
        for k in (1, 5, 20):
            for res, qv in zip(knn_search(q, d, k), q.rows):
                scores = [(min(1.0, max(-1.0, float(qv @ row))), i) for i, row in zip(d.ids, d.rows)]
                oracle = sorted(scores, key=lambda x: (-x[0], x[1]))[:k]
                assert [i for _, i in oracle] == [i for i, _ in res.items]

    def test_row_permutation_invariant(self):
        rng = np.random.default_rng(3)
        d = random_matrix(rng, 30, 5)
        q = random_matrix(rng, 4, 5, "q")
        perm = rng.permutation(30)
        d2 = EmbeddingMatrix(tuple(d.ids[i] for i in perm), d.rows[perm])
        assert knn_search(q, d, 30) == knn_search(q, d2, 30)

    def test_worker_count_does_not_change_output(self):
        rng = np.random.default_rng(4)
        d = random_matrix(rng, 50, 6)
        q = random_matrix(rng, 150, 6, "q")  # spans several query chunks
        assert knn_search(q, d, 7, workers=1) == knn_search(q, d, 7, workers=4)

    def test_bad_k(self):
        m = normalize_rows(["a"], [[1.0]])
        with pytest.raises(ValueError):
            knn_search(m, m, 0)


def _bytes(m):
    buf = io.BytesIO()
    write_vectors(m, buf)
    return buf.getvalue()


class TestFormat:
    @settings(max_examples=50, deadline=None)
    @given(
        n=st.integers(0, 12),
        d=st.integers(1, 9),
        seed=st.integers(0, 2**31),
        ids=st.lists(st.text(min_size=1, max_size=10), min_size=12, max_size=12, unique=True),
    )
    def test_round_trip(self, n, d, seed, ids):
        rng = np.random.default_rng(seed)
        m = normalize_rows(ids[:n], rng.normal(size=(n, d))) if n else EmbeddingMatrix((), np.empty((0, d)))
        back = read_vectors(io.BytesIO(_bytes(m)))
        assert back.ids == m.ids
        assert back.rows.shape == m.rows.shape
        if n:
            assert np.max(np.abs(back.rows - m.rows)) < 1e-6
            # stored values are exactly the f32 rounding of the input
            assert _bytes(back)[: 17] == _bytes(m)[: 17]

    def test_layout(self):
        m = normalize_rows(["ab"], [[1.0, 0.0]])
        expected = b"COVR" + struct.pack("<BIQ", 1, 2, 1) + struct.pack("<H", 2) + b"ab" + struct.pack("<2f", 1.0, 0.0)
        assert _bytes(m) == expected

    def test_empty(self):
        m = EmbeddingMatrix((), np.empty((0, 3)))
        back = read_vectors(io.BytesIO(_bytes(m)))
        assert len(back) == 0

    def test_bad_magic(self):
        with pytest.raises(BadMagicError):
            read_vectors(io.BytesIO(b"XXXX" + b"\0" * 13))

    def test_version(self):
        raw = bytearray(_bytes(normalize_rows(["a"], [[1.0]])))
        raw[4] = 2
        with pytest.raises(VersionMismatchError):
            read_vectors(io.BytesIO(bytes(raw)))

    @pytest.mark.parametrize("cut", [2, 10, 19, 22])
    def test_truncated(self, cut):
        raw = _bytes(normalize_rows(["ab"], [[1.0, 0.0]]))
        with pytest.raises(TruncatedFileError):
            read_vectors(io.BytesIO(raw[:cut]))

    def test_huge_count_does_not_allocate(self):
        raw = b"COVR" + struct.pack("<BIQ", 1, 4, 2**60)
        with pytest.raises(TruncatedFileError):
            read_vectors(io.BytesIO(raw))
