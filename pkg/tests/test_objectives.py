import math

import numpy as np
import pytest

from coverkit.encoder import Vocabulary, init_params
from coverkit.objectives import (
    QueryExample,
    TrainingBatch,
    TrainingConfig,
    TrainingDivergedError,
    batch_loss,
    covcon_loss,
    covdistil_loss,
    prepare_batch,
    prepared_loss,
    softmax,
    teacher_distribution,
    train,
)
from oracles import StackedBatchLoss, central_differences, normwise_rel_error

VOCAB = Vocabulary([f"w{i}" for i in range(20)])


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def random_batch(seed, n_q=2, n_neg=2, n_sq=2, shared_doc=False):
    rng = np.random.default_rng(seed)

    def txt(n):
        return " ".join(rng.choice(VOCAB.tokens, size=n))

    exs = []
    for q in range(n_q):
        negs = [(f"n{q}{j}", txt(6)) for j in range(n_neg)]
        if shared_doc and q:
            negs[0] = exs[0].positive
        exs.append(QueryExample(txt(4), (f"p{q}", txt(6)), tuple(negs), tuple(txt(3) for _ in range(n_sq)), f"q{q}"))
    return TrainingBatch(tuple(exs))


class TestCovCon:
    def test_singleton_is_zero(self):
        assert covcon_loss([0.3], 0, 0.02)[0] == 0.0

    @pytest.mark.parametrize("t", [0.02, 0.5, 1.0, 7.0])
    @pytest.mark.parametrize("n", [2, 3, 10])
    def test_equal_scores_give_log_n(self, n, t):
        assert abs(covcon_loss([0.4] * n, 1, t)[0] - math.log(n)) < 1e-12

    def test_dominant_positive_keeps_tiny_loss(self):
        loss, _ = covcon_loss([1.0, 0.0], 0, 0.02)
        expected = math.log1p(math.exp(-50.0))
        assert expected > 0 and abs(loss - expected) <= 1e-12 * expected

    def test_gradient_is_softmax_minus_onehot(self):
        s = np.array([0.2, -0.1, 0.5])
        _, g = covcon_loss(s, 2, 0.5)
        p = np.exp(s / 0.5) / np.exp(s / 0.5).sum()
        assert np.allclose(g, (p - np.array([0, 0, 1])) / 0.5, atol=1e-15)

    def test_bad_positive_index(self):
        with pytest.raises(ValueError):
            covcon_loss([0.1, 0.2], 2, 1.0)


class TestTeacher:
    def test_self_teacher_equals_student(self):
        rng = np.random.default_rng(0)
        q = unit(rng.normal(size=5))
        docs = np.array([unit(rng.normal(size=5)) for _ in range(4)])
        student = softmax(np.clip(docs @ q, -1, 1) / 0.02)
        assert np.array_equal(teacher_distribution([q], docs, 0.02), student)

    def test_symmetric_means(self):
        sq = [unit([1.0, 1.0]), unit([1.0, 1.0])]
        docs = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert np.allclose(teacher_distribution(sq, docs, 0.02), [0.5, 0.5], atol=1e-15)

    def test_direct_evaluation(self):
        sq = [np.array([0.8, 0.2, math.sqrt(1 - 0.68)])]
        docs = np.eye(3)[:2]
        tail = math.exp(-30) / (1 + math.exp(-30))
        got = teacher_distribution(sq, docs, 0.02)
        assert abs(got[1] - tail) < 1e-9 * tail and abs(got[0] - (1 - tail)) < 1e-14

    def test_sums_to_one(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            sq = [unit(rng.normal(size=6)) for _ in range(3)]
            docs = np.array([unit(rng.normal(size=6)) for _ in range(7)])
            assert abs(teacher_distribution(sq, docs, 0.02).sum() - 1) < 1e-12

    def test_empty_sub_questions(self):
        with pytest.raises(ValueError):
            teacher_distribution(np.empty((0, 3)), np.eye(3), 1.0)


class TestCovDistil:
    def test_identity(self):
        assert covdistil_loss([0.3, 0.7], [0.3, 0.7], 1.0) == 0.0

    def test_hand_value(self):
        expected = 0.5 * math.log(5 / 9) + 0.5 * math.log(5)
        assert abs(covdistil_loss([0.5, 0.5], [0.9, 0.1], 1.0) - expected) < 1e-15
        assert abs(expected - 0.5108) < 1e-4

    def test_weight_off(self):
        assert covdistil_loss([0.5, 0.5], [0.9, 0.1], 0.0) == 0.0

    def test_not_a_distribution(self):
        with pytest.raises(ValueError):
            covdistil_loss([0.5, 0.6], [0.5, 0.5], 1.0)


class TestBatchLoss:
    def test_lambda_zero_is_mean_covcon(self):
        batch = random_batch(0)
        p = init_params(0, 20, 8, 6)
        res = batch_loss(batch, p, TrainingConfig(lambda_cd=0.0), VOCAB)
        prep = prepare_batch(batch, VOCAB)
        expected = np.mean([covcon_loss(res.scores[i], int(prep.positive_cols[i]), 0.02)[0] for i in range(2)])
        assert res.loss == pytest.approx(expected, rel=1e-15, abs=0)

    def test_empty_sub_questions_is_pure_covcon(self):
        batch = random_batch(1, n_sq=0)
        p = init_params(1, 20, 8, 6)
        a = batch_loss(batch, p, TrainingConfig(lambda_cd=0.5), VOCAB)
        b = batch_loss(batch, p, TrainingConfig(lambda_cd=0.0), VOCAB)
        assert a.loss == b.loss and a.terms.covdistil == 0.0

    def test_in_batch_documents_deduplicated(self):
        batch = random_batch(2, shared_doc=True)
        prep = prepare_batch(batch, VOCAB)
        assert len(prep.doc_ids) == len(set(prep.doc_ids)) == 5

    def test_value_matches_oracle(self):
        for seed in range(10):
            batch = random_batch(seed, shared_doc=bool(seed % 2))
            p = init_params(seed, 20, 8, 6)
            res = batch_loss(batch, p, TrainingConfig(temperature=0.1, lambda_cd=0.3), VOCAB)
            orc = StackedBatchLoss(batch.examples, VOCAB.tokens, 0.1, 0.3)
            ref = orc(p.token_table[None], p.mode_vectors[None], p.projection[None])[0]
            assert abs(res.loss - ref) < 1e-12

    @pytest.mark.parametrize("stop", [True, False])
    def test_gradient_small_batch(self, stop):
        # 2 queries, 2 negatives, 2 sub-questions each
        batch = random_batch(3)
        p = init_params(3, 20, 8, 6)
        cfg = TrainingConfig(temperature=0.1, lambda_cd=0.5, teacher_stop_gradient=stop)
        res = prepared_loss(prepare_batch(batch, VOCAB), p, cfg)
        orc = StackedBatchLoss(batch.examples, VOCAB.tokens, 0.1, 0.5)
        fixed = None
        if stop:
            fixed = [lt[0] for lt in orc.log_teacher(p.token_table[None], p.mode_vectors[None], p.projection[None])]
        num = central_differences(orc, p, fixed_log_teacher=fixed)
        for a, n in zip([res.grads.token_table, res.grads.mode_vectors, res.grads.projection], num):
            assert normwise_rel_error(a, n) < 1e-6

    def test_stop_gradient_changes_gradient_not_loss(self):
        batch = random_batch(4)
        p = init_params(4, 20, 8, 6)
        a = batch_loss(batch, p, TrainingConfig(teacher_stop_gradient=True), VOCAB)
        b = batch_loss(batch, p, TrainingConfig(teacher_stop_gradient=False), VOCAB)
        assert a.loss == b.loss
        assert not np.allclose(a.grads.flat(), b.grads.flat())


class TestTrain:
    def _dataset(self):
        return list(random_batch(5, n_q=6).examples)

    def test_lr_zero_leaves_params(self):
        p = init_params(0, 20, 8, 6)
        out, trace = train(self._dataset(), p, TrainingConfig(learning_rate=0.0, epochs=2, queries_per_batch=4), VOCAB)
        assert np.array_equal(out.flat(), p.flat())
        assert len(trace.batch_losses) == 4

    def test_single_step(self):
        # one full batch, one step: theta_1 = theta_0 - lr * grad, grad from the independent oracle
        data = self._dataset()
        p = init_params(0, 20, 8, 6)
        cfg = TrainingConfig(temperature=0.1, learning_rate=0.05, epochs=1, queries_per_batch=len(data), docs_per_query=3)
        out, _ = train(data, p, cfg, VOCAB)
        orc = StackedBatchLoss(data, VOCAB.tokens, cfg.temperature, cfg.lambda_cd)
        fixed = [lt[0] for lt in orc.log_teacher(p.token_table[None], p.mode_vectors[None], p.projection[None])]
        num = central_differences(orc, p, fixed_log_teacher=fixed)
        for before, after, g in zip([p.token_table, p.mode_vectors, p.projection],
                                    [out.token_table, out.mode_vectors, out.projection], num):
            assert normwise_rel_error((before - after) / cfg.learning_rate, g) < 1e-6

    def test_input_not_mutated(self):
        p = init_params(0, 20, 8, 6)
        before = p.flat().copy()
        train(self._dataset(), p, TrainingConfig(learning_rate=0.1, epochs=1), VOCAB)
        assert np.array_equal(p.flat(), before)

    def test_deterministic(self):
        p = init_params(0, 20, 8, 6)
        cfg = TrainingConfig(learning_rate=0.1, epochs=2, queries_per_batch=2, docs_per_query=2)
        a, _ = train(self._dataset(), p, cfg, VOCAB)
        b, _ = train(self._dataset(), p, cfg, VOCAB)
        assert np.array_equal(a.flat(), b.flat())

    def test_divergence_reported(self):
        p = init_params(0, 20, 8, 6)
        p.token_table[:] = np.nan
        with pytest.raises(TrainingDivergedError, match="non-finite loss"):
            train(self._dataset(), p, TrainingConfig(), VOCAB)

    def test_finite_trace_on_synthetic_data(self):
        from coverkit.experiments import ToyConfig, build_vocabulary, prepare_toy, resolve_examples
        from coverkit.scope import build_training_pairs

        cfg = ToyConfig(seed=11, n_train=20, n_heldout=2, n_docs=200)
        toy = prepare_toy(cfg)
        pairs, _ = build_training_pairs(toy.train_topics, toy.ds.judgments, toy.ds.candidates, cfg.coverage, 11, 2)
        vocab = build_vocabulary(toy.ds.corpus, pairs)
        ex = resolve_examples(pairs, {d.doc_id: d for d in toy.ds.corpus})
        _, trace = train(ex, init_params(11, len(vocab), 16, 16), cfg.training, vocab)
        assert len(trace.epoch_losses) == 3 and all(math.isfinite(x) for x in trace.batch_losses)


@pytest.mark.parametrize(
    "kw",
    [dict(temperature=0), dict(lambda_cd=-1), dict(docs_per_query=1), dict(epochs=0), dict(learning_rate=-1)],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        TrainingConfig(**kw)
