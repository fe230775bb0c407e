import math

import numpy as np
import pytest

import oracles
from coverkit.data import NuggetJudgmentSet, Qrels, RankedList, Topic
from coverkit.metrics import (
    EvalConfig,
    IdealMode,
    NuggetMatrix,
    alpha_ndcg_at_k,
    cov_at_k,
    evaluate_run,
    format_table,
    ideal_alpha_dcg,
    ndcg_at_k,
    paired_t_test,
    per_query_tsv,
    precision_at_k,
)
from coverkit.scope import CandidateList, coverage_curve_for_topic, make_synthetic_dataset


def ranked(ids, qid="q"):
    return RankedList(qid, tuple((d, float(len(ids) - i)) for i, d in enumerate(ids)))


def matrix(doc_nuggets, nuggets):
    return NuggetMatrix("q", tuple(nuggets), {d: frozenset(s) for d, s in doc_nuggets.items()})


class TestPrecision:
    def test_three_of_ten(self):
        ids = [f"d{i}" for i in range(10)]
        q = Qrels("q", {"d1": 1, "d4": 2, "d9": 1, "zz": 3})
        assert precision_at_k(ranked(ids), q, EvalConfig()) == 0.3

    def test_all_relevant(self):
        ids = [f"d{i}" for i in range(10)]
        assert precision_at_k(ranked(ids), Qrels("q", {d: 1 for d in ids}), EvalConfig()) == 1.0

    def test_short_run_denominator_is_k(self):
        assert precision_at_k(ranked(["a"]), Qrels("q", {"a": 1}), EvalConfig()) == 0.1

    def test_empty_run(self):
        assert precision_at_k(RankedList("q"), Qrels("q", {"a": 1}), EvalConfig()) == 0.0


class TestNdcg:
    def test_single_relevant_at_top(self):
        assert ndcg_at_k(ranked(["a", "b"]), Qrels("q", {"a": 1}), EvalConfig()) == 1.0

    def test_hand_value(self):
        got = ndcg_at_k(ranked(["a", "b"]), Qrels("q", {"a": 0, "b": 2}), EvalConfig())
        assert abs(got - 1 / math.log2(3)) < 1e-15

    def test_no_relevant_is_zero(self):
        assert ndcg_at_k(ranked(["a"]), Qrels("q", {"a": 0}), EvalConfig()) == 0.0

    def test_linear_gain(self):
        cfg = EvalConfig(linear_gain=True)
        got = ndcg_at_k(ranked(["a", "b"]), Qrels("q", {"a": 1, "b": 3}), cfg)
        assert abs(got - (1 + 3 / math.log2(3)) / (3 + 1 / math.log2(3))) < 1e-15


class TestCoverage:
    def test_half(self):
        nm = matrix({"d1": {"n1"}, "d2": {"n1"}}, ["n1", "n2"])
        assert cov_at_k(ranked(["d1", "d2"]), nm, EvalConfig()) == 0.5

    def test_zero_nuggets(self):
        with pytest.raises(ValueError):
            cov_at_k(ranked(["d1"]), matrix({}, []), EvalConfig())

    @pytest.mark.parametrize("seed", range(30))
    def test_equals_accumulated_curve(self, seed):
        rng = np.random.default_rng(seed)
        inst = oracles.random_eval_instance(rng)
        if not inst["ranking"]:
            return
        topic = Topic("q", "x", tuple((n, n) for n in inst["nuggets"]))
        js = NuggetJudgmentSet("q", inst["grades"])
        curve = coverage_curve_for_topic(js, topic, CandidateList("q", tuple(inst["ranking"])), 4, 20)
        nm = NuggetMatrix.from_judgments(topic, js, 4)
        for k, v in curve:
            assert cov_at_k(ranked(inst["ranking"]), nm, EvalConfig(k=k)) == v


class TestAlphaNdcg:
    def test_worked_example(self):
        nm = matrix({"d1": {"n1"}, "d2": {"n1"}, "d3": {"n2"}}, ["n1", "n2"])
        dcg = 1 + 0.5 / math.log2(3) + 0.5
        ideal = 1 + 1 / math.log2(3) + 0.25
        for mode in IdealMode:
            cfg = EvalConfig(k=3, alpha=0.5, ideal_mode=mode)
            assert abs(ideal_alpha_dcg(nm, cfg) - ideal) < 1e-12
            got = alpha_ndcg_at_k(ranked(["d1", "d2", "d3"]), nm, cfg)
            assert abs(got - dcg / ideal) < 1e-12
            assert round(got, 5) == 0.96520

    @pytest.mark.parametrize("seed", range(20))
    def test_alpha_zero_is_count_gain_ndcg(self, seed):
        rng = np.random.default_rng(seed)
        inst = oracles.random_eval_instance(rng)
        dn = oracles.contained(inst["grades"], 4)
        nm = matrix(dn, inst["nuggets"])
        cfg = EvalConfig(k=inst["k"], alpha=0.0)
        rel = {d: len(s) for d, s in dn.items()}
        dcg = sum(rel.get(d, 0) / math.log2(i + 2) for i, d in enumerate(inst["ranking"][: cfg.k]))
        ideal = sum(g / math.log2(i + 2) for i, g in enumerate(sorted(rel.values(), reverse=True)[: cfg.k]))
        expected = dcg / ideal if ideal else 0.0
        assert abs(alpha_ndcg_at_k(ranked(inst["ranking"]), nm, cfg) - expected) < 1e-12

    def test_ideal_ordering_scores_one(self):
        dn = {"a": {"n1", "n2"}, "b": {"n2", "n3"}, "c": {"n1"}, "d": {"n3", "n4"}}
        nm = matrix(dn, ["n1", "n2", "n3", "n4"])
        import itertools

        best = max(itertools.permutations(dn), key=lambda p: oracles.alpha_dcg(list(p), dn, 0.5, 4))
        cfg = EvalConfig(k=4, ideal_mode=IdealMode.EXHAUSTIVE)
        assert abs(alpha_ndcg_at_k(ranked(list(best)), nm, cfg) - 1.0) < 1e-12

    def test_exhaustive_limit(self):
        nm = matrix({f"d{i}": {"n1"} for i in range(9)}, ["n1"])
        with pytest.raises(ValueError):
            alpha_ndcg_at_k(ranked(["d0"]), nm, EvalConfig(ideal_mode=IdealMode.EXHAUSTIVE))

    def test_single_nugget_geometric_discount(self):
        nm = matrix({"a": {"n"}, "b": {"n"}, "c": {"n"}}, ["n"])
        cfg = EvalConfig(k=3, alpha=0.3)
        w = [1.0, 0.7, 0.49]
        ideal = sum(x / math.log2(i + 2) for i, x in enumerate(w))
        assert abs(alpha_ndcg_at_k(ranked(["a", "x", "b"]), nm, cfg) - (1 + 0.7 / 2) / ideal) < 1e-12


@pytest.mark.parametrize("seed", range(200))
def test_all_metrics_match_oracles(seed):
    rng = np.random.default_rng(1000 + seed)
    inst = oracles.random_eval_instance(rng)
    r, k, alpha = inst["ranking"], inst["k"], inst["alpha"]
    dn = oracles.contained(inst["grades"], 4)
    nm = matrix(dn, inst["nuggets"])
    rl = ranked(r)
    for mode in IdealMode:
        cfg = EvalConfig(k=k, alpha=alpha, ideal_mode=mode)
        assert abs(precision_at_k(rl, Qrels("q", inst["rel"]), cfg) - oracles.precision(r, inst["rel"], k)) < 1e-9
        assert abs(ndcg_at_k(rl, Qrels("q", inst["rel"]), cfg) - oracles.ndcg(r, inst["rel"], k)) < 1e-9
        assert abs(cov_at_k(rl, nm, cfg) - oracles.coverage(r, dn, inst["nuggets"], k)) < 1e-9
    ex = oracles.alpha_ideal_exhaustive(dn, alpha, k)
    gr = oracles.alpha_ideal_greedy(dn, alpha, k)
    assert ex >= gr - 1e-12
    dcg = oracles.alpha_dcg(r, dn, alpha, k)
    for mode, ideal in ((IdealMode.EXHAUSTIVE, ex), (IdealMode.GREEDY, gr)):
        got = alpha_ndcg_at_k(rl, nm, EvalConfig(k=k, alpha=alpha, ideal_mode=mode))
        assert abs(got - (dcg / ideal if ideal > 0 else 0.0)) < 1e-9


class TestTTest:
    def test_identical(self):
        r = paired_t_test([0.1, 0.5, 0.3], [0.1, 0.5, 0.3])
        assert (r.t, r.p, r.infinite_t) == (0.0, 1.0, False)

    def test_constant_difference(self):
        r = paired_t_test([2, 3, 4, 5], [1, 2, 3, 4])
        assert r.p == 0.0 and r.infinite_t and r.t == math.inf and r.significant

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_quadrature(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.random(10)
        b = a + rng.normal(0.05, 0.1, size=10)
        r = paired_t_test(a, b)
        d = a - b
        t = d.mean() / (d.std(ddof=1) / math.sqrt(10))
        assert abs(r.t - t) < 1e-12
        assert abs(r.p - oracles.t_two_sided_p(t, 9)) < 1e-6

    @pytest.mark.parametrize("a,b", [([1, 2], [1]), ([1], [2])])
    def test_errors(self, a, b):
        with pytest.raises(ValueError):
            paired_t_test(a, b)


@pytest.fixture(scope="module")
def ds():
    return make_synthetic_dataset(3, 6, 5, 200)


class TestEvaluateRun:
    def _inputs(self, ds):
        qrels = {}
        for t in ds.topics:
            ent = {d: 1 for d, ns in ds.doc_nuggets.items() if any(q == t.query_id for q, _ in ns)}
            qrels[t.query_id] = Qrels(t.query_id, ent)
        return qrels, ds.judgments

    def test_perfect_run(self, ds):
        qrels, judg = self._inputs(ds)
        run = []
        for t in ds.topics:
            # one doc per nugget first, then other relevant docs
            order, covered = [], set()
            for d, ns in sorted(ds.doc_nuggets.items(), key=lambda x: -len(x[1])):
                sqs = {s for q, s in ns if q == t.query_id}
                if sqs and not sqs <= covered:
                    order.append(d)
                    covered |= sqs
            order += [d for d in sorted(qrels[t.query_id].entries) if d not in order]
            run.append(ranked(order, t.query_id))
        table = evaluate_run(run, qrels, judg, ds.topics, EvalConfig())
        means = table.means()
        assert means["P"] == 1.0 and means["Cov"] == 1.0
        assert means["nDCG"] == pytest.approx(1.0, abs=1e-12)

    def test_empty_run(self, ds):
        qrels, judg = self._inputs(ds)
        table = evaluate_run([], qrels, judg, ds.topics, EvalConfig())
        assert table.means() == {"P": 0.0, "nDCG": 0.0, "alpha-nDCG": 0.0, "Cov": 0.0}

    def test_workers_do_not_change_output(self, ds):
        qrels, judg = self._inputs(ds)
        run = [ranked(list(ds.candidates[t.query_id].doc_ids), t.query_id) for t in ds.topics]
        a = evaluate_run(run, qrels, judg, ds.topics, EvalConfig(), workers=1)
        b = evaluate_run(run, qrels, judg, ds.topics, EvalConfig(), workers=4)
        assert per_query_tsv(a) == per_query_tsv(b)

    def test_unjudged_query_excluded(self, ds, caplog):
        qrels, judg = self._inputs(ds)
        run = [ranked(["d1"], "nope")]
        table = evaluate_run(run, qrels, judg, ds.topics, EvalConfig())
        assert "nope" not in table.per_query
        assert "no judgments" in caplog.text

    def test_topic_without_sub_questions_is_nan(self):
        t = Topic("q", "x")
        table = evaluate_run([ranked(["a"])], {"q": Qrels("q", {"a": 1})}, {}, [t], EvalConfig())
        assert math.isnan(table.per_query["q"]["Cov"])
        assert table.mean("P") == 0.1


def test_format_table_marks_significance():
    from coverkit.metrics import EvalTable, TTestResult

    t = EvalTable({"q": {"P": 0.5, "nDCG": 0.25, "alpha-nDCG": 0.1, "Cov": 1.0}})
    sig = {"run": {m: TTestResult(3.0, 0.01 if m == "Cov" else 0.5, 5) for m in ("P", "nDCG", "alpha-nDCG", "Cov")}}
    out = format_table({"run": t}, sig)
    assert "1.0000*" in out and "0.5000*" not in out
