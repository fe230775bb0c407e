"""``coverkit`` command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error.  Logs go to stderr, data to
files or stdout.  A ``--config`` file holds ``key=value`` lines named after the
long flags (``lambda-cd = 0.25``); explicit flags override it.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

from coverkit import __version__
from coverkit.data import (
    NuggetJudgmentSet,
    ParseError,
    RankedList,
    Topic,
    parse_corpus,
    parse_nugget_judgments,
    parse_qrels,
    parse_topics,
    parse_trec_run,
    read_text,
    serialize_corpus,
    serialize_nugget_judgments,
    serialize_qrels,
    serialize_topics,
    serialize_trec_run,
    write_text,
)
from coverkit.encoder import EncodeMode, encode, encode_texts, init_params, load_params, save_params
from coverkit.judge import JudgeEndpoint, JudgeTask, JudgeTransportError, judge_many
from coverkit.metrics import (
    METRICS,
    EvalConfig,
    IdealMode,
    TTestResult,
    evaluate_run,
    format_table,
    paired_t_test,
    per_query_tsv,
)
from coverkit.objectives import TrainingConfig, TrainingDivergedError, train
from coverkit.rankers import (
    Bm25Index,
    FusionConfig,
    FusionMethod,
    bm25_retriever,
    bm25_search,
    dense_retriever,
    mmr_rerank,
    multi_query_retrieve,
)
from coverkit.scope import (
    CandidateList,
    CoverageConfig,
    CoverageRange,
    SynthSpec,
    build_training_pairs,
    coverage_curve_for_topic,
    make_synthetic_dataset,
    mean_curve,
    parse_training_pairs,
    serialize_training_pairs,
)
from coverkit.vectors import VectorFormatError, ZeroNormError, knn_search, load_vectors, save_vectors

log = logging.getLogger("coverkit")

USAGE_ERROR = 1
DATA_ERROR = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# config file
# ---------------------------------------------------------------------------


def read_config(path) -> dict[str, str]:
    out: dict[str, str] = {}
    for line_no, raw in enumerate(read_text(path).splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(line_no, "expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError(line_no, "empty key")
        out[key.replace("-", "_")] = value
    return out


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _apply_config(parser: argparse.ArgumentParser, values: dict[str, str]) -> None:
    """Install config values as parser defaults (flags still win)."""
    actions = {a.dest: a for a in parser._actions}
    defaults = {}
    for key, value in values.items():
        action = actions.get(key)
        if action is None:
            raise UsageError(f"unknown config key {key!r} for this command")
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            v = value.lower()
            if v not in _TRUE | _FALSE:
                raise UsageError(f"config key {key!r} expects a boolean, got {value!r}")
            defaults[key] = v in _TRUE
        elif isinstance(action, argparse._AppendAction):
            conv = action.type or str
            defaults[key] = [conv(x.strip()) for x in value.split(",") if x.strip()]
        else:
            defaults[key] = value  # argparse converts string defaults with the action's type
        if action.required:
            action.required = False
    parser.set_defaults(**defaults)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _emit(text: str, out: str | None) -> None:
    if out and out != "-":
        write_text(out, text)
    else:
        sys.stdout.write(text)


def _topics(path) -> list[Topic]:
    return parse_topics(read_text(path))


def _judgments(path):
    return {j.query_id: j for j in parse_nugget_judgments(read_text(path))}


def _candidates(path) -> dict[str, CandidateList]:
    return {rl.query_id: CandidateList.from_ranked_list(rl) for rl in parse_trec_run(read_text(path))}


def _positive_int(s: str) -> int:
    v = int(s)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _range(s: str) -> CoverageRange:
    try:
        return CoverageRange.parse(s)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    spec = SynthSpec(grade4_fraction=args.grade4_fraction, weak_grade_prob=args.weak_grade_prob)
    ds = make_synthetic_dataset(args.seed, args.queries, args.nuggets, args.docs, spec)
    if not 0 <= args.train <= args.queries:
        raise UsageError("--train must be between 0 and --queries")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_topics, heldout = ds.split(args.train)
    write_text(out / "corpus.jsonl", serialize_corpus(ds.corpus))
    write_text(out / "topics.jsonl", serialize_topics(ds.topics))
    write_text(out / "topics_train.jsonl", serialize_topics(train_topics))
    write_text(out / "topics_heldout.jsonl", serialize_topics(heldout))
    write_text(out / "judgments.jsonl", serialize_nugget_judgments(ds.judgments[t.query_id] for t in ds.topics))
    write_text(out / "qrels.txt", serialize_qrels(ds.qrels[t.query_id] for t in ds.topics if t.query_id in ds.qrels))
    cands = [
        RankedList(q, tuple((d, float(len(c.doc_ids) - i)) for i, d in enumerate(c.doc_ids)), "bm25")
        for q, c in ds.candidates.items()
    ]
    write_text(out / "candidates.trec", serialize_trec_run(cands))
    log.info("wrote synthetic dataset (%d docs, %d topics) to %s", len(ds.corpus), len(ds.topics), out)
    return 0


def cmd_sample(args) -> int:
    cfg = CoverageConfig(
        eta=args.eta,
        pos_range=args.pos_range,
        neg_range=args.neg_range,
        negatives_per_query=args.negatives,
        supplement_rank_floor=args.rank_floor,
    )
    pairs, skips = build_training_pairs(
        _topics(args.topics), _judgments(args.judgments), _candidates(args.candidates), cfg, args.seed,
        args.samples_per_query,
    )
    for s in skips:
        log.warning("skipped %s: %s", s.query_id, s.reason)
    _emit(serialize_training_pairs(pairs), args.out)
    return 0


def cmd_train(args) -> int:
    from coverkit.experiments import build_vocabulary, resolve_examples

    corpus = parse_corpus(read_text(args.corpus))
    pairs = parse_training_pairs(read_text(args.pairs))
    if args.init:
        params, vocab = load_params(args.init)
    else:
        vocab = build_vocabulary(corpus, pairs)
        params = init_params(args.seed, len(vocab), args.hidden, args.dim)
    cfg = TrainingConfig(
        temperature=args.temperature,
        lambda_cd=args.lambda_cd,
        learning_rate=args.lr,
        epochs=args.epochs,
        queries_per_batch=args.queries_per_batch,
        docs_per_query=args.docs_per_query,
        teacher_stop_gradient=not args.teacher_gradient,
        seed=args.seed,
    )
    examples = resolve_examples(pairs, {d.doc_id: d for d in corpus})
    params, trace = train(examples, params, cfg, vocab)
    save_params(params, vocab, args.out)
    if args.trace:
        write_text(args.trace, "epoch\tmean_loss\n" + "".join(f"{i}\t{v:.9g}\n" for i, v in enumerate(trace.epoch_losses, 1)))
    return 0


def cmd_index(args) -> int:
    params, vocab = load_params(args.params)
    corpus = parse_corpus(read_text(args.corpus))
    m = encode_texts(params, vocab, [d.doc_id for d in corpus], [d.full_text for d in corpus], EncodeMode.DOCUMENT)
    save_vectors(m, args.vectors)
    return 0


def cmd_search(args) -> int:
    params, vocab = load_params(args.params)
    docs = load_vectors(args.vectors)
    topics = _topics(args.topics)
    if not topics:
        _emit("", args.out)
        return 0
    qv = encode_texts(params, vocab, [t.query_id for t in topics], [t.query_text for t in topics], EncodeMode.QUERY)
    run = [r.to_ranked_list(args.tag) for r in knn_search(qv, docs, args.k, workers=args.threads)]
    _emit(serialize_trec_run(run), args.out)
    return 0


def cmd_bm25(args) -> int:
    index = Bm25Index.build(parse_corpus(read_text(args.corpus)), args.k1, args.b)
    run = [bm25_search(index, t.query_text, args.k, t.query_id, args.tag) for t in _topics(args.topics)]
    _emit(serialize_trec_run(run), args.out)
    return 0


def cmd_mmr(args) -> int:
    params, vocab = load_params(args.params)
    docs = load_vectors(args.vectors)
    topics = {t.query_id: t for t in _topics(args.topics)}
    out = []
    for base in parse_trec_run(read_text(args.run)):
        if base.query_id not in topics:
            raise KeyError(f"run query {base.query_id!r} missing from topics")
        qv = encode(params, vocab, topics[base.query_id].query_text, EncodeMode.QUERY)
        out.append(mmr_rerank(base, docs, qv, args.lambda_, args.k, args.tag))
    _emit(serialize_trec_run(out), args.out)
    return 0


def cmd_multiq(args) -> int:
    topics = _topics(args.topics)
    if args.retriever == "bm25":
        if not args.corpus:
            raise UsageError("--retriever bm25 needs --corpus")
        retriever = bm25_retriever(Bm25Index.build(parse_corpus(read_text(args.corpus))))
    else:
        if not (args.params and args.vectors):
            raise UsageError("--retriever dense needs --params and --vectors")
        params, vocab = load_params(args.params)
        retriever = dense_retriever(params, vocab, load_vectors(args.vectors))
    sub_source = {t.query_id: t for t in _topics(args.oracle_subquestions)} if args.oracle_subquestions else None
    fusion = FusionConfig(FusionMethod(args.fuse), args.rrf_k, args.depth)
    run = []
    for t in topics:
        src = sub_source.get(t.query_id) if sub_source is not None else t
        subs = src.sq_texts if src is not None else []
        if not subs:
            log.warning("query %s has no sub-queries; skipped", t.query_id)
            continue
        rl = multi_query_retrieve(subs, retriever, fusion, args.k, t.query_id, args.threads)
        tag = f"oracleq-{args.fuse}" if sub_source is not None else rl.tag
        run.append(RankedList(rl.query_id, rl.items, tag))
    _emit(serialize_trec_run(run), args.out)
    return 0


def cmd_judge(args) -> int:
    endpoint = JudgeEndpoint.from_env(args.endpoint, args.model)
    corpus = {d.doc_id: d for d in parse_corpus(read_text(args.corpus))}
    cands = _candidates(args.candidates)
    tasks = []
    for t in _topics(args.topics):
        for doc_id in cands[t.query_id].doc_ids[: args.depth] if t.query_id in cands else ():
            if doc_id not in corpus:
                raise KeyError(f"candidate {doc_id!r} not in corpus")
            for sq_id, sq in t.sub_questions:
                tasks.append(JudgeTask(t.query_id, doc_id, sq_id, sq, corpus[doc_id].full_text))
    grades = judge_many(endpoint, tasks, max_in_flight=args.threads)
    by_q: dict[str, dict] = {}
    for (q, d, sq), g in sorted(grades.items()):
        by_q.setdefault(q, {})[(d, sq)] = g
    _emit(serialize_nugget_judgments(NuggetJudgmentSet(q, e) for q, e in by_q.items()), args.out)
    return 0


def cmd_cov_curve(args) -> int:
    topics = _topics(args.topics)
    judgments = _judgments(args.judgments)
    cands = _candidates(args.candidates)
    taus = sorted(set(args.tau or [4]))
    curves = {}
    for tau in taus:
        per_topic = [
            coverage_curve_for_topic(judgments[t.query_id], t, cands[t.query_id], tau, args.kmax)
            for t in topics
            if t.sub_questions and t.query_id in judgments and t.query_id in cands
        ]
        curves[tau] = mean_curve(per_topic)
    lines = ["k\t" + "\t".join(f"tau={tau}" for tau in taus)]
    for i in range(max((len(c) for c in curves.values()), default=0)):
        k = i + 1
        lines.append(f"{k}\t" + "\t".join(f"{curves[tau][i][1]:.6f}" for tau in taus))
    _emit("\n".join(lines) + "\n", args.out)
    if args.figure:
        from coverkit.plots import plot_coverage_curves

        plot_coverage_curves(curves, args.figure)
    return 0


def cmd_eval(args) -> int:
    cfg = EvalConfig(
        k=args.k,
        alpha=args.alpha,
        answerability_threshold=args.threshold,
        ideal_mode=IdealMode(args.ideal),
        linear_gain=args.linear_gain,
    )
    topics = _topics(args.topics)
    qrels = parse_qrels(read_text(args.qrels)) if args.qrels else {}
    judgments = _judgments(args.nuggets) if args.nuggets else {}
    if not qrels and not judgments:
        raise UsageError("eval needs --qrels and/or --nuggets")
    tables = {}
    main = evaluate_run(parse_trec_run(read_text(args.run)), qrels, judgments, topics, cfg, args.threads)
    tables[Path(args.run).stem] = main
    sig = None
    if args.sig_against:
        base = evaluate_run(parse_trec_run(read_text(args.sig_against)), qrels, judgments, topics, cfg, args.threads)
        tables[Path(args.sig_against).stem] = base
        sig = {Path(args.run).stem: {}}
        for m in METRICS:
            qids = [q for q in main.per_query if not math.isnan(main.per_query[q][m])]
            if len(qids) < 2:
                sig[Path(args.run).stem][m] = TTestResult(0.0, 1.0, len(qids))
                continue
            sig[Path(args.run).stem][m] = paired_t_test(main.column(m, qids), base.column(m, qids))
    sys.stdout.write(format_table(tables, sig))
    if args.per_query:
        write_text(args.per_query, per_query_tsv(main))
    if args.figure:
        from coverkit.plots import plot_eval

        plot_eval(tables, args.figure)
    return 0


def cmd_ablation(args) -> int:
    from coverkit.experiments import AblationConfig, SAMPLING_GRID, LAMBDA_GRID, ToyConfig, ablation_table, experiment_ablation

    variants = {"sampling": SAMPLING_GRID, "lambda": LAMBDA_GRID, "all": SAMPLING_GRID + LAMBDA_GRID}[args.grid]
    seeds = tuple(args.seeds) if args.seeds else (args.seed,)
    base = ToyConfig(n_train=args.train, n_heldout=args.heldout, n_docs=args.docs)
    rows = experiment_ablation(AblationConfig(seeds, variants, base))
    _emit(ablation_table(rows), args.out)
    if args.figure:
        from coverkit.plots import plot_ablation

        plot_ablation(rows, args.figure)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    p = _Parser(prog="coverkit", description="Coverage-aware retrieval toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--seed", type=int, default=0, help="seed for every stochastic component")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker count")
    p.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    p.add_argument("--config", help="key=value file; flags override it")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def cmd(name, fn, help):
        sp = sub.add_parser(name, help=help)
        sp.set_defaults(func=fn)
        return sp

    sp = cmd("synth", cmd_synth, "write a seeded planted-nugget dataset")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--queries", type=_positive_int, default=60)
    sp.add_argument("--train", type=int, default=50, help="topics in the training split")
    sp.add_argument("--nuggets", type=_positive_int, default=5)
    sp.add_argument("--docs", type=_positive_int, default=500)
    sp.add_argument("--grade4-fraction", type=float, default=0.0, help="share of contained nuggets graded 4, not 5")
    sp.add_argument("--weak-grade-prob", type=float, default=0.0, help="chance a non-answering pair is graded 1-3")

    sp = cmd("sample", cmd_sample, "build coverage training pairs")
    sp.add_argument("--topics", required=True)
    sp.add_argument("--judgments", required=True)
    sp.add_argument("--candidates", required=True, help="TREC run of ranked candidates")
    sp.add_argument("--eta", type=int, default=4)
    sp.add_argument("--pos-range", type=_range, default=CoverageConfig.pos_range)
    sp.add_argument("--neg-range", type=_range, default=CoverageConfig.neg_range)
    sp.add_argument("--negatives", type=_positive_int, default=16)
    sp.add_argument("--rank-floor", type=int, default=50)
    sp.add_argument("--samples-per-query", type=_positive_int, default=8)
    sp.add_argument("--out")

    d = TrainingConfig()
    sp = cmd("train", cmd_train, "train the toy bi-encoder")
    sp.add_argument("--pairs", required=True, help="training pairs JSONL")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--out", required=True, help="params file to write")
    sp.add_argument("--init", help="start from these params (e.g. relevance pre-finetuned)")
    sp.add_argument("--hidden", type=_positive_int, default=32)
    sp.add_argument("--dim", type=_positive_int, default=32)
    sp.add_argument("--temperature", type=float, default=d.temperature)
    sp.add_argument("--lambda-cd", type=float, default=d.lambda_cd)
    sp.add_argument("--lr", type=float, default=0.02)
    sp.add_argument("--epochs", type=_positive_int, default=d.epochs)
    sp.add_argument("--queries-per-batch", type=_positive_int, default=8)
    sp.add_argument("--docs-per-query", type=int, default=d.docs_per_query)
    sp.add_argument("--teacher-gradient", action="store_true", help="let gradients flow through the teacher")
    sp.add_argument("--trace", help="write per-epoch mean loss TSV here")

    sp = cmd("index", cmd_index, "encode a corpus into a vector file")
    sp.add_argument("--params", required=True)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--vectors", required=True, help="vector file to write")

    sp = cmd("search", cmd_search, "exact dense search")
    sp.add_argument("--params", required=True)
    sp.add_argument("--vectors", required=True)
    sp.add_argument("--topics", required=True)
    sp.add_argument("--k", type=_positive_int, default=100)
    sp.add_argument("--tag", default="dense")
    sp.add_argument("--out")

    sp = cmd("bm25", cmd_bm25, "BM25 retrieval")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--topics", required=True)
    sp.add_argument("--k", type=_positive_int, default=100)
    sp.add_argument("--k1", type=float, default=0.9)
    sp.add_argument("--b", type=float, default=0.4)
    sp.add_argument("--tag", default="bm25")
    sp.add_argument("--out")

    sp = cmd("mmr", cmd_mmr, "MMR reranking of a run")
    sp.add_argument("--run", required=True)
    sp.add_argument("--params", required=True)
    sp.add_argument("--vectors", required=True)
    sp.add_argument("--topics", required=True)
    sp.add_argument("--lambda", dest="lambda_", type=float, default=0.99)
    sp.add_argument("--k", type=_positive_int, default=100)
    sp.add_argument("--tag", default="mmr")
    sp.add_argument("--out")

    sp = cmd("multiq", cmd_multiq, "multi-query retrieval with fusion")
    sp.add_argument("--topics", required=True, help="topics whose sub-questions are the sub-queries")
    sp.add_argument("--oracle-subquestions", help="take sub-queries from this topics file instead (OracleQ)")
    sp.add_argument("--retriever", choices=["bm25", "dense"], default="bm25")
    sp.add_argument("--corpus")
    sp.add_argument("--params")
    sp.add_argument("--vectors")
    sp.add_argument("--fuse", choices=[m.value for m in FusionMethod], default="rrf")
    sp.add_argument("--rrf-k", type=float, default=60.0)
    sp.add_argument("--depth", type=_positive_int, default=100)
    sp.add_argument("--k", type=_positive_int, default=100)
    sp.add_argument("--out")

    sp = cmd("judge", cmd_judge, "grade candidates against sub-questions with a remote judge")
    sp.add_argument("--endpoint", help="chat-completion URL (else COVERKIT_JUDGE_URL)")
    sp.add_argument("--model")
    sp.add_argument("--topics", required=True)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--candidates", required=True)
    sp.add_argument("--depth", type=_positive_int, default=20)
    sp.add_argument("--out")

    sp = cmd("cov-curve", cmd_cov_curve, "accumulated coverage over candidate depth")
    sp.add_argument("--topics", required=True)
    sp.add_argument("--judgments", required=True)
    sp.add_argument("--candidates", required=True)
    sp.add_argument("--tau", type=int, action="append", help="answerability threshold (repeatable)")
    sp.add_argument("--kmax", type=_positive_int, default=20)
    sp.add_argument("--figure", help="render the curves to this image file")
    sp.add_argument("--out")

    sp = cmd("eval", cmd_eval, "evaluate a run")
    sp.add_argument("--run", required=True)
    sp.add_argument("--qrels")
    sp.add_argument("--nuggets")
    sp.add_argument("--topics", required=True)
    sp.add_argument("--k", type=_positive_int, default=10)
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--threshold", type=int, default=4, help="answerability grade counting as containment")
    sp.add_argument("--ideal", choices=[m.value for m in IdealMode], default="greedy")
    sp.add_argument("--linear-gain", action="store_true")
    sp.add_argument("--sig-against", help="baseline run for the paired t-test")
    sp.add_argument("--per-query", help="per-query TSV output")
    sp.add_argument("--figure", help="render mean metrics to this image file")

    sp = cmd("ablation", cmd_ablation, "sampling-range / distillation-weight ablation on synthetic data")
    sp.add_argument("--grid", choices=["sampling", "lambda", "all"], default="all")
    sp.add_argument("--seeds", type=int, action="append")
    sp.add_argument("--train", type=_positive_int, default=50)
    sp.add_argument("--heldout", type=_positive_int, default=10)
    sp.add_argument("--docs", type=_positive_int, default=500)
    sp.add_argument("--figure")
    sp.add_argument("--out")
    return p


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for a in parser._actions:
        if isinstance(a, argparse._SubParsersAction):
            return a.choices[name]
    raise KeyError(name)


_GLOBAL_KEYS = {"seed", "threads", "log_level"}


def _command_of(parser: argparse.ArgumentParser, argv: Sequence[str]) -> str | None:
    choices = next(a.choices for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    return next((tok for tok in argv if tok in choices), None)


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = _command_of(parser, argv)
    try:
        if known.config and command:
            values = read_config(known.config)
            _apply_config(parser, {k: v for k, v in values.items() if k in _GLOBAL_KEYS})
            _apply_config(_subparser(parser, command), {k: v for k, v in values.items() if k not in _GLOBAL_KEYS})
    except UsageError as e:
        print(f"coverkit: error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except (OSError, ParseError) as e:
        print(f"coverkit: config error: {e}", file=sys.stderr)
        return DATA_ERROR
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(stream=sys.stderr, level=args.log_level, format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"coverkit: error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except (
        ParseError,
        VectorFormatError,
        ZeroNormError,
        TrainingDivergedError,
        JudgeTransportError,
        KeyError,
        ValueError,
        OSError,
    ) as e:
        print(f"coverkit: {type(e).__name__}: {e}", file=sys.stderr)
        return DATA_ERROR


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
