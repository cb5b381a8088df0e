"""Command-line entry point: ``textscale <subcommand> [options]``.

Exit codes: 0 on success, 2 on usage errors, 1 on data errors.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from dataclasses import dataclass

from .errors import NoPositiveMargin, TextScaleError
from .invariance import (
    KernelKind,
    ScaleDistribution,
    hit_miss_margins,
    learn_scale_distribution,
    pairwise_margins,
    sitk_matrix,
)
from .kernels import SMOOTHING_FAMILIES, Boundary, apply_semantic, smooth_separable_2d, smooth_spatial
from .scalespace import build_scale_ladder, build_stack, tree_from_stack
from .semgraph import SemanticSmoother, build_pmi_graph
from .signals import Signal1D, Signal2D
from .tasks import (
    corpus_stacks,
    evaluate_classification,
    evaluate_retrieval,
    hierarchical_segment,
    keyword_hierarchy,
    make_signal,
    passage_retrieve,
    rank_documents,
)
from .textio import (
    TokenizerConfig,
    atomic_write,
    build_vocabulary,
    format_signal,
    index_corpus,
    load_corpus,
    load_graph,
    load_labels,
    load_qrels,
    load_run,
    load_scale_distribution,
    load_topic_table,
    load_vocabulary,
    save_graph,
    save_run,
    save_scale_distribution,
    save_signal,
    save_vocabulary,
)

log = logging.getLogger("textscale")

SIGNALS = {"word2d": "word", "sentence2d": "sentence", "bow1d": "bow", "topic1d": "topic"}
BOUNDARIES = [b.value for b in Boundary]


class UsageError(Exception):
    """Invalid parameter combination detected before any work is done."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


@dataclass(frozen=True)
class RunConfig:
    """Validated parameters shared by the subcommands."""

    subcommand: str
    s_min: float = 0.5
    s_max: float = 64.0
    count: int = 8
    include_zero: bool = False
    lam: float | None = None
    s_y: float | None = None
    kernel: str = "linear"
    signal: str = "sentence2d"
    boundary: str = Boundary.RENORMALIZE.value
    family: str = "discrete-gaussian"
    threshold: float = 0.03
    window: int = 3
    seed: int = 0  # reserved; no subcommand is stochastic
    threads: int = 1

    def validate(self) -> "RunConfig":
        if not (0 < self.s_min < self.s_max) or self.count < 2:
            raise UsageError("ladder needs 0 < --s-min < --s-max and --count >= 2")
        if self.lam is not None and not 0 <= self.lam <= 1:
            raise UsageError("--lam must lie in [0, 1]")
        if self.s_y is not None and self.s_y < 0:
            raise UsageError("--sy must be >= 0")
        if self.signal not in SIGNALS:
            raise UsageError(f"unknown signal {self.signal!r}")
        if self.threshold < 0:
            raise UsageError("--threshold must be >= 0")
        if self.window < 1:
            raise UsageError("--window must be >= 1")
        if self.threads < 1:
            raise UsageError("--threads must be >= 1")
        try:
            KernelKind.parse(self.kernel)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return self

    @property
    def ladder(self):
        return build_scale_ladder(self.s_min, self.s_max, self.count, self.include_zero)

    @property
    def signal_kind(self) -> str:
        return SIGNALS[self.signal]


# ---------------------------------------------------------------------------
# argument groups


def _tokenizer_args(p):
    g = p.add_argument_group("tokenizer")
    g.add_argument("--stopwords", help="file with one stopword per line")
    g.add_argument("--stemmer", default="identity", help="registered stemmer name (identity, plural)")
    g.add_argument("--keep-case", action="store_true", help="do not lowercase tokens")
    g.add_argument("--max-vocab", type=int, default=20000, help="vocabulary size cap (document-frequency ranked)")


def _corpus_args(p, doc=False, vocab=True):
    p.add_argument("--corpus", required=True, help="JSON-lines corpus with 'id' and 'text' fields")
    if vocab:
        p.add_argument("--vocab", required=True, help="vocabulary file written by build-vocab")
    if doc:
        p.add_argument("--doc-id", required=True, help="document to process")
    _tokenizer_args(p)


def _graph_args(p):
    p.add_argument("--graph", help="semantic graph file; omit for no semantic smoothing")
    p.add_argument("--semantic-mode", choices=["distance-kernel", "graph-solve"], default="distance-kernel",
                   help="semantic operator: Gaussian of graph distance or graph-regularized solve")
    p.add_argument("--lam", type=float, help="fixed lambda for graph-solve mode (default s/(1+s))")


def _ladder_args(p, s_min=0.5, s_max=64.0, count=8):
    g = p.add_argument_group("scale ladder")
    g.add_argument("--s-min", type=float, default=s_min, help=f"finest scale (default {s_min})")
    g.add_argument("--s-max", type=float, default=s_max, help=f"coarsest scale (default {s_max})")
    g.add_argument("--count", type=int, default=count, help=f"number of geometric levels (default {count})")
    g.add_argument("--include-zero", action="store_true", help="prepend the unsmoothed level s=0")
    g.add_argument("--sy", type=float, help="semantic scale; default equals each spatial scale")


def _signal_arg(p, default):
    p.add_argument("--signal", choices=sorted(SIGNALS), default=default, help=f"signal kind (default {default})")
    p.add_argument("--topics", help="topic table for topic1d signals")


def _smoothing_args(p, boundary=Boundary.RENORMALIZE.value):
    p.add_argument("--boundary", choices=BOUNDARIES, default=boundary, help=f"spatial boundary mode (default {boundary})")
    p.add_argument("--family", choices=SMOOTHING_FAMILIES, default="discrete-gaussian", help="spatial kernel family")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="textscale", description="Scale-space text representations and pipelines.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser.add_argument("--threads", type=int, help="worker cap (default: $SCALESPACE_THREADS or 1)")
    parser.add_argument("--seed", type=int, default=0, help="random seed (reserved)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build-vocab", help="document-frequency vocabulary from a corpus")
    _corpus_args(p, vocab=False)
    p.add_argument("--out", required=True, help="vocabulary file to write")

    p = sub.add_parser("build-graph", help="positive-PMI co-occurrence graph")
    _corpus_args(p)
    p.add_argument("--window", type=int, default=5, help="co-occurrence window in tokens (default 5)")
    p.add_argument("--threshold", type=float, default=0.0, help="minimum PMI for an edge (default 0)")
    p.add_argument("--out", required=True, help="graph file to write")

    p = sub.add_parser("signal", help="write one document's signal matrix")
    _corpus_args(p, doc=True)
    _signal_arg(p, "word2d")
    p.add_argument("--raw", action="store_true", help="keep counts instead of normalizing to mass 1")
    p.add_argument("--out", help="signal file to write (default stdout)")

    p = sub.add_parser("smooth", help="smooth one document's signal at a single scale pair")
    _corpus_args(p, doc=True)
    _signal_arg(p, "word2d")
    _graph_args(p)
    _smoothing_args(p)
    p.add_argument("--sx", type=float, required=True, help="spatial scale (variance)")
    p.add_argument("--sy", type=float, default=None, help="semantic scale (default equals --sx)")
    p.add_argument("--out", help="signal file to write (default stdout)")

    p = sub.add_parser("stack", help="export a document's scale-space stack level by level")
    _corpus_args(p, doc=True)
    _signal_arg(p, "word2d")
    _graph_args(p)
    _smoothing_args(p)
    _ladder_args(p)
    p.add_argument("--out-dir", required=True, help="directory for level_XXX.tss files and scales.tsv")
    p.add_argument("--tree", help="also write the interval tree of maxima as JSON lines")

    p = sub.add_parser("keywords", help="hierarchical keywords of a document")
    _corpus_args(p, doc=True)
    _graph_args(p)
    _smoothing_args(p, Boundary.MIRROR.value)
    p.add_argument("--s-min", type=float, default=0.5, help="finest scale (default 0.5)")
    p.add_argument("--s-max", type=float, help="coarsest scale (default (length/2)^2)")
    p.add_argument("--count", type=int, default=10, help="number of levels (default 10)")
    p.add_argument("--out", help="keyword tree as JSON lines")

    p = sub.add_parser("segment", help="hierarchical topic segmentation of a document")
    _corpus_args(p, doc=True)
    _graph_args(p)
    _smoothing_args(p, Boundary.MIRROR.value)
    p.add_argument("--s-min", type=float, default=0.25, help="finest scale (default 0.25)")
    p.add_argument("--s-max", type=float, help="coarsest scale (default (sentences/3)^2)")
    p.add_argument("--count", type=int, default=16, help="number of levels (default 16)")
    p.add_argument("--sy", type=float, default=1.0, help="fixed semantic scale C (default 1)")
    p.add_argument("--out", help="boundaries as JSON lines")
    p.add_argument("--velocity-csv", help="velocity magnitude curves as CSV x,s,value")

    p = sub.add_parser("sitk-train", help="learn a scale distribution from labelled documents")
    _corpus_args(p)
    _signal_arg(p, "word2d")
    _graph_args(p)
    _smoothing_args(p)
    _ladder_args(p)
    p.add_argument("--labels", help="doc_id<TAB>label file (default: corpus 'label' field)")
    p.add_argument("--kernel", default="linear", help="linear, cosine, js or rbf:SIGMA (default linear)")
    p.add_argument("--out", required=True, help="scale distribution file to write")
    p.add_argument("--margins", help="also write the margin table as CSV")

    p = sub.add_parser("kernel-matrix", help="scale-invariant kernel matrix of a corpus")
    _corpus_args(p)
    _signal_arg(p, "word2d")
    _graph_args(p)
    _smoothing_args(p)
    p.add_argument("--scales", required=True, help="scale distribution file")
    p.add_argument("--sy", type=float, help="semantic scale; default equals each spatial scale")
    p.add_argument("--kernel", default="linear", help="linear, cosine, js or rbf:SIGMA (default linear)")
    p.add_argument("--out", required=True, help="matrix file to write (rows follow corpus order)")

    p = sub.add_parser("silm-train", help="learn a scale distribution from relevance judgments")
    _corpus_args(p)
    _signal_arg(p, "sentence2d")
    _graph_args(p)
    _smoothing_args(p)
    _ladder_args(p)
    p.add_argument("--queries", required=True, help="JSON-lines queries")
    p.add_argument("--qrels", required=True, help="TREC qrels")
    p.add_argument("--out", required=True, help="scale distribution file to write")
    p.add_argument("--margins", help="also write the margin table as CSV")

    p = sub.add_parser("retrieve", help="rank documents for each query")
    _corpus_args(p)
    _signal_arg(p, "sentence2d")
    _graph_args(p)
    _smoothing_args(p)
    p.add_argument("--queries", required=True, help="JSON-lines queries")
    p.add_argument("--scales", required=True, help="scale distribution file")
    p.add_argument("--sy", type=float, help="semantic scale; default equals each spatial scale")
    p.add_argument("--depth", type=int, default=1000, help="documents kept per query (default 1000)")
    p.add_argument("--tag", default="textscale", help="run tag")
    p.add_argument("--out", required=True, help="TREC run file to write")

    p = sub.add_parser("passages", help="best passages of one document for one query")
    _corpus_args(p, doc=True)
    _graph_args(p)
    _smoothing_args(p, Boundary.MIRROR.value)
    p.add_argument("--queries", required=True, help="JSON-lines queries")
    p.add_argument("--query-id", required=True, help="query to match")
    p.add_argument("--scales", required=True, help="scale distribution file")
    p.add_argument("--sy", type=float, help="semantic scale; default equals each spatial scale")
    p.add_argument("--window", type=int, default=3, help="passage width in sentences (default 3)")
    p.add_argument("--threshold", type=float, default=0.03, help="interest point contrast threshold (default 0.03)")
    p.add_argument("--out", help="start<TAB>end<TAB>score file (default stdout)")

    p = sub.add_parser("eval", help="retrieval or classification metrics")
    p.add_argument("--qrels", help="TREC qrels (retrieval)")
    p.add_argument("--run", help="TREC run (retrieval)")
    p.add_argument("--gold", help="doc_id<TAB>label gold labels (classification)")
    p.add_argument("--pred", help="doc_id<TAB>label predictions (classification)")
    return parser


# ---------------------------------------------------------------------------
# helpers


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("SCALESPACE_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"SCALESPACE_THREADS must be an integer, got {env!r}") from None
    return 1


def _config(args) -> RunConfig:
    fields = {}
    for name in ("s_min", "s_max", "count", "include_zero", "lam", "kernel", "signal", "boundary", "family", "threshold", "window"):
        value = getattr(args, name, None)
        if value is not None:
            fields[name] = value
    if getattr(args, "sy", None) is not None:
        fields["s_y"] = args.sy
    return RunConfig(args.command, seed=args.seed, threads=_threads(args), **fields).validate()


def _tokenizer(args) -> TokenizerConfig:
    stop = frozenset()
    if args.stopwords:
        with open(args.stopwords, encoding="utf-8") as fh:
            stop = frozenset(line.strip() for line in fh if line.strip())
    try:
        return TokenizerConfig(not args.keep_case, stop, args.max_vocab, args.stemmer)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_docs(args, vocab, path=None):
    return index_corpus(load_corpus(path or args.corpus), vocab, _tokenizer(args))


def _find(docs, doc_id, what="document"):
    for d in docs:
        if d.id == doc_id:
            return d
    raise TextScaleError(f"{what} {doc_id!r} not found")


def _graph(args, vocab):
    return load_graph(args.graph, vocab) if getattr(args, "graph", None) else None


def _topics(args):
    return load_topic_table(args.topics) if getattr(args, "topics", None) else None


def _stacks(cfg, args, docs, vocab, ladder):
    graph = _graph(args, vocab)
    table = _topics(args)
    if cfg.signal_kind == "topic":
        return [build_stack(make_signal(d, vocab, "topic", table), ladder, boundary=cfg.boundary, family=cfg.family) for d in docs]
    return corpus_stacks(docs, vocab, ladder, cfg.signal_kind, graph, s_y=cfg.s_y, boundary=cfg.boundary,
                         semantic_mode=args.semantic_mode, threads=cfg.threads)


def _prob(q: ScaleDistribution) -> ScaleDistribution:
    return q if q.norm == "prob" else q.as_probability()


def _write_text(path, text):
    if path:
        with atomic_write(path) as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_build_vocab(cfg, args):
    tok = _tokenizer(args)
    vocab = build_vocabulary(load_corpus(args.corpus), tok)
    save_vocabulary(vocab, args.out)
    log.info("vocabulary of %d words", len(vocab))


def cmd_build_graph(cfg, args):
    if args.window < 1:
        raise UsageError("--window must be >= 1")
    vocab = load_vocabulary(args.vocab)
    graph = build_pmi_graph(_load_docs(args, vocab), vocab, args.window, args.threshold)
    save_graph(graph, args.out)
    log.info("graph with %d edges", len(graph.edges))


def _doc_signal(cfg, args, vocab, normalize=True):
    doc = _find(_load_docs(args, vocab), args.doc_id)
    return make_signal(doc, vocab, cfg.signal_kind, _topics(args), normalize=normalize)


def cmd_signal(cfg, args):
    vocab = load_vocabulary(args.vocab)
    sig = _doc_signal(cfg, args, vocab, normalize=not args.raw)
    _write_text(args.out, format_signal(sig))


def cmd_smooth(cfg, args):
    vocab = load_vocabulary(args.vocab)
    sig = _doc_signal(cfg, args, vocab)
    s_y = args.sx if args.sy is None else args.sy
    if args.sx < 0 or s_y < 0:
        raise UsageError("scales must be >= 0")
    graph = _graph(args, vocab)
    if isinstance(sig, Signal2D) or (isinstance(sig, Signal1D) and sig.domain == "semantic"):
        op = SemanticSmoother(graph, args.semantic_mode, args.lam).operator(s_y) if graph is not None and graph.edges else None
        if isinstance(sig, Signal2D):
            out = smooth_separable_2d(sig, args.sx, op, cfg.boundary, cfg.family)
        else:
            out = apply_semantic(sig.values[None, :], op)[0]
    else:
        out = smooth_spatial(sig.values, args.sx, cfg.family, cfg.boundary)
    _write_text(args.out, format_signal(out))


def cmd_stack(cfg, args):
    vocab = load_vocabulary(args.vocab)
    sig = _doc_signal(cfg, args, vocab)
    graph = _graph(args, vocab)
    smoother = SemanticSmoother(graph, args.semantic_mode, args.lam) if graph is not None and graph.edges else None
    stack = build_stack(sig, cfg.ladder, s_y=cfg.s_y, semantic=smoother, family=cfg.family, boundary=cfg.boundary)
    stack.export(args.out_dir)
    if args.tree:
        tree_from_stack(stack, "max").export_jsonl(args.tree)
    log.info("wrote %d levels to %s", len(stack), args.out_dir)


def _pipeline_ladder(args, length, default_max):
    s_max = args.s_max if args.s_max is not None else max(args.s_min * 2, default_max(length))
    if not (0 < args.s_min < s_max) or args.count < 2:
        raise UsageError("ladder needs 0 < --s-min < --s-max and --count >= 2")
    return build_scale_ladder(args.s_min, s_max, args.count)


def cmd_keywords(cfg, args):
    vocab = load_vocabulary(args.vocab)
    doc = _find(_load_docs(args, vocab), args.doc_id)
    ladder = _pipeline_ladder(args, len(doc.tokens), lambda n: (n / 2.0) ** 2)
    tree = keyword_hierarchy(doc, vocab, _graph(args, vocab), ladder, boundary=cfg.boundary)
    if args.out:
        tree.export_jsonl(args.out)
    for node in tree.nodes:
        print(f"{'  ' * node.depth}{node.word}\t{node.s_emerge:.6g}")


def cmd_segment(cfg, args):
    vocab = load_vocabulary(args.vocab)
    doc = _find(_load_docs(args, vocab), args.doc_id)
    ladder = _pipeline_ladder(args, len(doc.sentences), lambda n: (n / 3.0) ** 2)
    seg = hierarchical_segment(doc, vocab, ladder, args.sy, _graph(args, vocab), boundary=cfg.boundary)
    if args.out:
        seg.export_jsonl(args.out)
    if args.velocity_csv:
        seg.export_velocity_csv(args.velocity_csv)
    for b in seg.boundaries:
        print(f"{b.x}\t{b.persistence:.6g}\t{b.level}")


def _labels(args, docs):
    if args.labels:
        table = load_labels(args.labels)
        missing = [d.id for d in docs if d.id not in table]
        if missing:
            raise TextScaleError(f"no label for documents {missing[:5]}")
        return [table[d.id] for d in docs]
    if any(d.label is None for d in docs):
        raise TextScaleError("corpus has unlabelled documents; pass --labels")
    return [d.label for d in docs]


def _fallback_uniform(scales):
    msg = "no scale has a positive mean margin; falling back to a uniform scale distribution"
    warnings.warn(msg, RuntimeWarning, stacklevel=2)
    log.warning(msg)
    return ScaleDistribution.uniform(scales)


def cmd_sitk_train(cfg, args):
    vocab = load_vocabulary(args.vocab)
    docs = _load_docs(args, vocab)
    labels = _labels(args, docs)
    ladder = cfg.ladder
    stacks = _stacks(cfg, args, docs, vocab, ladder)
    margins = hit_miss_margins(stacks, labels, KernelKind.parse(cfg.kernel))
    if args.margins:
        margins.to_csv(args.margins)
    try:
        q = learn_scale_distribution(margins)
    except NoPositiveMargin:
        q = _fallback_uniform(margins.scales)
    save_scale_distribution(q, args.out)


def cmd_kernel_matrix(cfg, args):
    vocab = load_vocabulary(args.vocab)
    docs = _load_docs(args, vocab)
    q = _prob(load_scale_distribution(args.scales))
    stacks = _stacks(cfg, args, docs, vocab, q.scales)
    k = sitk_matrix(stacks, q, KernelKind.parse(cfg.kernel))
    save_signal(k, args.out)


def _query_stacks(cfg, args, queries, vocab, ladder):
    graph = _graph(args, vocab)
    smoother = SemanticSmoother(graph, args.semantic_mode, args.lam) if graph is not None and graph.edges else None
    return {
        q.id: build_stack(make_signal(q, vocab, cfg.signal_kind, _topics(args)), ladder,
                          s_y=cfg.s_y, semantic=None if cfg.signal_kind == "topic" else smoother,
                          family=cfg.family, boundary=cfg.boundary)
        for q in queries
    }


def _doc_stacks(cfg, args, docs, vocab, ladder):
    graph = _graph(args, vocab)
    smoother = SemanticSmoother(graph, args.semantic_mode, args.lam) if graph is not None and graph.edges else None
    table = _topics(args)
    return {
        d.id: build_stack(make_signal(d, vocab, cfg.signal_kind, table), ladder,
                          s_y=cfg.s_y, semantic=None if cfg.signal_kind == "topic" else smoother,
                          family=cfg.family, boundary=cfg.boundary)
        for d in docs
    }


def cmd_silm_train(cfg, args):
    vocab = load_vocabulary(args.vocab)
    docs = _load_docs(args, vocab)
    queries = _load_docs(args, vocab, args.queries)
    qrels = load_qrels(args.qrels)
    ladder = cfg.ladder
    dstacks = _doc_stacks(cfg, args, docs, vocab, ladder)
    qstacks = _query_stacks(cfg, args, queries, vocab, ladder)
    judged = [
        (q.id, qstacks[q.id], [(did, dstacks[did], g) for did, g in sorted(qrels[q.id].items()) if did in dstacks])
        for q in queries
        if q.id in qrels
    ]
    margins = pairwise_margins(judged, cfg.signal_kind)
    if args.margins:
        margins.to_csv(args.margins)
    try:
        q = learn_scale_distribution(margins)
    except NoPositiveMargin:
        q = _fallback_uniform(margins.scales)
    save_scale_distribution(q, args.out)


def cmd_retrieve(cfg, args):
    vocab = load_vocabulary(args.vocab)
    docs = _load_docs(args, vocab)
    queries = _load_docs(args, vocab, args.queries)
    q = _prob(load_scale_distribution(args.scales))
    dstacks = _doc_stacks(cfg, args, docs, vocab, q.scales)
    qstacks = _query_stacks(cfg, args, queries, vocab, q.scales)
    run = {qq.id: rank_documents(qstacks[qq.id], dstacks, q, cfg.signal_kind)[: args.depth] for qq in queries}
    save_run(run, args.out, args.tag)


def cmd_passages(cfg, args):
    vocab = load_vocabulary(args.vocab)
    doc = _find(_load_docs(args, vocab), args.doc_id)
    query = _find(_load_docs(args, vocab, args.queries), args.query_id, "query")
    q = _prob(load_scale_distribution(args.scales))
    passages = passage_retrieve(make_signal(query, vocab, "sentence"), make_signal(doc, vocab, "sentence"), q,
                                window=cfg.window, graph=_graph(args, vocab), boundary=cfg.boundary,
                                threshold=cfg.threshold, s_y=cfg.s_y)
    _write_text(args.out, "".join(f"{p.start}\t{p.end}\t{p.score!r}\n" for p in passages))


def cmd_eval(cfg, args):
    if args.qrels or args.run:
        if not (args.qrels and args.run):
            raise UsageError("retrieval evaluation needs both --qrels and --run")
        run = {qid: [d for d, _ in ranked] for qid, ranked in load_run(args.run).items()}
        report = evaluate_retrieval(run, load_qrels(args.qrels))
    elif args.gold and args.pred:
        report = evaluate_classification(load_labels(args.pred), load_labels(args.gold))
    else:
        raise UsageError("pass --qrels and --run, or --gold and --pred")
    for line in report.lines():
        print(line)


COMMANDS = {
    "build-vocab": cmd_build_vocab,
    "build-graph": cmd_build_graph,
    "signal": cmd_signal,
    "smooth": cmd_smooth,
    "stack": cmd_stack,
    "keywords": cmd_keywords,
    "segment": cmd_segment,
    "sitk-train": cmd_sitk_train,
    "kernel-matrix": cmd_kernel_matrix,
    "silm-train": cmd_silm_train,
    "retrieve": cmd_retrieve,
    "passages": cmd_passages,
    "eval": cmd_eval,
}


def run(argv=None) -> int:
    """Parse ``argv`` and execute one subcommand; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _config(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"textscale {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (TextScaleError, ValueError, OSError, KeyError) as exc:
        print(f"textscale {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
