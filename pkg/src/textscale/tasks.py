"""End-to-end pipelines: keywording, segmentation, passage retrieval and evaluation."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import LabelMismatch, MissingJudgments, TooShort
from .invariance import ScaleDistribution, _neg_kl_rows
from .kernels import Boundary
from .scalespace import (
    ScaleLadder,
    build_interval_tree,
    build_scale_ladder,
    build_stack,
    derivative_stack,
    detect_extrema,
    detect_interest_points,
)
from .semgraph import SemanticGraph, SemanticSmoother
from .signals import (
    bow1d_signal,
    normalize_signal,
    resample_bilinear,
    sentence2d_signal,
    topic1d_signal,
    word2d_signal,
)
from .textio import Document, Vocabulary, atomic_write


def make_signal(doc: Document, vocab: Vocabulary, kind: str = "sentence", topics=None, normalize: bool = True):
    """Build one of the four textual signals for an indexed document."""
    if kind == "word":
        sig = word2d_signal(doc, vocab)
    elif kind == "sentence":
        sig = sentence2d_signal(doc, vocab)
    elif kind == "bow":
        sig = bow1d_signal(word2d_signal(doc, vocab))
    elif kind == "topic":
        sig = topic1d_signal(doc, topics)
        return sig
    else:
        raise ValueError(f"unknown signal kind {kind!r}")
    return normalize_signal(sig) if normalize else sig


def _smoother(graph: SemanticGraph | None, mode="distance-kernel", lam=None):
    if graph is None or not graph.edges:
        return None
    return SemanticSmoother(graph, mode, lam)


def corpus_stacks(
    docs: Sequence[Document],
    vocab: Vocabulary,
    ladder,
    kind: str = "sentence",
    graph: SemanticGraph | None = None,
    topics=None,
    s_y=None,
    boundary=Boundary.RENORMALIZE,
    semantic_mode: str = "distance-kernel",
    length: int | None = None,
    threads: int = 1,
):
    """Stacks for a corpus with spatial lengths stretched to the longest document."""
    sigs = [make_signal(d, vocab, kind, topics) for d in docs]
    if kind in ("word", "sentence", "topic"):
        target = length or max(s.values.shape[0] for s in sigs)
        sigs = [resample_bilinear(s, target) for s in sigs]
    smoother = None if kind == "topic" else _smoother(graph, semantic_mode)

    def one(sig):
        return build_stack(sig, ladder, s_y=s_y, semantic=smoother, boundary=boundary)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, sigs))
    return [one(s) for s in sigs]


# ---------------------------------------------------------------------------
# keywords


@dataclass(frozen=True)
class KeywordNode:
    id: int
    word: str
    x: int
    s_emerge: float
    parent: int | None
    depth: int


@dataclass
class KeywordTree:
    nodes: list[KeywordNode]

    @property
    def roots(self) -> list[KeywordNode]:
        return [n for n in self.nodes if n.parent is None]

    def words(self) -> list[str]:
        return [n.word for n in self.nodes]

    def export_jsonl(self, path) -> None:
        with atomic_write(path) as fh:
            for n in self.nodes:
                fh.write(json.dumps({"node_id": n.id, "parent_id": n.parent, "word": n.word, "x": n.x, "s_emerge": n.s_emerge, "depth": n.depth}) + "\n")


def keyword_hierarchy(
    doc: Document,
    vocab: Vocabulary,
    graph: SemanticGraph | None = None,
    ladder: ScaleLadder | None = None,
    boundary=Boundary.MIRROR,
) -> KeywordTree:
    """Keywords as maxima of the word-level scale space tracked coarse to fine.

    A maximum at ``(x, y)`` must beat every word in positions ``x - 1 .. x + 1``;
    the surviving words form the tree, coarsest first.
    """
    sig = make_signal(doc, vocab, "word")
    if ladder is None:
        ladder = build_scale_ladder(0.5, max(2.0, (sig.spatial_len / 2.0) ** 2), 10)
    stack = build_stack(sig, ladder, semantic=_smoother(graph), boundary=boundary)
    tol = 1e-9 * float(np.abs(stack.levels).max())
    extrema = [detect_extrema(level, "max", "all", tol) for level in stack.levels]
    tree = build_interval_tree(extrema, stack.scales_x)

    order = sorted(tree.nodes, key=lambda n: (-n.s_emerge, tree.depth(n.id), n.x_top, n.id))
    kept: dict[tuple[int, str], int] = {}
    alias: dict[int, int] = {}
    out: list[KeywordNode] = []
    for n in order:
        word = vocab.words[n.y]
        depth = tree.depth(n.id)
        if (depth, word) in kept:
            alias[n.id] = kept[(depth, word)]
            continue
        # parents emerge at coarser scales, so they already have a keyword id
        parent = None if n.parent is None else alias[n.parent]
        kid = len(out)
        alias[n.id] = kid
        kept[(depth, word)] = kid
        out.append(KeywordNode(kid, word, n.x_top, n.s_emerge, parent, depth))
    return KeywordTree(out)


# ---------------------------------------------------------------------------
# segmentation


@dataclass(frozen=True)
class SegmentBoundary:
    x: int  # index of the first sentence of the new segment
    persistence: float
    level: int  # 0 = coarsest granularity


@dataclass
class SegmentTree:
    boundaries: list[SegmentBoundary]
    scales: np.ndarray
    velocity: np.ndarray  # (scales, sentences)
    contours: list[list[tuple[float, int]]] = field(default_factory=list)

    def positions(self) -> list[int]:
        return [b.x for b in self.boundaries]

    def export_jsonl(self, path) -> None:
        with atomic_write(path) as fh:
            for b in self.boundaries:
                fh.write(json.dumps({"x": b.x, "persistence": b.persistence, "level": b.level}) + "\n")

    def export_velocity_csv(self, path) -> None:
        with atomic_write(path) as fh:
            fh.write("x,s,value\n")
            for s, row in zip(self.scales, self.velocity):
                for x, v in enumerate(row):
                    fh.write(f"{x},{s!r},{float(v)!r}\n")


def _persistence_levels(persist: Sequence[float]) -> list[int]:
    if not persist:
        return []
    hi, lo = np.quantile(persist, [2 / 3, 1 / 3])
    return [0 if p >= hi else 1 if p >= lo else 2 for p in persist]


def hierarchical_segment(
    doc: Document,
    vocab: Vocabulary,
    ladder: ScaleLadder | None = None,
    semantic_scale: float = 1.0,
    graph: SemanticGraph | None = None,
    boundary=Boundary.MIRROR,
) -> SegmentTree:
    """Topic boundaries from maxima of the velocity magnitude ``||d gamma / dx||_2``.

    Maxima are tracked from the coarsest ladder level to the finest; each
    contour that reaches the finest level is a boundary whose persistence is
    the coarsest scale its contour reaches.
    """
    if len(doc.sentences) < 3:
        raise TooShort(f"segmentation needs at least 3 sentences, got {len(doc.sentences)}")
    sig = make_signal(doc, vocab, "sentence")
    n = sig.spatial_len
    if ladder is None:
        ladder = build_scale_ladder(0.25, max(1.0, (n / 3.0) ** 2), 16)
    scales = ladder.scales
    smoother = _smoother(graph)
    d1 = derivative_stack(sig, scales, 1, s_y=semantic_scale, semantic=smoother, boundary=boundary)
    vel = np.sqrt((d1**2).sum(axis=2))
    tol = 1e-9 * float(np.sqrt((sig.values**2).sum(axis=1)).max())
    extrema = [detect_extrema(v, "max", tol=tol, ties="left") for v in vel]
    tree = build_interval_tree(extrema, scales)

    finest = build_stack(sig, [scales[0]], s_y=semantic_scale, semantic=smoother, boundary=boundary).levels[0]
    step = np.sqrt((np.diff(finest, axis=0) ** 2).sum(axis=1))  # step[i] = change between i and i + 1

    found = []
    for node in tree.nodes:
        if node.s_end != scales[0]:
            continue
        x = node.x
        right = step[x] if x < n - 1 else -1.0
        left = step[x - 1] if x > 0 else -1.0
        found.append((x + 1 if right > left else x, tree.contour_top(node.id), node.id))
    found.sort()
    persist = [p for _, p, _ in found]
    levels = _persistence_levels(persist)
    bounds = [SegmentBoundary(x, p, lv) for (x, p, _), lv in zip(found, levels)]
    contours = []
    for _, _, nid in found:
        path, node = [], tree.nodes[nid]
        while True:
            path.append((node.s_emerge, node.x_top))
            if not node.principal or node.parent is None:
                break
            node = tree.nodes[node.parent]
        contours.append(path)
    return SegmentTree(bounds, np.asarray(scales), vel, contours)


# ---------------------------------------------------------------------------
# passage retrieval


@dataclass(frozen=True)
class Passage:
    start: int
    end: int  # exclusive
    score: float

    def overlaps(self, start: int, end: int) -> bool:
        return self.start < end and start < self.end


def _row_scores(qstack, dstack, q: ScaleDistribution, signal: str) -> np.ndarray:
    """Scale-weighted relevance of the query to each document row."""
    out = np.zeros(dstack.levels.shape[1])
    for w, ql, dl in zip(q.weights, qstack.levels, dstack.levels):
        if w:
            qv = ql.sum(axis=0) if ql.ndim == 2 else ql
            out += w * _neg_kl_rows(qv, dl)
    return out


def _stacks_for(query, doc, q, graph, boundary, s_y):
    smoother = _smoother(graph)
    qstack = build_stack(query, q.scales, s_y=s_y, semantic=smoother, boundary=boundary)
    dstack = build_stack(doc, q.scales, s_y=s_y, semantic=smoother, boundary=boundary)
    return qstack, dstack


def sliding_window_scores(query, doc, q: ScaleDistribution, window: int = 3, graph=None, boundary=Boundary.MIRROR, s_y=None) -> np.ndarray:
    """Exhaustive passage scores, one per window start."""
    q = q if q.norm == "prob" else q.as_probability()
    qstack, dstack = _stacks_for(query, doc, q, graph, boundary, s_y)
    rows = _row_scores(qstack, dstack, q, "sentence")
    return np.convolve(rows, np.ones(window), mode="valid")


def passage_retrieve(
    query,
    doc,
    q: ScaleDistribution,
    window: int = 3,
    graph: SemanticGraph | None = None,
    boundary=Boundary.MIRROR,
    threshold: float = 0.03,
    s_y=None,
) -> list[Passage]:
    """Score windows around interest points of the document's scale space.

    Each interest point seeds a window centred on it; the window is then
    slid within half a window of that centre to the best-scoring start.
    Overlapping passages are merged, keeping the larger score.
    """
    doc_vals = doc.values if hasattr(doc, "values") else np.asarray(doc)
    n = doc_vals.shape[0]
    if n <= window:
        raise ValueError(f"document has {n} sentences; window is {window}")
    q = q if q.norm == "prob" else q.as_probability()
    qstack, dstack = _stacks_for(query, doc, q, graph, boundary, s_y)
    points = detect_interest_points(dstack, threshold)
    if not points:
        return []
    rows = _row_scores(qstack, dstack, q, "sentence")
    scores = np.convolve(rows, np.ones(window), mode="valid")
    half = window // 2
    best_by_start = {}
    for p in points:
        c = min(max(p.x - half, 0), n - window)
        lo, hi = max(0, c - half), min(n - window, c + half)
        cand = np.arange(lo, hi + 1)
        a = int(cand[np.argmax(scores[lo : hi + 1])])
        best_by_start[a] = float(scores[a])
    spans = sorted((a, a + window, s) for a, s in best_by_start.items())
    merged: list[list] = []
    for a, b, s in spans:
        if merged and a < merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
            merged[-1][2] = max(merged[-1][2], s)
        else:
            merged.append([a, b, s])
    out = [Passage(a, b, s) for a, b, s in merged]
    out.sort(key=lambda p: (-p.score, p.start))
    return out


def rank_documents(query_stack, doc_stacks: Mapping[str, object], q: ScaleDistribution, signal="sentence", aggregate="sum") -> list[tuple[str, float]]:
    from .invariance import silm_relevance

    q = q if q.norm == "prob" else q.as_probability()
    scored = [(did, silm_relevance(query_stack, st, q, signal, aggregate)) for did, st in doc_stacks.items()]
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class EvalReport:
    micro_f1: float | None = None
    map: float | None = None
    p5: float | None = None
    p10: float | None = None
    per_query: dict = field(default_factory=dict)
    per_class: dict = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = []
        if self.map is not None:
            out += [f"MAP={self.map:.4f}", f"P@5={self.p5:.4f}", f"P@10={self.p10:.4f}"]
        if self.micro_f1 is not None:
            out.append(f"microF1={self.micro_f1:.4f}")
        return out


def average_precision(ranked: Sequence[str], relevant: set) -> float:
    if not relevant:
        return 0.0
    hits, total = 0, 0.0
    for rank, did in enumerate(ranked, 1):
        if did in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def precision_at(ranked: Sequence[str], relevant: set, k: int) -> float:
    return sum(1 for d in ranked[:k] if d in relevant) / k


def evaluate_retrieval(run: Mapping[str, Sequence], qrels: Mapping[str, Mapping[str, int]]) -> EvalReport:
    """MAP, P@5 and P@10; a document is relevant when its grade is positive."""
    per_query = {}
    for qid, ranked in run.items():
        if qid not in qrels:
            raise MissingJudgments(f"query {qid!r} has no relevance judgments")
        ids = [r[0] if isinstance(r, tuple) else r for r in ranked]
        rel = {d for d, g in qrels[qid].items() if g > 0}
        per_query[qid] = {"ap": average_precision(ids, rel), "p5": precision_at(ids, rel, 5), "p10": precision_at(ids, rel, 10)}
    if not per_query:
        return EvalReport(map=0.0, p5=0.0, p10=0.0)
    mean = {k: float(np.mean([v[k] for v in per_query.values()])) for k in ("ap", "p5", "p10")}
    return EvalReport(map=mean["ap"], p5=mean["p5"], p10=mean["p10"], per_query=per_query)


def evaluate_classification(predictions: Mapping[str, object], gold: Mapping[str, object]) -> EvalReport:
    """Micro-averaged F1 over one-vs-all decisions.

    Values may be single labels or collections of labels (multi-label).
    """
    if set(predictions) != set(gold):
        raise LabelMismatch("predictions and gold cover different instances")

    def as_set(v):
        return {v} if isinstance(v, str) or not hasattr(v, "__iter__") else set(v)

    classes = sorted({c for v in list(predictions.values()) + list(gold.values()) for c in as_set(v)}, key=str)
    per_class = {c: {"tp": 0, "fp": 0, "fn": 0} for c in classes}
    for i in gold:
        p, g = as_set(predictions[i]), as_set(gold[i])
        for c in p & g:
            per_class[c]["tp"] += 1
        for c in p - g:
            per_class[c]["fp"] += 1
        for c in g - p:
            per_class[c]["fn"] += 1
    tp = sum(v["tp"] for v in per_class.values())
    fp = sum(v["fp"] for v in per_class.values())
    fn = sum(v["fn"] for v in per_class.values())
    f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return EvalReport(micro_f1=f1, per_class=per_class)


class KernelPerceptron:
    """One-vs-all averaged kernel perceptron on a precomputed kernel matrix.

    The kernel is divided by the mean of its training diagonal, so the unit
    bias feature carries comparable weight whatever the signal scaling.
    """

    def __init__(self, epochs: int = 20):
        self.epochs = epochs

    def fit(self, gram: np.ndarray, labels: Sequence):
        labels = list(labels)
        self.classes_ = sorted(set(labels), key=str)
        n = len(labels)
        gram = np.asarray(gram, dtype=float)
        diag = float(np.mean(np.diag(gram)))
        self.scale_ = diag if diag > 0 else 1.0
        k = gram / self.scale_ + 1.0  # constant feature acts as bias
        self.alpha_ = np.zeros((len(self.classes_), n))
        for ci, c in enumerate(self.classes_):
            y = np.array([1.0 if l == c else -1.0 for l in labels])
            a = np.zeros(n)
            avg = np.zeros(n)
            steps = 0
            for _ in range(self.epochs):
                mistakes = 0
                for i in range(n):
                    if y[i] * np.dot(a * y, k[:, i]) <= 0:
                        a[i] += 1.0
                        mistakes += 1
                    avg += a
                    steps += 1
                if not mistakes:
                    break
            self.alpha_[ci] = (avg / steps) * y
        return self

    def decision_function(self, gram_test_train: np.ndarray) -> np.ndarray:
        k = np.asarray(gram_test_train, dtype=float) / self.scale_ + 1.0
        return k @ self.alpha_.T

    def predict(self, gram_test_train: np.ndarray) -> list:
        scores = self.decision_function(gram_test_train)
        return [self.classes_[i] for i in scores.argmax(axis=1)]
