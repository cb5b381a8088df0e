"""Scale-invariant kernels and relevance models.

Documents enter as scale-space stacks sampled on a shared ladder. A learned
:class:`ScaleDistribution` turns per-scale kernels (or relevance scores) into
their expectation over scale.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateClass, DimensionMismatch, NoPositiveMargin, NoPreferencePairs, ZeroMass
from .signals import resample_rows

KL_EPS = 1e-9


@dataclass(frozen=True)
class KernelKind:
    variant: str = "linear"  # "linear" | "cosine" | "rbf" | "jensen-shannon"
    sigma: float = 1.0

    def __post_init__(self):
        if self.variant not in ("linear", "cosine", "rbf", "jensen-shannon"):
            raise ValueError(f"unknown kernel {self.variant!r}")
        if self.variant == "rbf" and not self.sigma > 0:
            raise ValueError("rbf kernel needs sigma > 0")

    @classmethod
    def parse(cls, text: str) -> "KernelKind":
        """``linear``, ``cosine``, ``js``/``jensen-shannon`` or ``rbf[:sigma]``."""
        name, _, arg = text.partition(":")
        if name == "js":
            name = "jensen-shannon"
        return cls(name, float(arg)) if arg else cls(name)


@dataclass(frozen=True)
class ScaleDistribution:
    """Weights over a scale ladder; ``norm`` is ``"l2"`` or ``"prob"``."""

    scales: np.ndarray
    weights: np.ndarray
    norm: str = "prob"

    def __post_init__(self):
        s = np.asarray(self.scales, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if s.shape != w.shape or s.ndim != 1:
            raise ValueError("scales and weights must be 1D of equal length")
        if (w < 0).any():
            raise ValueError("weights must be non-negative")
        if self.norm not in ("l2", "prob"):
            raise ValueError("norm must be 'l2' or 'prob'")
        object.__setattr__(self, "scales", s)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, scales) -> "ScaleDistribution":
        s = np.asarray(scales, dtype=float)
        return cls(s, np.full(len(s), 1.0 / len(s)), "prob")

    @classmethod
    def point(cls, scales, index: int) -> "ScaleDistribution":
        w = np.zeros(len(scales))
        w[index] = 1.0
        return cls(np.asarray(scales, dtype=float), w, "prob")

    def as_probability(self) -> "ScaleDistribution":
        total = self.weights.sum()
        if total <= 0:
            raise ZeroMass("scale distribution has no mass")
        return ScaleDistribution(self.scales, self.weights / total, "prob")

    def mass_in(self, lo: float, hi: float) -> float:
        p = self.as_probability()
        sel = (p.scales >= lo) & (p.scales <= hi)
        return float(p.weights[sel].sum())


@dataclass(frozen=True)
class MarginTable:
    values: np.ndarray  # (instances, scales)
    scales: np.ndarray
    rows: tuple = ()

    @property
    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def to_csv(self, path) -> None:
        from .textio import atomic_write

        with atomic_write(path) as fh:
            fh.write("row," + ",".join(repr(float(s)) for s in self.scales) + "\n")
            labels = self.rows or tuple(range(len(self.values)))
            for r, vals in zip(labels, self.values):
                fh.write(f"{r}," + ",".join(repr(float(v)) for v in vals) + "\n")


def _levels_of(x) -> np.ndarray:
    return np.asarray(x.levels if hasattr(x, "levels") else x, dtype=float)


def _as_prob(v: np.ndarray) -> np.ndarray:
    total = v.sum()
    if total <= 0:
        raise ZeroMass("Jensen-Shannon kernel needs signals with positive mass")
    return v / total


def _js(p: np.ndarray, q: np.ndarray) -> float:
    m = 0.5 * (p + q)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(p > 0, p * np.log2(p / m), 0.0).sum()
        b = np.where(q > 0, q * np.log2(q / m), 0.0).sum()
    return float(min(max(0.5 * (a + b), 0.0), 1.0))


def single_scale_kernel(a, b, kind: KernelKind = KernelKind()) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"signals have shapes {a.shape} and {b.shape}; resample first")
    if kind.variant == "linear":
        return float(np.sum(a * b))
    if kind.variant == "cosine":
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0 or nb == 0:
            raise ZeroMass("cosine kernel needs non-zero signals")
        return float(np.sum(a * b) / (na * nb))
    if kind.variant == "rbf":
        return float(np.exp(-np.sum((a - b) ** 2) / (2 * kind.sigma**2)))
    return 1.0 - _js(_as_prob(a.ravel()), _as_prob(b.ravel()))


def gram_matrix(signals: Sequence, kind: KernelKind = KernelKind()) -> np.ndarray:
    """Kernel matrix of equally shaped signals."""
    shapes = {np.shape(s) for s in signals}
    if len(shapes) > 1:
        raise DimensionMismatch(f"signals have differing shapes {sorted(shapes)}")
    x = np.array([np.asarray(s, dtype=float).ravel() for s in signals])
    if kind.variant == "linear":
        return x @ x.T
    if kind.variant == "cosine":
        norms = np.linalg.norm(x, axis=1)
        if (norms == 0).any():
            raise ZeroMass("cosine kernel needs non-zero signals")
        return (x @ x.T) / np.outer(norms, norms)
    if kind.variant == "rbf":
        sq = (x**2).sum(axis=1)
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2 * x @ x.T, 0.0)
        np.fill_diagonal(d2, 0.0)
        return np.exp(-d2 / (2 * kind.sigma**2))
    p = np.array([_as_prob(row) for row in x])
    n = len(p)
    g = np.eye(n)
    for i in range(n):
        m = 0.5 * (p[i] + p[i + 1 :])
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(p[i] > 0, p[i] * np.log2(p[i] / m), 0.0).sum(axis=1)
            b = np.where(p[i + 1 :] > 0, p[i + 1 :] * np.log2(p[i + 1 :] / m), 0.0).sum(axis=1)
        g[i, i + 1 :] = g[i + 1 :, i] = 1.0 - np.clip(0.5 * (a + b), 0.0, 1.0)
    return g


def level_grams(stacks: Sequence, kind: KernelKind = KernelKind()) -> np.ndarray:
    """Per-scale kernel matrices, shape ``(scales, n, n)``."""
    levels = [_levels_of(s) for s in stacks]
    if len({lv.shape for lv in levels}) > 1:
        raise DimensionMismatch("stacks must share ladder and signal dimensions")
    return np.array([gram_matrix([lv[j] for lv in levels], kind) for j in range(levels[0].shape[0])])


def distances_from_gram(g: np.ndarray) -> np.ndarray:
    d = np.diag(g)
    return np.sqrt(np.maximum(d[:, None] + d[None, :] - 2 * g, 0.0))


def scale_distance(a, b, kind: KernelKind = KernelKind()) -> float:
    """Kernel-induced distance between two signals at one scale."""
    sq = single_scale_kernel(a, a, kind) + single_scale_kernel(b, b, kind) - 2 * single_scale_kernel(a, b, kind)
    return float(np.sqrt(max(sq, 0.0)))


def hit_miss_margins(stacks: Sequence, labels: Sequence, kind: KernelKind = KernelKind(), grams: np.ndarray | None = None) -> MarginTable:
    """Nearest-miss minus nearest-hit distance for every document at every scale.

    Neighbours are searched separately at each scale; ties go to the lowest
    document index.
    """
    labels = list(labels)
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DegenerateClass("need at least two classes")
    for c in classes:
        if labels.count(c) < 2:
            raise DegenerateClass(f"class {c!r} has a single member")
    if grams is None:
        grams = level_grams(stacks, kind)
    lab = np.array(labels, dtype=object)
    same = lab[:, None] == lab[None, :]
    n = len(labels)
    eye = np.eye(n, dtype=bool)
    out = np.empty((n, grams.shape[0]))
    for j, g in enumerate(grams):
        d = distances_from_gram(g)
        hit = np.where(same & ~eye, d, np.inf).argmin(axis=1)
        miss = np.where(~same, d, np.inf).argmin(axis=1)
        out[:, j] = d[np.arange(n), miss] - d[np.arange(n), hit]
    scales = _scales_of(stacks[0], grams.shape[0])
    return MarginTable(out, scales, tuple(range(n)))


def _scales_of(stack, count):
    s = getattr(stack, "scales_x", None)
    return np.asarray(s, dtype=float) if s is not None else np.arange(count, dtype=float)


def learn_scale_distribution(margins: MarginTable) -> ScaleDistribution:
    """Positive part of the mean margin, scaled to unit l2 norm."""
    if margins.values.size == 0:
        raise ValueError("margin table is empty")
    h = np.maximum(margins.mean, 0.0)
    top = h.max()
    if not top > 0:
        raise NoPositiveMargin("no scale has a positive mean margin")
    h = h / top  # guards the norm against underflow
    return ScaleDistribution(margins.scales, h / np.linalg.norm(h), "l2")


def _require_prob(q: ScaleDistribution, count: int):
    if q.norm != "prob":
        raise ValueError("expected a probability-normalised scale distribution; call as_probability()")
    if len(q.weights) != count:
        raise DimensionMismatch(f"distribution has {len(q.weights)} scales, stack has {count}")


def sitk(a, b, q: ScaleDistribution, kind: KernelKind = KernelKind()) -> float:
    """Expected single-scale kernel under ``q``."""
    la, lb = _levels_of(a), _levels_of(b)
    _require_prob(q, la.shape[0])
    return float(sum(w * single_scale_kernel(x, y, kind) for w, x, y in zip(q.weights, la, lb) if w))


def sitk_matrix(stacks: Sequence, q: ScaleDistribution, kind: KernelKind = KernelKind(), grams: np.ndarray | None = None) -> np.ndarray:
    if grams is None:
        grams = level_grams(stacks, kind)
    _require_prob(q, grams.shape[0])
    return np.tensordot(q.weights, grams, axes=1)


# ---------------------------------------------------------------------------
# relevance


def neg_kl(p, q, eps: float = KL_EPS) -> float:
    """``-KL(p || q)`` on normalised inputs with ``eps`` added inside the logarithm."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    ps, qs = p.sum(), q.sum()
    p = p / ps if ps > 0 else p
    q = q / qs if qs > 0 else q
    return float(-np.sum(p * np.log((p + eps) / (q + eps))))


def _neg_kl_rows(p, rows, eps=KL_EPS) -> np.ndarray:
    ps = p.sum()
    p = p / ps if ps > 0 else p
    tot = rows.sum(axis=1, keepdims=True)
    rows = np.divide(rows, tot, out=np.zeros_like(rows), where=tot > 0)
    return -(p * np.log((p + eps) / (rows + eps))).sum(axis=1)


def relevance_at_scale(query, doc, signal: str = "sentence", aggregate: str = "sum") -> float:
    """Relevance of one query level to one document level.

    ``bow``: both are vocabulary vectors. ``sentence``/``topic``: the query
    vector is compared with every document row and the scores are summed
    (or averaged). ``word``: the query is stretched to the document length
    and the joint distributions are compared.
    """
    q, d = np.asarray(query, dtype=float), np.asarray(doc, dtype=float)
    if signal == "bow":
        return neg_kl(q.ravel(), d.ravel())
    if signal in ("sentence", "topic"):
        qv = q.sum(axis=0) if q.ndim == 2 else q
        if d.ndim == 1:
            d = d[None, :]
        if qv.shape[0] != d.shape[1]:
            raise DimensionMismatch("query and document semantic dimensions differ")
        scores = _neg_kl_rows(qv, d)
        return float(scores.sum() if aggregate == "sum" else scores.mean())
    if signal == "word":
        q2 = q if q.ndim == 2 else q[None, :]
        if q2.shape[1] != d.shape[1]:
            raise DimensionMismatch("query and document semantic dimensions differ")
        return neg_kl(resample_rows(q2, d.shape[0]).ravel(), d.ravel())
    raise ValueError(f"unknown signal kind {signal!r}")


def silm_relevance(query, doc, q: ScaleDistribution, signal: str = "sentence", aggregate: str = "sum") -> float:
    """Expected relevance over scales, ``sum_j q_j r(Q, d | s_j)``."""
    lq, ld = _levels_of(query), _levels_of(doc)
    _require_prob(q, ld.shape[0])
    return float(sum(w * relevance_at_scale(a, b, signal, aggregate) for w, a, b in zip(q.weights, lq, ld) if w))


def relevance_profile(query, doc, signal="sentence", aggregate="sum") -> np.ndarray:
    """Relevance at every level of the two stacks."""
    return np.array([relevance_at_scale(a, b, signal, aggregate) for a, b in zip(_levels_of(query), _levels_of(doc))])


def pairwise_margins(judged: Sequence, signal: str = "sentence", aggregate: str = "sum") -> MarginTable:
    """Preference margins ``r(Q, d_i | s) - r(Q, d_j | s)`` for every judged pair with grade_i > grade_j.

    ``judged`` holds ``(query_id, query_stack, [(doc_id, doc_stack, grade), ...])``.
    """
    rows, labels, scales = [], [], None
    for qid, qstack, docs in judged:
        prof = {did: relevance_profile(qstack, dstack, signal, aggregate) for did, dstack, _ in docs}
        if scales is None and docs:
            scales = _scales_of(docs[0][1], len(next(iter(prof.values()))))
        for di, _, gi in docs:
            for dj, _, gj in docs:
                if gi > gj:
                    rows.append(prof[di] - prof[dj])
                    labels.append((qid, di, dj))
    if not rows:
        raise NoPreferencePairs("no query has a preferred document pair")
    return MarginTable(np.array(rows), scales, tuple(labels))
