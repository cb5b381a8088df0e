"""Semantic word graph, graph dissimilarities and semantic smoothing operators."""
from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import cg

from .errors import EmptyGraphWarning, InvalidScale, SingularSystem
from .textio import Document, Vocabulary


@dataclass
class SemanticGraph:
    """Undirected weighted graph over the vocabulary.

    ``edges`` maps ``(a, b)`` with ``a < b`` to a positive weight; node weights
    default to 1.
    """

    words: tuple[str, ...]
    edges: dict[tuple[int, int], float]
    node_weights: np.ndarray = None

    def __post_init__(self):
        m = len(self.words)
        if self.node_weights is None:
            self.node_weights = np.ones(m)
        self.node_weights = np.asarray(self.node_weights, dtype=float)
        if self.node_weights.shape != (m,) or (self.node_weights <= 0).any():
            raise ValueError("node weights must be positive, one per word")
        clean = {}
        for (a, b), w in self.edges.items():
            if a == b:
                raise ValueError("self-edges are not allowed")
            if not (0 <= a < m and 0 <= b < m):
                raise ValueError("edge endpoint out of range")
            if not (math.isfinite(w) and w > 0):
                raise ValueError("edge weights must be finite and positive")
            clean[(min(a, b), max(a, b))] = float(w)
        self.edges = clean
        self._cache = {}

    @property
    def size(self) -> int:
        return len(self.words)

    def weight(self, a: int, b: int) -> float:
        return self.edges.get((min(a, b), max(a, b)), 0.0)

    def adjacency(self) -> sparse.csr_matrix:
        m = self.size
        if not self.edges:
            return sparse.csr_matrix((m, m))
        (rows, cols), vals = zip(*self.edges.keys()), list(self.edges.values())
        a = sparse.coo_matrix((vals, (rows, cols)), shape=(m, m))
        return (a + a.T).tocsr()

    def laplacian(self) -> sparse.csr_matrix:
        a = self.adjacency()
        return (sparse.diags(np.asarray(a.sum(axis=1)).ravel()) - a).tocsr()

    def components(self) -> np.ndarray:
        return csgraph.connected_components(self.adjacency(), directed=False)[1]

    @classmethod
    def empty(cls, vocab: Vocabulary) -> "SemanticGraph":
        return cls(tuple(vocab.words), {})


def build_pmi_graph(corpus: Sequence[Document], vocab: Vocabulary, window: int = 5, threshold: float = 0.0) -> SemanticGraph:
    """Positive-PMI co-occurrence graph.

    Two tokens co-occur when their positions in a document differ by at most
    ``window``. Counts over all unordered word pairs get add-one smoothing;
    only pairs actually observed become candidate edges, and pairs whose PMI
    is not above ``max(threshold, 0)`` are dropped.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    m = len(vocab)
    pairs: Counter[tuple[int, int]] = Counter()
    for doc in corpus:
        toks = doc.tokens
        for i, a in enumerate(toks):
            for b in toks[i + 1 : i + 1 + window]:
                if a != b:
                    pairs[(min(a, b), max(a, b))] += 1
    n_pairs = m * (m - 1) // 2
    total = sum(pairs.values()) + n_pairs
    marg = np.full(m, float(m - 1))  # each word takes part in m-1 smoothed pairs
    for (a, b), c in pairs.items():
        marg[a] += c
        marg[b] += c
    p_word = marg / (2.0 * total)
    cut = max(threshold, 0.0)
    edges = {}
    for (a, b), c in pairs.items():
        pmi = math.log(((c + 1) / total) / (2.0 * p_word[a] * p_word[b]))
        if pmi > cut:
            edges[(a, b)] = pmi
    if not edges:
        warnings.warn("no edge survived the PMI threshold", EmptyGraphWarning, stacklevel=2)
    return SemanticGraph(tuple(vocab.words), edges)


def graph_dissimilarity(graph: SemanticGraph) -> np.ndarray:
    """Shortest-path distances with edge length ``1 / weight``; unreachable pairs are ``inf``."""
    if "dist" not in graph._cache:
        a = graph.adjacency()
        lengths = a.copy()
        lengths.data = 1.0 / lengths.data
        d = csgraph.shortest_path(lengths, method="D", directed=False)
        # path sums depend on traversal order; keep the matrix exactly symmetric
        graph._cache["dist"] = np.minimum(d, d.T)
    return graph._cache["dist"]


def semantic_kernel_operator(graph: SemanticGraph, s_y: float, normalize: bool = True) -> np.ndarray:
    """Gaussian of the graph distance, ``exp(-d^2 / 2 s_y)``; rows rescaled to sum 1.

    Apply to a row signal as ``values @ op``: each word spreads its mass to its
    neighbours, so total mass is conserved.
    """
    if s_y < 0:
        raise InvalidScale(f"semantic scale must be >= 0, got {s_y}")
    m = graph.size
    if s_y == 0:
        return np.eye(m)
    d = graph_dissimilarity(graph)
    with np.errstate(over="ignore"):
        k = np.exp(-(d**2) / (2.0 * s_y))
    if normalize:
        k /= k.sum(axis=1, keepdims=True)
    return k


def smoothing_matrix(graph: SemanticGraph, lam: float) -> sparse.csr_matrix:
    """System matrix ``(1 - lam) diag(mu) + 2 lam L`` of the graph-smoothing objective."""
    return ((1.0 - lam) * sparse.diags(graph.node_weights) + 2.0 * lam * graph.laplacian()).tocsr()


def smoothing_objective(gamma, f, graph: SemanticGraph, lam: float) -> float:
    """Fidelity plus ordered-pair smoothness penalty (each unordered edge counted twice)."""
    gamma, f = np.asarray(gamma, float), np.asarray(f, float)
    fid = float(np.sum(graph.node_weights * (gamma - f) ** 2))
    smooth = sum(2.0 * w * (gamma[a] - gamma[b]) ** 2 for (a, b), w in graph.edges.items())
    return (1.0 - lam) * fid + lam * smooth


def graph_smooth(f, graph: SemanticGraph, lam: float, rtol: float = 1e-12):
    """Minimise the graph-smoothing objective for a semantic signal ``f``.

    Solves the first-order condition by conjugate gradients. ``f`` may be a
    vector or an ``(N, M)`` array smoothed row by row. ``lam == 1`` returns
    the node-weighted mean on a connected graph.
    """
    from .signals import Signal1D

    wrapped = isinstance(f, Signal1D)
    values = np.asarray(f.values if wrapped else f, dtype=float)
    m = graph.size
    if values.shape[-1] != m:
        raise ValueError(f"signal has {values.shape[-1]} entries, graph has {m} nodes")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    if lam == 0.0:
        out = values.copy()
    elif lam == 1.0:
        if m and len(np.unique(graph.components())) > 1:
            raise SingularSystem("lambda = 1 on a disconnected graph has no unique minimiser")
        mu = graph.node_weights
        mean = (values * mu).sum(axis=-1, keepdims=True) / mu.sum()
        out = np.broadcast_to(mean, values.shape).copy()
    else:
        a = smoothing_matrix(graph, lam)
        rhs = (1.0 - lam) * graph.node_weights * values
        diag = a.diagonal()
        precond = sparse.diags(1.0 / diag)
        flat = rhs.reshape(-1, m)
        out = np.empty_like(flat)
        for i, b in enumerate(flat):
            if not b.any():
                out[i] = 0.0
                continue
            x, info = cg(a, b, x0=b / diag, rtol=rtol, atol=0.0, maxiter=10 * m + 100, M=precond)
            if info != 0 or np.linalg.norm(a @ x - b) > 1e-10 * max(1.0, np.linalg.norm(b)):
                x = sparse.linalg.spsolve(a.tocsc(), b)
            out[i] = x
        out = out.reshape(values.shape)
    if wrapped:
        return Signal1D(np.maximum(out, 0.0), f.domain, f.normalized)
    return out


def graph_smooth_dense(f, graph: SemanticGraph, lam: float) -> np.ndarray:
    """Dense direct solve of the same system; reference for tests."""
    a = smoothing_matrix(graph, lam).toarray()
    return np.linalg.solve(a, (1.0 - lam) * graph.node_weights * np.asarray(f, float))


@dataclass
class SemanticSmoother:
    """Semantic axis operator at a given scale.

    ``distance-kernel`` uses the Gaussian of graph distance with variance
    ``s_y``. ``graph-solve`` minimises the graph objective with
    ``lam = s_y / (1 + s_y)`` unless a fixed ``lam`` is given.
    """

    graph: SemanticGraph
    mode: str = "distance-kernel"
    lam: float | None = None
    _ops: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.mode not in ("distance-kernel", "graph-solve"):
            raise ValueError(f"unknown semantic mode {self.mode!r}")
        if self.lam is not None and not 0 <= self.lam <= 1:
            raise ValueError("lambda must lie in [0, 1]")

    def operator(self, s_y: float):
        if s_y < 0:
            raise InvalidScale(f"semantic scale must be >= 0, got {s_y}")
        if s_y == 0:
            return None
        if s_y not in self._ops:
            if self.mode == "distance-kernel":
                self._ops[s_y] = semantic_kernel_operator(self.graph, s_y)
            else:
                lam = self.lam if self.lam is not None else s_y / (1.0 + s_y)
                self._ops[s_y] = lambda v, lam=lam: graph_smooth(v, self.graph, lam)
        return self._ops[s_y]
