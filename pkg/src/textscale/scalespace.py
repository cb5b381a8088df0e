"""Multi-scale stacks, derivative stacks, extrema tracking and interest points."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidRange, InvalidScale
from .kernels import (
    DEFAULT_TRUNC,
    Boundary,
    apply_semantic,
    convolve_1d,
    gaussian_derivative_kernel,
    smooth_spatial,
)
from .semgraph import SemanticSmoother
from .signals import Signal1D, Signal2D, TopicSignal
from .textio import atomic_write


@dataclass(frozen=True)
class ScaleLadder:
    scales: tuple[float, ...]
    ratio: float | None = None
    includes_zero: bool = False

    def __post_init__(self):
        s = tuple(float(v) for v in self.scales)
        if not s or any(v <= 0 for v in s) or any(b <= a for a, b in zip(s, s[1:])):
            raise InvalidRange("ladder scales must be positive and strictly ascending")
        object.__setattr__(self, "scales", s)

    @property
    def levels(self) -> np.ndarray:
        return np.array(((0.0,) if self.includes_zero else ()) + self.scales)

    def __len__(self):
        return len(self.scales) + int(self.includes_zero)


def build_scale_ladder(s_min: float, s_max: float, count: int, include_zero: bool = False) -> ScaleLadder:
    """Geometric progression from ``s_min`` to ``s_max`` inclusive."""
    if not (0 < s_min < s_max) or count < 2:
        raise InvalidRange(f"need 0 < s_min < s_max and count >= 2, got ({s_min}, {s_max}, {count})")
    ratio = (s_max / s_min) ** (1.0 / (count - 1))
    scales = s_min * ratio ** np.arange(count)
    scales[-1] = s_max
    return ScaleLadder(tuple(scales), ratio, include_zero)


def _levels(ladder) -> np.ndarray:
    if isinstance(ladder, ScaleLadder):
        return ladder.levels
    levels = np.asarray(ladder, dtype=float).ravel()
    if (levels < 0).any() or (np.diff(levels) <= 0).any():
        raise InvalidRange("scales must be non-negative and strictly ascending")
    return levels


def _semantic_scales(s_y, levels):
    if s_y is None:
        return levels.copy()
    s_y = np.broadcast_to(np.asarray(s_y, dtype=float), levels.shape).copy()
    if (s_y < 0).any():
        raise InvalidScale("semantic scales must be >= 0")
    return s_y


def _semantic_op(semantic, s_y):
    if semantic is None or s_y == 0:
        return None
    if isinstance(semantic, SemanticSmoother):
        return semantic.operator(s_y)
    return semantic(s_y) if callable(semantic) else semantic


def _unwrap(sig):
    """Return (values, spatial?, semantic?) for any supported signal type."""
    if isinstance(sig, Signal2D):
        return sig.values, True, True
    if isinstance(sig, TopicSignal):
        return sig.values, True, False
    if isinstance(sig, Signal1D):
        if sig.domain == "semantic":
            return sig.values[None, :], False, True
        return sig.values, True, False
    return np.asarray(sig, dtype=float), True, False


@dataclass
class ScaleSpaceStack:
    """Smoothed versions of one signal; ``levels[i]`` is the signal at ``scales_x[i], scales_y[i]``."""

    base: np.ndarray
    levels: np.ndarray
    scales_x: np.ndarray
    scales_y: np.ndarray
    kind: str = "array"
    derivatives: dict[int, np.ndarray] = field(default_factory=dict)

    def __len__(self):
        return len(self.scales_x)

    def export(self, directory) -> list[str]:
        """Write one ``TSS1`` file per level plus ``scales.tsv``."""
        import os

        from .textio import save_signal

        os.makedirs(directory, exist_ok=True)
        paths = []
        for i, lvl in enumerate(self.levels):
            p = os.path.join(directory, f"level_{i:03d}.tss")
            save_signal(lvl if lvl.ndim == 2 else lvl[None, :], p)
            paths.append(p)
        with atomic_write(os.path.join(directory, "scales.tsv")) as fh:
            for i, (sx, sy) in enumerate(zip(self.scales_x, self.scales_y)):
                fh.write(f"{i}\t{float(sx)!r}\t{float(sy)!r}\n")
        return paths


def build_stack(
    sig,
    ladder,
    s_y=None,
    semantic=None,
    family: str = "discrete-gaussian",
    boundary=Boundary.RENORMALIZE,
    trunc_mass: float = DEFAULT_TRUNC,
) -> ScaleSpaceStack:
    """Smooth ``sig`` at every ladder level.

    ``s_y`` is ``None`` (semantic scale equal to the spatial one), a constant,
    or one value per level. ``semantic`` is a :class:`SemanticSmoother`, a
    fixed operator, or ``None`` for no semantic smoothing. Topic signals and
    spatial 1D signals are only smoothed spatially.
    """
    levels = _levels(ladder)
    values, spatial, semantic_axis = _unwrap(sig)
    sy = _semantic_scales(s_y, levels)
    out = []
    for sx, syl in zip(levels, sy):
        v = smooth_spatial(values, sx, family, boundary, trunc_mass) if spatial else values.copy()
        if semantic_axis:
            v = apply_semantic(v, _semantic_op(semantic, syl))
        out.append(v[0] if (semantic_axis and not spatial) else v)
    base = values[0] if (semantic_axis and not spatial) else values
    kind = getattr(sig, "kind", None) or type(sig).__name__
    return ScaleSpaceStack(np.array(base), np.array(out), levels, sy, kind)


def derivative_stack(
    sig,
    ladder,
    order: int,
    s_y=None,
    semantic=None,
    boundary=Boundary.MIRROR,
    trunc_mass: float = DEFAULT_TRUNC,
) -> np.ndarray:
    """Spatial derivative of order ``order`` at each (positive) ladder level."""
    levels = _levels(ladder)
    values, spatial, semantic_axis = _unwrap(sig)
    if not spatial:
        raise ValueError("derivatives need a spatial axis")
    sy = _semantic_scales(s_y, levels)
    out = []
    for sx, syl in zip(levels, sy):
        v = convolve_1d(values, gaussian_derivative_kernel(sx, order, trunc_mass), boundary)
        if semantic_axis:
            v = apply_semantic(v, _semantic_op(semantic, syl))
        out.append(v)
    return np.array(out)


# ---------------------------------------------------------------------------
# extrema


@dataclass(frozen=True)
class Extremum:
    x: int
    y: int | None
    sign: int  # +1 maximum, -1 minimum
    value: float


def _extrema_mask(v: np.ndarray, neighbourhood: str, tol: float, ties: str) -> np.ndarray:
    n = v.shape[0]
    mask = np.zeros(v.shape, dtype=bool)
    if n < 3:
        return mask
    c = v[1:-1]
    left, right = v[:-2], v[2:]
    if v.ndim == 1:
        ok = (c > left + tol) & ((c >= right) if ties == "left" else (c > right + tol))
        mask[1:-1] = ok
        return mask
    if neighbourhood == "all":
        ok = np.ones(c.shape, dtype=bool)
        for other in (left, right):
            ok &= c > other.max(axis=1, keepdims=True) + tol
        # best value in the same row, excluding the entry itself
        srt = np.sort(v, axis=1)
        second = np.where(v == srt[:, -1:], srt[:, -2:-1], srt[:, -1:]) if v.shape[1] > 1 else np.full_like(v, -np.inf)
        ok &= c > second[1:-1] + tol
        mask[1:-1] = ok
        return mask
    pad = np.pad(v, ((1, 1), (1, 1)), constant_values=-np.inf)
    centre = pad[1:-1, 1:-1]
    ok = np.ones(v.shape, dtype=bool)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx or dy:
                ok &= centre > pad[1 + dx : 1 + dx + v.shape[0], 1 + dy : 1 + dy + v.shape[1]] + tol
    ok[0] = ok[-1] = False
    return ok


def detect_extrema(level, kind: str = "both", neighbourhood: str = "grid", tol: float = 0.0, ties: str = "strict") -> list[Extremum]:
    """Strict interior local extrema of a 1D or 2D level.

    1D: compared with ``x - 1`` and ``x + 1``. 2D ``grid``: the 8-neighbourhood.
    2D ``all``: the entry must beat every entry in rows ``x - 1 .. x + 1``
    (vocabulary order carries no meaning, so all words are neighbours).
    Spatial boundary positions are never reported. ``ties="left"`` (1D only)
    also accepts the left end of a plateau.
    """
    v = np.asarray(level, dtype=float)
    found = []
    if kind in ("max", "both"):
        for idx in zip(*np.nonzero(_extrema_mask(v, neighbourhood, tol, ties))):
            found.append(Extremum(int(idx[0]), int(idx[1]) if v.ndim == 2 else None, 1, float(v[idx])))
    if kind in ("min", "both"):
        for idx in zip(*np.nonzero(_extrema_mask(-v, neighbourhood, tol, ties))):
            found.append(Extremum(int(idx[0]), int(idx[1]) if v.ndim == 2 else None, -1, float(v[idx])))
    found.sort(key=lambda e: (e.x, -1 if e.y is None else e.y, -e.sign))
    return found


# ---------------------------------------------------------------------------
# interval tree


@dataclass
class IntervalNode:
    id: int
    x: int
    y: int | None
    sign: int
    s_emerge: float  # coarsest scale at which the node exists
    s_end: float  # finest scale at which it still exists
    parent: int | None
    principal: bool = False  # continues its parent's contour after a split
    x_top: int = 0

    @property
    def is_root(self):
        return self.parent is None


@dataclass
class IntervalTree:
    nodes: list[IntervalNode]
    scales: np.ndarray

    @property
    def roots(self) -> list[IntervalNode]:
        return [n for n in self.nodes if n.parent is None]

    def children(self, node_id: int) -> list[IntervalNode]:
        return [n for n in self.nodes if n.parent == node_id]

    def depth(self, node_id: int) -> int:
        d, n = 0, self.nodes[node_id]
        while n.parent is not None:
            n = self.nodes[n.parent]
            d += 1
        return d

    def contour_top(self, node_id: int) -> float:
        """Coarsest scale of the contour ``node_id`` belongs to (follows principal links upward)."""
        n = self.nodes[node_id]
        while n.principal and n.parent is not None:
            n = self.nodes[n.parent]
        return n.s_emerge

    def leaves_at(self, scale: float) -> list[IntervalNode]:
        return [n for n in self.nodes if n.s_end == scale]

    def count_at(self, scale: float) -> int:
        return sum(1 for n in self.nodes if n.s_end <= scale <= n.s_emerge)

    def export_jsonl(self, path) -> None:
        with atomic_write(path) as fh:
            for n in self.nodes:
                fh.write(json.dumps({"node_id": n.id, "parent_id": n.parent, "x": n.x, "y": n.y, "s_emerge": n.s_emerge, "s_end": n.s_end}) + "\n")


def link_radius(delta_s: float) -> int:
    return max(1, math.ceil(2.0 * math.sqrt(max(delta_s, 0.0))))


def build_interval_tree(extrema_per_level: Sequence[Sequence[Extremum]], scales) -> IntervalTree:
    """Track extrema from the coarsest level to the finest.

    ``extrema_per_level[i]`` belongs to ``scales[i]`` (ascending). An
    extremum continues a coarser node when it is that node's only same-sign
    (same-word, in 2D) match within ``link_radius``. When a node gains more
    than one same-sign successor it splits: the node ends and every successor
    opens a child, the nearest one marked ``principal``. Extrema without a
    match open a node whose parent is the nearest coarser extremum.
    """
    scales = np.asarray(scales, dtype=float)
    if len(extrema_per_level) != len(scales):
        raise ValueError("one extrema list per scale is required")
    nodes: list[IntervalNode] = []

    def new(e: Extremum, s, parent, principal=False):
        nodes.append(IntervalNode(len(nodes), e.x, e.y, e.sign, float(s), float(s), parent, principal, e.x))
        return nodes[-1].id

    top = len(scales) - 1
    active = {new(e, scales[top], None): e for e in extrema_per_level[top]}
    for lvl in range(top - 1, -1, -1):
        s = scales[lvl]
        radius = link_radius(scales[lvl + 1] - s)
        fine = list(extrema_per_level[lvl])
        matched: dict[int, list[int]] = {nid: [] for nid in active}
        orphans = []
        for i, e in enumerate(fine):
            best = None
            for nid, ce in active.items():
                if ce.sign != e.sign or ce.y != e.y:
                    continue
                d = abs(ce.x - e.x)
                if d <= radius and (best is None or d < best[0]):
                    best = (d, nid)
            if best is None:
                orphans.append(i)
            else:
                matched[best[1]].append(i)
        # parent of an orphan: nearest coarser extremum in position
        orphan_parent = {}
        for i in orphans:
            e = fine[i]
            best = None
            for nid, ce in active.items():
                d = abs(ce.x - e.x)
                if best is None or d < best[0]:
                    best = (d, nid)
            orphan_parent[i] = None if best is None else best[1]
        next_active = {}
        for nid, idxs in matched.items():
            ce = active[nid]
            rivals = [i for i in orphans if orphan_parent[i] == nid and fine[i].sign == ce.sign and fine[i].y == ce.y]
            if len(idxs) == 1 and not rivals:
                nodes[nid].s_end = float(s)
                nodes[nid].x = fine[idxs[0]].x
                next_active[nid] = fine[idxs[0]]
                continue
            if not idxs and not rivals:
                continue
            succ = sorted(idxs, key=lambda i: (abs(fine[i].x - ce.x), i))
            for rank, i in enumerate(succ):
                cid = new(fine[i], s, nid, principal=rank == 0)
                next_active[cid] = fine[i]
            for i in rivals:
                orphans.remove(i)
                cid = new(fine[i], s, nid, principal=not succ and i == rivals[0])
                next_active[cid] = fine[i]
        for i in orphans:
            cid = new(fine[i], s, orphan_parent[i])
            next_active[cid] = fine[i]
        active = next_active
    return IntervalTree(nodes, scales)


def tree_from_stack(stack: ScaleSpaceStack, kind="max", neighbourhood="grid", tol=0.0) -> IntervalTree:
    extrema = [detect_extrema(level, kind, neighbourhood, tol) for level in stack.levels]
    return build_interval_tree(extrema, stack.scales_x)


# ---------------------------------------------------------------------------
# interest points


@dataclass(frozen=True)
class InterestPoint:
    x: int
    scale: float
    response: float
    sign: int
    level: int


def difference_stack(stack: ScaleSpaceStack) -> np.ndarray:
    """Differences of adjacent levels reduced to one value per (level, x).

    1D stacks keep the signed difference; higher-dimensional stacks use the
    l2 norm over the non-spatial axes.
    """
    diff = np.diff(stack.levels, axis=0)
    if diff.ndim == 2:
        return diff
    return np.sqrt((diff.reshape(diff.shape[0], diff.shape[1], -1) ** 2).sum(axis=2))


def detect_interest_points(stack: ScaleSpaceStack, threshold: float = 0.03) -> list[InterestPoint]:
    """Strict extrema of the difference stack over their 3 x 3 (scale, x) neighbourhood.

    Neighbourhoods are clipped at the stack edges. Points whose absolute
    response is below ``threshold`` times the largest absolute response are
    discarded. Sorted by absolute response, largest first.
    """
    if len(stack) < 3:
        raise ValueError("interest points need at least 3 levels")
    d = difference_stack(stack)
    signed = stack.levels.ndim == 2
    peak = np.abs(d).max()
    if not peak > 1e-12 * max(1.0, np.abs(stack.levels).max()):
        return []
    pad = np.pad(d, 1, constant_values=np.nan)
    points = []
    scales = stack.scales_x
    for sgn in ((1, -1) if signed else (1,)):
        v = sgn * pad
        centre = v[1:-1, 1:-1]
        ok = np.ones(d.shape, dtype=bool)
        for dl in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dl or dx:
                    nb = v[1 + dl : 1 + dl + d.shape[0], 1 + dx : 1 + dx + d.shape[1]]
                    ok &= np.isnan(nb) | (centre > nb)
        ok &= sgn * d >= threshold * peak
        ok &= sgn * d > 0
        for l, x in zip(*np.nonzero(ok)):
            lo, hi = scales[l], scales[l + 1]
            s = math.sqrt(lo * hi) if lo > 0 else hi / 2
            points.append(InterestPoint(int(x), float(s), float(d[l, x]), sgn, int(l)))
    points.sort(key=lambda p: (-abs(p.response), p.x, p.level))
    return points
