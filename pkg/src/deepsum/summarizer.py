"""Representative segment selection by k-medoids.

The k-medoids objective F(S) (sum over points of the squared distance to
the nearest selected medoid) is minimised greedily. Greedy theory wants a
monotone submodular function to maximise, so selection works on the
coverage gain

    G(S) = sum_j [D0 - min_{s in S} d(X_j, s)],    D0 = max pairwise distance,

with min over the empty set taken as D0. Maximising G is the same as
minimising F; D0 only shifts the scale so that G(empty) = 0.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

# pairwise distances are cached as a dense matrix up to this many points
CACHE_LIMIT = 4096


@dataclass
class PointSet:
    """Embedded segments: one row of ``X`` per segment."""

    indices: np.ndarray
    X: np.ndarray
    costs: np.ndarray | None = None
    starts: np.ndarray | None = None
    ends: np.ndarray | None = None

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        n = len(self.indices)
        if n == 0:
            raise ValueError("point set is empty")
        if self.X.shape[0] != n:
            raise ValueError(f"{n} indices but {self.X.shape[0]} points")
        if len(np.unique(self.indices)) != n:
            raise ValueError("segment indices must be unique")
        self.costs = np.ones(n) if self.costs is None else np.asarray(self.costs, dtype=np.float64)
        if self.costs.shape != (n,) or np.any(self.costs <= 0):
            raise ValueError("costs must be positive, one per point")
        self.starts = self.indices.astype(np.float64) if self.starts is None else np.asarray(self.starts, dtype=np.float64)
        self.ends = self.starts + self.costs if self.ends is None else np.asarray(self.ends, dtype=np.float64)

    def __len__(self):
        return len(self.indices)

    @classmethod
    def from_segments(cls, segments, X) -> "PointSet":
        return cls([s.index for s in segments], X, [s.cost for s in segments],
                   [s.start_s for s in segments], [s.end_s for s in segments])

    def positions(self, segment_indices) -> np.ndarray:
        lookup = {int(i): p for p, i in enumerate(self.indices)}
        try:
            return np.array([lookup[int(i)] for i in segment_indices], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"segment {exc.args[0]} is not in the point set") from None

    def time_order(self, positions) -> list[int]:
        """Segment indices for ``positions`` sorted by start time, then index."""
        pos = sorted(positions, key=lambda p: (self.starts[p], self.indices[p]))
        return [int(self.indices[p]) for p in pos]


@dataclass
class Summary:
    selected: list[int]
    K: int
    objective_value: float
    merged_timeline: list[tuple[float, float]] = field(default_factory=list)
    algorithm: str = ""
    gains: list[float] = field(default_factory=list)    # marginal gains in pick order
    order: list[int] = field(default_factory=list)      # segment indices in pick order


class _Distances:
    """Squared Euclidean distances, computed exactly as sums of squared differences."""

    def __init__(self, X, cache_limit=CACHE_LIMIT):
        self.X = X
        self.n = len(X)
        self._full = self._block(0, self.n) if self.n <= cache_limit else None

    def _block(self, lo, hi, chunk=256):
        out = np.empty((hi - lo, self.n))
        for a in range(lo, hi, chunk):
            b = min(a + chunk, hi)
            diff = self.X[a:b, None, :] - self.X[None, :, :]
            out[a - lo:b - lo] = np.einsum("ijk,ijk->ij", diff, diff)
        return out

    def row(self, p) -> np.ndarray:
        if self._full is not None:
            return self._full[p]
        return self._block(p, p + 1)[0]

    def max(self) -> float:
        if self._full is not None:
            return float(self._full.max())
        return max(float(self.row(p).max()) for p in range(self.n))


def pairwise_sq_distances(X) -> np.ndarray:
    return _Distances(np.atleast_2d(np.asarray(X, dtype=np.float64)))._block(0, len(X))


def objective(points: PointSet, selected) -> float:
    """k-medoids cost of medoid set ``selected`` (segment indices)."""
    pos = points.positions(selected)
    if len(pos) == 0:
        raise ValueError("medoid set is empty")
    diff = points.X[:, None, :] - points.X[None, pos, :]
    d = np.einsum("ijk,ijk->ij", diff, diff)
    return float(d.min(axis=1).sum())


def coverage_gain(points: PointSet, selected) -> float:
    """G(S) for segment indices ``selected``; G(empty) = 0."""
    if len(selected) == 0:
        return 0.0
    d0 = _Distances(points.X).max()
    return len(points) * d0 - objective(points, selected)


def budget_k(duration_s: float, window_s: float = 5.0, ratio: float = 0.15) -> int:
    """Summary length in segments: max(1, floor(ratio * duration / window))."""
    if duration_s <= 0 or window_s <= 0 or not 0 < ratio <= 1:
        raise ValueError("duration_s and window_s must be positive and ratio in (0, 1]")
    return max(1, int(math.floor(ratio * duration_s / window_s + 1e-9)))


def _overlaps(points, p, chosen) -> bool:
    return any(points.starts[p] < points.ends[q] and points.starts[q] < points.ends[p] for q in chosen)


class _Greedy:
    """State shared by the naive and lazy variants so both compute gains identically."""

    def __init__(self, points: PointSet, cost_aware: bool, no_overlap: bool):
        self.points = points
        self.dist = _Distances(points.X)
        self.cover = np.full(len(points), self.dist.max())
        self.cost_aware = cost_aware
        self.no_overlap = no_overlap
        self.chosen: list[int] = []
        self.gains: list[float] = []

    def gain(self, p) -> float:
        return float(np.maximum(self.cover - self.dist.row(p), 0.0).sum())

    def rank(self, gain, p) -> float:
        return gain / self.points.costs[p] if self.cost_aware else gain

    def key(self, rank, p):
        # smaller is better: highest rank, then earliest start, then lowest index
        return (-rank, float(self.points.starts[p]), int(self.points.indices[p]))

    def eligible(self, p) -> bool:
        return p not in self.chosen and not (self.no_overlap and _overlaps(self.points, p, self.chosen))

    def take(self, p, gain):
        self.chosen.append(p)
        self.gains.append(gain)
        np.minimum(self.cover, self.dist.row(p), out=self.cover)

    def summary(self, K, algorithm) -> Summary:
        sel = self.points.time_order(self.chosen)
        return Summary(sel, K, objective(self.points, sel), algorithm=algorithm,
                       gains=list(self.gains), order=[int(self.points.indices[p]) for p in self.chosen])


def _check_k(points, K):
    if len(points) == 0:
        raise ValueError("point set is empty")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    return min(int(K), len(points))


def naive_greedy_select(points: PointSet, K: int, cost_aware: bool = False, no_overlap: bool = False) -> Summary:
    """Plain greedy: re-evaluate every candidate in every round."""
    k = _check_k(points, K)
    g = _Greedy(points, cost_aware, no_overlap)
    for _ in range(k):
        best = None
        for p in range(len(points)):
            if not g.eligible(p):
                continue
            gain = g.gain(p)
            cand = (g.key(g.rank(gain, p), p), p, gain)
            if best is None or cand[0] < best[0]:
                best = cand
        if best is None:
            break
        g.take(best[1], best[2])
    return g.summary(K, "naive")


def lazy_greedy_select(points: PointSet, K: int, cost_aware: bool = False, no_overlap: bool = False) -> Summary:
    """Greedy with lazy (CELF) evaluation.

    Marginal gains only shrink as medoids are added, so a stale gain is an
    upper bound. Candidates sit in a priority queue keyed by their last
    known gain; only the top is re-evaluated, and it is taken once its
    gain is current for this round. Picks match ``naive_greedy_select``.
    """
    k = _check_k(points, K)
    g = _Greedy(points, cost_aware, no_overlap)
    heap = []
    for p in range(len(points)):
        gain = g.gain(p)
        heap.append((g.key(g.rank(gain, p), p), p, gain, 0))
    heapq.heapify(heap)

    rnd = 0
    while len(g.chosen) < k and heap:
        key, p, gain, stamp = heapq.heappop(heap)
        if not g.eligible(p):
            continue
        if stamp == rnd:
            g.take(p, gain)
            rnd += 1
            continue
        gain = g.gain(p)
        heapq.heappush(heap, (g.key(g.rank(gain, p), p), p, gain, rnd))
    return g.summary(K, "lazy")


def exhaustive_select(points: PointSet, K: int) -> Summary:
    """True minimiser of F over all K-subsets; ties go to the lexicographically first."""
    k = _check_k(points, K)
    D = _Distances(points.X)._block(0, len(points))
    order = np.argsort(points.indices, kind="stable")
    best_val, best = None, None
    for combo in itertools.combinations(order.tolist(), k):
        val = float(D[:, list(combo)].min(axis=1).sum())
        if best_val is None or val < best_val:
            best_val, best = val, combo
    sel = points.time_order(best)
    return Summary(sel, K, objective(points, sel), algorithm="exhaustive", order=[int(points.indices[p]) for p in best])


def uniform_indices(L: int, K: int) -> list[int]:
    """Evenly spaced positions round(j (L-1)/(K-1)), halves rounded up."""
    K = min(K, L)
    if K == 1:
        return [L // 2]
    return [int(math.floor(j * (L - 1) / (K - 1) + 0.5)) for j in range(K)]


def uniform_baseline(points: PointSet, K: int) -> Summary:
    k = _check_k(points, K)
    by_time = sorted(range(len(points)), key=lambda p: (points.starts[p], points.indices[p]))
    chosen = [by_time[i] for i in uniform_indices(len(points), k)]
    sel = points.time_order(chosen)
    return Summary(sel, K, objective(points, sel), algorithm="uniform", order=sel)


def merge_intervals(intervals) -> list[tuple[float, float]]:
    """Union of half-open intervals, sorted and with touching pieces joined."""
    merged = []
    for s, e in sorted((float(s), float(e)) for s, e in intervals):
        if merged and s <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], e))
        else:
            merged.append((s, e))
    return merged


def render_timeline(summary: Summary, segments) -> list[tuple[float, float]]:
    by_index = {s.index: s for s in segments}
    timeline = merge_intervals((by_index[i].start_s, by_index[i].end_s) for i in summary.selected)
    summary.merged_timeline = timeline
    return timeline


ALGORITHMS = {
    "lazy": lazy_greedy_select,
    "naive": naive_greedy_select,
    "exhaustive": exhaustive_select,
    "uniform": uniform_baseline,
}


def summarize(points: PointSet, K: int, algorithm: str = "lazy", cost_aware: bool = False,
              no_overlap: bool = False, segments=None) -> Summary:
    """Run one selection algorithm and, given segments, fill in the merged timeline."""
    if algorithm in ("lazy", "naive"):
        summary = ALGORITHMS[algorithm](points, K, cost_aware=cost_aware, no_overlap=no_overlap)
    elif algorithm in ALGORITHMS:
        summary = ALGORITHMS[algorithm](points, K)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if segments is not None:
        render_timeline(summary, segments)
    return summary
