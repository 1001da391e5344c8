"""Entropy numbers of finite point clouds.

``eps_n(K)`` is the smallest radius at which ``2^n`` balls cover ``K``.  For a
finite cloud we compute it with centers restricted to the cloud itself
(exactly, for small clouds) or by farthest-point traversal.  Restricting the
centers to the cloud can at most double the radius.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .network import InputError

EXACT_MAX_POINTS = 64
EXACT_MAX_CENTERS = 16
ENUMERATION_LIMIT = 100_000


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    metric: str = "sup"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InputError("a point cloud needs at least one point")
        if self.metric not in ("sup", "euclidean"):
            raise InputError(f"unknown metric {self.metric!r}")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def distances(self) -> np.ndarray:
        diff = self.points[:, None, :] - self.points[None, :, :]
        if self.metric == "sup":
            return np.max(np.abs(diff), axis=-1)
        return np.sqrt(np.sum(diff * diff, axis=-1))

    def scaled(self, factor: float) -> "PointCloud":
        return PointCloud(self.points * factor, self.metric)

    @classmethod
    def from_csv(cls, path: str | Path, metric: str = "sup") -> "PointCloud":
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row and not row[0].lstrip().startswith("#")]
        try:
            data = [[float(v) for v in row] for row in rows]
        except ValueError:
            data = [[float(v) for v in row] for row in rows[1:]]  # header row
        return cls(np.array(data), metric)


@dataclass
class CoveringResult:
    n: int
    radius: float
    centers: list[int]
    mode: str
    assignment: list[int] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"n": self.n, "radius": self.radius, "centers": self.centers, "mode": self.mode}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def covering_radius(cloud: PointCloud, centers) -> float:
    """Max distance from a cloud point to its nearest center (centers given as indices)."""
    D = cloud.distances()[:, list(centers)]
    return float(np.max(np.min(D, axis=1)))


def interval_entropy(a: float, b: float, n: int) -> float:
    """Entropy number of the segment [a, b] in R with arbitrary centers: (b - a) / 2^(n+1)."""
    if b < a:
        raise InputError("interval needs b >= a")
    if n < 0:
        raise InputError("n must be >= 0")
    return (b - a) * 2.0 ** (-(n + 1))


# -- exact set-center covering ------------------------------------------------


def _can_cover(masks: list[int], full: int, k: int) -> list[int] | None:
    """Pick at most k of the sets (bitmasks over points) whose union is ``full``.

    Branches on the lowest-index uncovered point, trying its covering centers
    in index order, so the first solution found is the lexicographically
    smallest in that branching order.
    """
    N = len(masks)
    # for each point, the centers that cover it
    coverers = [[c for c in range(N) if masks[c] >> p & 1] for p in range(N)]
    best_cover = max(bin(m).count("1") for m in masks)
    chosen: list[int] = []

    def search(covered: int, left: int) -> bool:
        if covered == full:
            return True
        if left == 0:
            return False
        missing = bin(full & ~covered).count("1")
        if missing > left * best_cover:
            return False
        uncovered = full & ~covered
        p = (uncovered & -uncovered).bit_length() - 1
        for c in coverers[p]:
            chosen.append(c)
            if search(covered | masks[c], left - 1):
                return True
            chosen.pop()
        return False

    return list(chosen) if search(0, k) else None


def exact_entropy(cloud: PointCloud, n: int) -> CoveringResult:
    """Minimal radius at which 2^n balls centered at cloud points cover the cloud."""
    if n < 0:
        raise InputError("n must be >= 0")
    N = len(cloud)
    k = 2**n
    if N > EXACT_MAX_POINTS or k > EXACT_MAX_CENTERS:
        raise InputError(
            f"exact covering limited to {EXACT_MAX_POINTS} points and {EXACT_MAX_CENTERS} centers "
            f"(got {N} points, 2^{n} centers); use greedy_entropy"
        )
    D = cloud.distances()
    full = (1 << N) - 1
    candidates = np.unique(D)

    def masks_at(r):
        return [sum(1 << p for p in range(N) if D[c, p] <= r) for c in range(N)]

    # the largest pairwise distance always admits a single center
    lo, hi = 0, len(candidates) - 1
    best = _can_cover(masks_at(candidates[hi]), full, k)
    while lo < hi:
        mid = (lo + hi) // 2
        sol = _can_cover(masks_at(candidates[mid]), full, k)
        if sol is not None:
            hi, best = mid, sol
        else:
            lo = mid + 1
    centers = sorted(best)
    assignment = [int(i) for i in np.argmin(D[:, centers], axis=1)]
    return CoveringResult(n, float(candidates[lo]), centers, "exact-set-centers", assignment)


def greedy_entropy(cloud: PointCloud, n: int) -> CoveringResult:
    """Farthest-point traversal with up to 2^n centers, starting from point 0."""
    if n < 0:
        raise InputError("n must be >= 0")
    D = cloud.distances()
    N = len(cloud)
    k = min(2**n, N)
    centers = [0]
    nearest = D[0].copy()
    while len(centers) < k:
        nxt = int(np.argmax(nearest))  # argmax returns the lowest index on ties
        if nearest[nxt] == 0:
            break
        centers.append(nxt)
        nearest = np.minimum(nearest, D[nxt])
    assignment = [int(i) for i in np.argmin(D[:, centers], axis=1)]
    return CoveringResult(n, float(np.max(nearest)), centers, "greedy", assignment)


def entropy_curve(cloud: PointCloud, n_max: int) -> list[CoveringResult]:
    """``eps_0 .. eps_{n_max}``: exact where the budget allows, greedy otherwise.

    A greedy entry is never allowed to exceed its predecessor: a covering with
    2^n centers is also a covering with 2^(n+1), so the earlier one is kept.
    """
    curve: list[CoveringResult] = []
    exact_ok = len(cloud) <= EXACT_MAX_POINTS
    for n in range(n_max + 1):
        if 2**n >= len(cloud):
            every = list(range(len(cloud)))
            res = CoveringResult(n, 0.0, every, "exact-set-centers", every)
        elif exact_ok and 2**n <= EXACT_MAX_CENTERS:
            res = exact_entropy(cloud, n)
        else:
            res = greedy_entropy(cloud, n)
        if curve and res.radius > curve[-1].radius:
            prev = curve[-1]
            res = CoveringResult(n, prev.radius, prev.centers, prev.mode, prev.assignment)
        curve.append(res)
    return curve


# -- function-class surrogates ------------------------------------------------


@dataclass(frozen=True)
class FunctionClassSpec:
    """M-Lipschitz functions on [0, 1] bounded by B, sampled at m points, values in q*Z."""

    M: float
    B: float
    m: int
    q: float
    kind: str = "lipschitz-ball"

    def __post_init__(self):
        if self.M < 0 or self.B <= 0 or self.q <= 0:
            raise InputError("need M >= 0, B > 0 and q > 0")
        if self.m < 2:
            raise InputError("need at least m = 2 sample points")


def _levels(spec: FunctionClassSpec) -> np.ndarray:
    top = math.floor(spec.B / spec.q + 1e-9)
    return np.arange(-top, top + 1) * spec.q


def lipschitz_ball_size(spec: FunctionClassSpec) -> int:
    """Number of sequences :func:`discretize_lipschitz_ball` would enumerate."""
    levels = _levels(spec)
    step = spec.M / (spec.m - 1)
    allowed = np.abs(levels[:, None] - levels[None, :]) <= step + 1e-12 * max(1.0, step)
    counts = [1] * len(levels)
    for _ in range(spec.m - 1):
        counts = [sum(c for c, ok in zip(counts, allowed[:, j]) if ok) for j in range(len(levels))]
    return int(sum(counts))


def discretize_lipschitz_ball(spec: FunctionClassSpec) -> PointCloud:
    """All quantized sample vectors of the class, as a sup-norm cloud."""
    count = lipschitz_ball_size(spec)
    if count > ENUMERATION_LIMIT:
        raise InputError(f"enumeration would produce {count} sequences (limit {ENUMERATION_LIMIT})")
    levels = _levels(spec)
    step = spec.M / (spec.m - 1)
    tol = 1e-12 * max(1.0, step)
    nexts = [[j for j in range(len(levels)) if abs(levels[i] - levels[j]) <= step + tol] for i in range(len(levels))]
    seqs = [[i] for i in range(len(levels))]
    for _ in range(spec.m - 1):
        seqs = [s + [j] for s in seqs for j in nexts[s[-1]]]
    return PointCloud(levels[np.array(seqs)], "sup")


__all__ = [
    "PointCloud",
    "CoveringResult",
    "FunctionClassSpec",
    "covering_radius",
    "interval_entropy",
    "exact_entropy",
    "greedy_entropy",
    "entropy_curve",
    "lipschitz_ball_size",
    "discretize_lipschitz_ball",
]
