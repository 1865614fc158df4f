"""Bias-agnostic adaptive estimators.

Every estimator here consumes only realized local estimates, sample sizes,
the noise scale, and tuning constants — never the true parameters or bias
bounds.  Every output is a convex combination of the supplied local-estimate
vectors, asserted at the point of combination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .oracle import SubsetMask

__all__ = [
    "ConfidenceBall",
    "TargetSplit",
    "CandidateFamily",
    "ClusterAssignment",
    "EliminationParams",
    "naive",
    "two_source_structured",
    "model_selection",
    "full_subset_family",
    "prefix_family",
    "intersection_estimator",
    "default_delta_intersection",
    "elimination_estimator",
    "two_cluster_adaptive",
    "sample_split_clustering",
    "practical_clustering_estimator",
]


def _combine(points, weights):
    """Convex combination with the simplex constraint asserted."""
    w = np.asarray(weights, dtype=float)
    assert np.all(w >= -1e-12), "negative combination weight"
    assert abs(w.sum() - 1.0) <= 1e-9, "combination weights do not sum to 1"
    return w @ np.asarray(points, dtype=float)


@dataclass(frozen=True, eq=False)
class ConfidenceBall:
    """Euclidean ball ``{theta : ||theta - center|| <= radius}``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, point, tol=0.0):
        return np.linalg.norm(point - self.center) <= self.radius + tol

    def intersects(self, other):
        """Exact pairwise test: center distance at most the radius sum."""
        gap = np.linalg.norm(self.center - other.center)
        return gap <= self.radius + other.radius


@dataclass(frozen=True, eq=False)
class TargetSplit:
    """Two independent target estimates with their effective sizes.

    ``part1`` validates, ``part2`` enters the candidates.  In the
    no-splitting practical mode both parts are the full target estimate and
    each effective size is half the target sample size.
    """

    part1: np.ndarray
    part2: np.ndarray
    size1: float
    size2: float

    def __post_init__(self):
        p1 = np.atleast_1d(np.asarray(self.part1, dtype=float))
        p2 = np.atleast_1d(np.asarray(self.part2, dtype=float))
        if p1.shape != p2.shape:
            raise ValueError("target halves must share a shape")
        if not (self.size1 > 0 and self.size2 > 0):
            raise ValueError("effective sizes must be positive")
        object.__setattr__(self, "part1", p1)
        object.__setattr__(self, "part2", p2)
        object.__setattr__(self, "size1", float(self.size1))
        object.__setattr__(self, "size2", float(self.size2))

    @classmethod
    def from_splits(cls, splits):
        return cls(
            splits.target_parts[0], splits.target_parts[1],
            splits.target_size, splits.target_size,
        )

    @classmethod
    def practical(cls, estimates, sizes):
        half = sizes.n0 / 2
        t0 = estimates.theta_tilde[0]
        return cls(t0, t0, half, half)


@dataclass(frozen=True, eq=False)
class CandidateFamily:
    """Ordered family of source subsets (target excluded; added internally)."""

    subsets: tuple

    def __post_init__(self):
        subsets = tuple(frozenset(int(k) for k in s) for s in self.subsets)
        if not subsets:
            raise ValueError("candidate family must be nonempty")
        for s in subsets:
            if 0 in s or any(k < 1 for k in s):
                raise ValueError("subsets index sources only (1..m)")
        object.__setattr__(self, "subsets", subsets)
        object.__setattr__(self, "_indicator_cache", {})

    def __len__(self):
        return len(self.subsets)

    def indicator(self, m):
        """(M, m) 0/1 matrix with row j marking subset j's sources."""
        cached = self._indicator_cache.get(m)
        if cached is not None:
            return cached
        mat = np.zeros((len(self.subsets), m))
        for j, s in enumerate(self.subsets):
            for k in s:
                if k > m:
                    raise ValueError(f"subset references source {k} > m = {m}")
                mat[j, k - 1] = 1.0
        self._indicator_cache[m] = mat
        return mat


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    """Two-group source labels with the projection that produced them."""

    labels: np.ndarray
    centers_1d: tuple
    direction: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        if labels.size and (labels.min() < 1 or labels.max() > 2):
            raise ValueError("labels must be in {1, 2}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "centers_1d", tuple(float(c) for c in self.centers_1d))
        object.__setattr__(
            self, "direction", np.atleast_1d(np.asarray(self.direction, float))
        )

    def group(self, label):
        return np.flatnonzero(self.labels == label)


@dataclass(frozen=True, eq=False)
class EliminationParams:
    """Tuning for distance-based source elimination."""

    tau: float
    alpha: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.tau > 0:
            raise ValueError("tau must be positive")


def naive(estimates):
    """The target-only estimate, ignoring every source."""
    return estimates.theta_tilde[0].copy()


def two_source_structured(estimates, sizes, tau, delta=None):
    """Ordered-bias estimator for exactly two sources.

    Each source is first screened: the pooled estimate
    ``(n0 t0 + n_k t_k) / (n0 + n_k)`` is kept only when its confidence ball
    meets the target's ball (both at level ``delta``); otherwise the target
    estimate stands in.  The source whose estimate sits closer to the target
    wins, with the comparison shifted by ``tau^2 log(1/delta) / n0`` in favor
    of the first source.  Default ``delta``: ``min(n1, n2)^-2``.
    """
    if estimates.m != 2:
        raise ValueError("this estimator requires exactly two sources")
    if delta is None:
        delta = float(min(sizes.n[0], sizes.n[1])) ** -2
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    tt = estimates.theta_tilde
    d = estimates.d
    n0 = float(sizes.n0)
    width = math.sqrt(d) + math.sqrt(math.log(1.0 / delta))
    ball0 = ConfidenceBall(tt[0], tau / math.sqrt(n0) * width)
    checked = []
    for k in (1, 2):
        nk = float(sizes.n[k - 1])
        pooled = _combine(tt[[0, k]], [n0 / (n0 + nk), nk / (n0 + nk)])
        ball = ConfidenceBall(pooled, tau / math.sqrt(n0 + nk) * width)
        checked.append(pooled if ball0.intersects(ball) else tt[0])
    gap = (
        float(((tt[1] - tt[0]) ** 2).sum()) - float(((tt[2] - tt[0]) ** 2).sum())
    )
    if gap <= tau * tau * math.log(1.0 / delta) / n0:
        return checked[0]
    return checked[1]


def model_selection(estimates, sizes, family, split):
    """Pick the pooled candidate closest to the held-out target estimate.

    Candidate ``j`` pools subset ``S_j`` with the construction half of the
    target, ``xi_j = (sum_{k in S_j} n_k t_k + size2 * part2) / N_j`` with
    ``N_j = sum_{k in S_j} n_k + size2``; the winner minimizes
    ``||xi_j - part1||^2`` (ties to the smallest index).
    """
    m = estimates.m
    ind = family.indicator(m)
    n_src = np.asarray(sizes.n, dtype=float)
    src = estimates.theta_tilde[1:]
    pooled_sums = ind @ (n_src[:, None] * src)
    sizes_j = ind @ n_src + split.size2
    xi = (pooled_sums + split.size2 * split.part2) / sizes_j[:, None]
    errs = ((xi - split.part1) ** 2).sum(axis=1)
    jhat = int(np.argmin(errs))
    # Re-derive the winner through the guarded combination (target part2
    # plus the subset sources).
    s = family.subsets[jhat]
    rows = np.vstack([split.part2, src[[k - 1 for k in sorted(s)]]])
    weights = np.concatenate(
        ([split.size2], n_src[[k - 1 for k in sorted(s)]])
    )
    return _combine(rows, weights / weights.sum())


def full_subset_family(m):
    """All ``2^m`` source subsets, in integer-bitmask order."""
    if m > 20:
        raise ValueError("full enumeration is guarded at m <= 20")
    subsets = []
    for mask in range(1 << m):
        subsets.append(frozenset(k + 1 for k in range(m) if mask >> k & 1))
    return CandidateFamily(tuple(subsets))


def prefix_family(m):
    """The m+1 nested prefixes (empty set first)."""
    return CandidateFamily(tuple(frozenset(range(1, r + 1)) for r in range(m + 1)))


def default_delta_intersection(sizes, d, tau):
    """Default confidence level ``d tau^2 / N_total``, clamped to [1e-12, 0.5]."""
    return float(min(0.5, max(1e-12, d * tau * tau / sizes.n_total)))


def _pocs_feasible(centers, radii, tol, max_cycles=10_000):
    """Alternating projections onto balls; True iff a common point is found."""
    x = centers.mean(axis=0)
    for _ in range(max_cycles):
        worst = 0.0
        for c, r in zip(centers, radii):
            gap = np.linalg.norm(x - c)
            if gap > r:
                x = c + (x - c) * (r / gap)
        for c, r in zip(centers, radii):
            worst = max(worst, np.linalg.norm(x - c) - r)
        if worst <= tol:
            return True
    return False


def intersection_estimator(estimates, sizes, tau, delta, feasibility="pairwise"):
    """Ordered-bias estimator: deepest prefix whose confidence balls meet.

    The caller must supply sources already ordered by nondecreasing bias.
    Prefix ``r`` pools domains 0..r with sample-size weights and gets a ball
    of radius ``2 rho_r`` around it, where
    ``rho_r = tau / sqrt(N_r) (sqrt(d) + sqrt(log((m+1)/delta)))``.  The
    returned index ``t_hat`` is the largest ``t`` such that balls 0..t have a
    common point, found by scanning upward and stopping at the first failure
    (the criterion is monotone in ``t``).

    ``feasibility="pairwise"`` (default) declares the balls intersecting when
    every pair of centers is within the sum of the paired radii;
    ``"exact"`` certifies a common point by alternating projections.

    Returns ``(estimate, t_hat)``.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    if feasibility not in ("pairwise", "exact"):
        raise ValueError("feasibility must be 'pairwise' or 'exact'")
    tt = estimates.theta_tilde
    m = estimates.m
    d = estimates.d
    all_sizes = sizes.all_sizes()
    cum = np.cumsum(all_sizes)
    prefixes = np.cumsum(all_sizes[:, None] * tt, axis=0) / cum[:, None]
    width = math.sqrt(d) + math.sqrt(math.log((m + 1) / delta))
    rho = tau / np.sqrt(cum) * width
    t_hat = 0
    for cand in range(1, m + 1):
        if feasibility == "pairwise":
            gaps = np.linalg.norm(prefixes[:cand] - prefixes[cand], axis=1)
            ok = bool(np.all(gaps <= 2.0 * rho[:cand] + 2.0 * rho[cand]))
        else:
            radii = 2.0 * rho[: cand + 1]
            ok = _pocs_feasible(
                prefixes[: cand + 1], radii, tol=1e-9 * radii.max()
            )
        if not ok:
            break
        t_hat = cand
    weights = all_sizes[: t_hat + 1] / cum[t_hat]
    return _combine(tt[: t_hat + 1], weights), t_hat


def elimination_estimator(estimates, sizes, d, params):
    """Discard far sources, pool the rest.

    Source ``k`` survives when
    ``||t_k - t_0|| <= tau sqrt(d alpha log(n0 v n_k) / (n0 ^ n_k))``; the
    estimate is the sample-size-weighted average over the survivors plus the
    target.  Returns ``(estimate, survivor_mask)``.
    """
    tt = estimates.theta_tilde
    n0 = float(sizes.n0)
    keep = [0]
    for k in range(1, estimates.m + 1):
        nk = float(sizes.n[k - 1])
        thr = params.tau * math.sqrt(
            d * params.alpha * math.log(max(n0, nk)) / min(n0, nk)
        )
        if np.linalg.norm(tt[k] - tt[0]) <= thr:
            keep.append(k)
    mask = SubsetMask(frozenset(keep))
    all_sizes = sizes.all_sizes()
    idx = np.array(mask.sorted_members, dtype=int)
    w = all_sizes[idx]
    return _combine(tt[idx], w / w.sum()), mask


def sample_split_clustering(first_half, second_half):
    """Split the sources into two groups along the top covariance direction.

    The mean, covariance, leading eigenvector, and the two 1-D cluster
    centers all come from the first half; the returned labels classify the
    *second* half's projections by nearest center (ties to the lower
    center).  A degenerate (zero-variance) first half projects onto the
    first coordinate axis and labels everything 1.
    """
    first = np.atleast_2d(np.asarray(first_half, dtype=float))
    second = np.atleast_2d(np.asarray(second_half, dtype=float))
    if first.shape != second.shape:
        raise ValueError("the two halves must share a shape")
    m = first.shape[0]
    if m < 2:
        raise ValueError("need at least two sources to cluster")
    mean = first.mean(axis=0)
    centered = first - mean
    cov = centered.T @ centered / m
    direction = numerics.top_eigenvectors(cov, 1)[:, 0]
    (c1, c2), _ = numerics.kmeans_1d_two(centered @ direction)
    proj = (second - mean) @ direction
    labels = np.where(np.abs(proj - c1) <= np.abs(proj - c2), 1, 2)
    return ClusterAssignment(labels, (c1, c2), direction)


def two_cluster_adaptive(splits, sizes=None, tau=None, return_detail=False):
    """Two-cluster adaptive estimator on sample-split estimates.

    Clusters the sources using their first two split parts, then builds three
    candidates from held-out data: the first target half alone, and the first
    target half unweighted-averaged with each group's third parts.  The
    candidate closest to the second target half wins (ties to the smaller
    index).  ``sizes``/``tau`` are accepted for signature uniformity; the
    construction uses neither.
    """
    if splits.m < 2:
        raise ValueError("need at least two sources")
    assignment = sample_split_clustering(
        splits.source_parts[:, 0], splits.source_parts[:, 1]
    )
    t1, t2 = splits.target_parts
    third = splits.source_parts[:, 2]
    candidates = [t1]
    for label in (1, 2):
        idx = assignment.group(label)
        rows = np.vstack([t1, third[idx]])
        candidates.append(_combine(rows, np.full(len(rows), 1.0 / len(rows))))
    errs = [float(((t2 - c) ** 2).sum()) for c in candidates]
    pick = int(np.argmin(errs))
    if return_detail:
        return candidates[pick].copy(), {"pick": pick, "assignment": assignment}
    return candidates[pick].copy()


def practical_clustering_estimator(estimates, sizes, d, k_clusters, c_thresh,
                                   seed=None, return_detail=False):
    """Spectral-projection k-means estimator without sample splitting.

    Projects the sources onto the ``min(d, max(k-1, 1))`` leading
    eigenvectors of their size-weighted covariance, k-means-clusters the
    projections, and pools the target with every cluster whose squared
    distance to the target estimate is within ``lambda_j =
    c_thresh * max(d / min(N_j, N_j0), 1 / n0)`` of the closest cluster's.
    The estimate is the sample-size-weighted average over the pooled domains.
    """
    from . import _rng

    m = estimates.m
    if not 1 <= k_clusters <= m:
        raise ValueError(f"number of clusters must be in [1, {m}]")
    if seed is None:
        seed = (
            _rng.derive_seed(*estimates.provenance, _rng.KMEANS_STREAM)
            if estimates.provenance
            else 0
        )
    tt = estimates.theta_tilde
    src = tt[1:]
    n_src = np.asarray(sizes.n, dtype=float)
    a = min(d, max(k_clusters - 1, 1))
    _, cov = numerics.weighted_mean_cov(src, n_src)
    basis = numerics.top_eigenvectors(cov, a)
    _, labels = numerics.kmeans_lloyd(src @ basis, k_clusters, seed)
    pooled_n = np.zeros(k_clusters)
    mu = np.zeros((k_clusters, tt.shape[1]))
    for j in range(1, k_clusters + 1):
        idx = np.flatnonzero(labels == j)
        pooled_n[j - 1] = n_src[idx].sum()
        mu[j - 1] = (n_src[idx] @ src[idx]) / pooled_n[j - 1]
    dist2 = ((mu - tt[0]) ** 2).sum(axis=1)
    j0 = int(np.argmin(dist2))
    included = [j0]
    for j in range(k_clusters):
        if j == j0:
            continue
        lam = c_thresh * max(
            d / min(pooled_n[j], pooled_n[j0]), 1.0 / sizes.n0
        )
        if dist2[j] - dist2[j0] <= lam:
            included.append(j)
    rows = [0]
    for j in included:
        rows.extend((np.flatnonzero(labels == j + 1) + 1).tolist())
    rows = sorted(rows)
    all_sizes = sizes.all_sizes()
    w = all_sizes[rows]
    estimate = _combine(tt[rows], w / w.sum())
    if return_detail:
        return estimate, {
            "labels": labels,
            "included_clusters": sorted(j + 1 for j in included),
            "pooled_indices": rows,
        }
    return estimate