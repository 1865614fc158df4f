"""Oracle pooling rate, oracle estimator, and optimal-subset diagnostics.

The oracle knows the true bias bounds.  Over subsets ``S`` of domains that
contain the target, pooling at ``S`` pays variance ``d tau^2 / N_S`` and
squared bias at most ``h_S^2 = (max_{k in S} h_k)^2`` (``h_0 := 0``); the
oracle rate is the minimum of the sum of the two terms, and the oracle
estimator is the sample-size-weighted average over the minimizing subset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import BiasConfiguration

__all__ = [
    "SubsetMask",
    "OracleRateResult",
    "oracle_rate",
    "oracle_estimate",
    "check_optimal_subset",
    "figure_oracle_cluster",
    "figure_oracle_separation1",
]


@dataclass(frozen=True, eq=False)
class SubsetMask:
    """A pooling subset of domain indices; always contains the target (0)."""

    members: frozenset

    def __post_init__(self):
        members = frozenset(int(k) for k in self.members)
        if 0 not in members:
            raise ValueError("a pooling subset must contain the target index 0")
        if any(k < 0 for k in members):
            raise ValueError("domain indices must be nonnegative")
        object.__setattr__(self, "members", members)

    @property
    def sorted_members(self):
        return tuple(sorted(self.members))

    def bias_bound(self, h):
        """``h_S = max_{k in S} h_k`` with ``h_0 := 0``."""
        hvec = h.h if isinstance(h, BiasConfiguration) else np.asarray(h, float)
        return max((float(hvec[k - 1]) for k in self.members if k), default=0.0)

    def pooled_size(self, sizes):
        """``N_S = sum_{k in S} n_k``."""
        return float(
            sizes.n0 + sum(int(sizes.n[k - 1]) for k in self.members if k)
        )


@dataclass(frozen=True, eq=False)
class OracleRateResult:
    """Minimized rate, its subset, and (optionally) the evaluated candidates."""

    rate: float
    argmin_set: SubsetMask
    per_set_breakdown: tuple | None = None


def _as_h_vector(h):
    if isinstance(h, BiasConfiguration):
        return np.asarray(h.h, dtype=float)
    return np.atleast_1d(np.asarray(h, dtype=float))


def oracle_rate(h, sizes, d, tau, breakdown=False):
    """Exact minimizer of ``d tau^2 / N_S + h_S^2`` over subsets containing 0.

    Only level sets ``{k : h_k <= threshold}`` can be optimal (adding any
    source whose bound does not exceed the current maximum strictly decreases
    the objective), so the m+1 prefixes of the bias-sorted source order are
    evaluated in O(m log m).  Ties break to the smallest cardinality and then
    lexicographically smallest member tuple, which the sorted-prefix scan with
    strict improvement realizes.
    """
    hvec = _as_h_vector(h)
    m = hvec.size
    if m != sizes.m:
        raise ValueError("bias vector and source sizes disagree on m")
    dt2 = d * tau * tau
    order = np.lexsort((np.arange(m), hvec))  # by h_k, ties by index
    pool = float(sizes.n0)
    best_rate = dt2 / pool
    best_len = 0
    rows = [(SubsetMask(frozenset({0})), dt2 / pool, 0.0)] if breakdown else None
    n_src = np.asarray(sizes.n, dtype=float)
    for r in range(1, m + 1):
        k = order[r - 1]
        pool += n_src[k]
        hs = float(hvec[k])
        rate = dt2 / pool + hs * hs
        if breakdown:
            rows.append(
                (
                    SubsetMask(frozenset([0] + [int(j) + 1 for j in order[:r]])),
                    dt2 / pool,
                    hs * hs,
                )
            )
        if rate < best_rate:
            best_rate = rate
            best_len = r
    members = frozenset([0] + [int(j) + 1 for j in order[:best_len]])
    return OracleRateResult(
        float(best_rate),
        SubsetMask(members),
        tuple(rows) if breakdown else None,
    )


def oracle_estimate(estimates, argmin_set, sizes):
    """Sample-size-weighted average of the local estimates over a subset."""
    members = argmin_set.sorted_members
    if members[-1] > sizes.m:
        raise ValueError("subset references a source index beyond m")
    all_sizes = sizes.all_sizes()
    idx = np.array(members, dtype=int)
    w = all_sizes[idx]
    return (w @ estimates.theta_tilde[idx]) / w.sum()


def check_optimal_subset(candidate, h, sizes, d, tau):
    """Test whether ``candidate`` is the canonical optimal pooling subset.

    Returns ``(ok, diagnostics)``.  The three clauses, checked in order:

    (a) the candidate is exactly the level set ``{k : h_k <= h*}`` for its own
        bias ceiling ``h* = max_{k in candidate} h_k``;
    (b) ``(h*)^2 <= d tau^2 / sum_{k : h_k < h*} n_k`` (the target counts,
        with ``h_0 := 0``; an empty sum makes the clause vacuous);
    (c) every excluded source satisfies
        ``h_k > max(h*, tau sqrt(d / N_candidate))``.

    When multiple subsets minimize ``max(h_S^2, d tau^2 / N_S)``, exactly the
    union of all minimizers (the maximal one, always a level set) passes.
    """
    hvec = _as_h_vector(h)
    m = hvec.size
    if m != sizes.m:
        raise ValueError("bias vector and source sizes disagree on m")
    members = candidate.members
    if members and max(members) > m:
        raise ValueError("candidate references a source index beyond m")
    dt2 = d * tau * tau
    hstar = candidate.bias_bound(hvec)
    level = frozenset({0} | {k + 1 for k in range(m) if hvec[k] <= hstar})
    if members != level:
        missing = sorted(level - members)
        extra = sorted(members - level)
        return False, (
            "clause (a): candidate is not the level set at its own ceiling "
            f"h*={hstar:.6g} (missing {missing}, extra {extra})"
        )
    below = float(sizes.n0) if hstar > 0 else 0.0
    below += float(np.asarray(sizes.n, float)[hvec < hstar].sum())
    if below > 0 and hstar * hstar > dt2 / below:
        return False, (
            f"clause (b): (h*)^2 = {hstar * hstar:.6g} exceeds "
            f"d tau^2 / {below:.6g} = {dt2 / below:.6g}"
        )
    n_cand = candidate.pooled_size(sizes)
    floor = max(hstar, tau * math.sqrt(d / n_cand))
    outside = [k + 1 for k in range(m) if (k + 1) not in members]
    for k in outside:
        if not hvec[k - 1] > floor:
            return False, (
                f"clause (c): excluded source {k} has h={hvec[k - 1]:.6g} "
                f"<= max(h*, tau sqrt(d/N)) = {floor:.6g}"
            )
    return True, "optimal level set"


def figure_oracle_cluster(estimates, instance, delta, m):
    """Two-candidate oracle for the cluster configuration.

    Compares the closed-form MSEs of pooling everything,
    ``(d delta^2 / n) ((m - floor(m/2)) / (m+1))^2 + d / (n (m+1))``,
    against pooling the unbiased half, ``d / (n (floor(m/2)+1))``, and
    averages over the winning subset.
    """
    if instance.meta.get("kind") != "cluster":
        raise ValueError("expected an instance from make_cluster_config")
    if m != instance.m:
        raise ValueError("m disagrees with the instance")
    n = int(instance.sizes.n[0])
    d = instance.d
    half = m // 2
    frac = (m - half) / (m + 1)
    all_mse = (d * delta * delta / n) * frac * frac + d / (n * (m + 1))
    half_mse = d / (n * (half + 1))
    tt = estimates.theta_tilde
    if all_mse <= half_mse:
        return tt.mean(axis=0)
    return tt[: half + 1].mean(axis=0)


def figure_oracle_separation1(estimates, instance, h_values):
    """Best-prefix oracle for the ordered-bias separation configuration.

    Sorts sources by their true biases and returns the prefix average (target
    included) of the length minimizing
    ``(sum_{j<=k} h_(j) / (k+1))^2 + d / ((k+1) n)``; ties take the shortest
    prefix.
    """
    if instance.meta.get("kind") != "separation1":
        raise ValueError("expected an instance from make_separation1_config")
    h = np.asarray(h_values, dtype=float)
    if h.shape != (instance.m,):
        raise ValueError("h_values must give one bias per source")
    n = int(instance.sizes.n[0])
    d = instance.d
    order = np.argsort(h, kind="stable")
    hs = h[order]
    counts = np.arange(1, instance.m + 2, dtype=float)  # prefix sizes k+1
    bias = np.concatenate(([0.0], np.cumsum(hs))) / counts
    objective = bias * bias + d / (counts * n)
    k0 = int(np.argmin(objective))
    tt = estimates.theta_tilde
    rows = np.concatenate(([0], order[:k0] + 1))
    return tt[rows].mean(axis=0)
