"""Problem instances, bias configurations, and seeded Gaussian sampling.

A problem is a target parameter vector plus ``m`` source parameter vectors,
per-domain sample sizes, and a noise scale ``tau``.  Local estimates are
drawn as ``theta_k + (tau / sqrt(n_k)) * z`` with standard Gaussian ``z``,
independently across domains and deterministically in ``(seed, replicate)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _rng

__all__ = [
    "BiasConfiguration",
    "SampleSizes",
    "ProblemInstance",
    "LocalEstimates",
    "SplitEstimates",
    "HardInstanceSpec",
    "sample_estimates",
    "sample_split_estimates",
    "reuse_as_splits",
    "make_cluster_config",
    "make_separation1_config",
    "make_separation2_config",
    "make_hard_instance",
]

HARD_KINDS = ("TwoPoint", "RandomSignTwoCluster", "BalancedTwoCluster")


def _frozen(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class BiasConfiguration:
    """Vector of per-source bias bounds ``h`` with ``0 <= h_k <= bound``.

    The canonical class keeps every bound in [0, 1]; passing ``bound=K`` with
    ``K > 1`` relaxes the ceiling for constructions that need larger
    separations.  Out-of-range entries are rejected.
    """

    h: np.ndarray
    bound: float = 1.0

    def __post_init__(self):
        h = _frozen(np.atleast_1d(np.asarray(self.h, dtype=float)))
        if h.ndim != 1:
            raise ValueError("h must be a 1-D vector")
        if not self.bound >= 1.0:
            raise ValueError("bound must be >= 1")
        tol = 1e-12 * max(1.0, self.bound)
        if h.size and (h.min() < -tol or h.max() > self.bound + tol):
            raise ValueError(
                f"bias bounds must lie in [0, {self.bound}]; got range "
                f"[{h.min()}, {h.max()}]"
            )
        object.__setattr__(self, "h", h)

    @property
    def m(self):
        return self.h.size


@dataclass(frozen=True, eq=False)
class SampleSizes:
    """Target size ``n0`` and source sizes ``n`` (all integers >= 1)."""

    n0: int
    n: np.ndarray

    def __post_init__(self):
        n0 = int(self.n0)
        n = _frozen(np.atleast_1d(np.asarray(self.n)), dtype=np.int64)
        if n0 < 1 or (n.size and n.min() < 1):
            raise ValueError("all sample sizes must be >= 1")
        object.__setattr__(self, "n0", n0)
        object.__setattr__(self, "n", n)

    @property
    def m(self):
        return self.n.size

    @property
    def n_total(self):
        return int(self.n0 + self.n.sum())

    def all_sizes(self):
        """All m+1 sizes as a float vector, target first."""
        return np.concatenate(([float(self.n0)], self.n.astype(float)))

    def equal(self):
        """True iff all source sizes coincide."""
        return bool(self.n.size == 0 or np.all(self.n == self.n[0]))


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """True parameters, sizes, and noise scale for one simulation problem.

    ``theta`` stacks the m+1 parameter vectors (target first) as rows.
    ``meta`` carries generator-specific oracle knowledge (nominal biases,
    cluster centers, sampled directions) and is never read by estimators.
    """

    d: int
    tau: float
    theta: np.ndarray
    sizes: SampleSizes
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d = int(self.d)
        tau = float(self.tau)
        theta = _frozen(np.atleast_2d(np.asarray(self.theta, dtype=float)))
        if d < 1:
            raise ValueError("d must be >= 1")
        if tau < 0:
            raise ValueError("tau must be nonnegative")
        if theta.shape != (self.sizes.m + 1, d):
            raise ValueError(
                f"theta must have shape ({self.sizes.m + 1}, {d}), "
                f"got {theta.shape}"
            )
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "theta", theta)
        if d * tau * tau / self.sizes.n0 > 1.0:
            warnings.warn(
                "target-domain quality guardrail violated: "
                f"d*tau^2/n0 = {d * tau * tau / self.sizes.n0:.3g} > 1",
                stacklevel=2,
            )
        self.meta.setdefault("h_induced", self.induced_bias_raw())

    @property
    def m(self):
        return self.sizes.m

    @property
    def theta0(self):
        return self.theta[0]

    def induced_bias_raw(self):
        """Unclamped distances ``||theta_k - theta_0||`` for k = 1..m."""
        return _frozen(np.linalg.norm(self.theta[1:] - self.theta[0], axis=1))

    def induced_bias(self, relax=False):
        """Distances exported as a :class:`BiasConfiguration`.

        With ``relax=False`` values above 1 are clamped to 1 with a warning;
        with ``relax=True`` the configuration's bound is widened to cover the
        largest distance instead.
        """
        raw = self.induced_bias_raw()
        if relax:
            bound = max(1.0, float(raw.max(initial=0.0)))
            return BiasConfiguration(raw, bound=bound)
        if raw.size and raw.max() > 1.0 + 1e-12:
            warnings.warn(
                "induced biases above 1 clamped in exported configuration",
                stacklevel=2,
            )
        return BiasConfiguration(np.minimum(raw, 1.0))


@dataclass(frozen=True, eq=False)
class LocalEstimates:
    """One realized draw of the m+1 local estimators (target first)."""

    theta_tilde: np.ndarray
    provenance: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "theta_tilde", _frozen(np.atleast_2d(self.theta_tilde))
        )
        object.__setattr__(self, "provenance", tuple(self.provenance))

    @property
    def m(self):
        return self.theta_tilde.shape[0] - 1

    @property
    def d(self):
        return self.theta_tilde.shape[1]


@dataclass(frozen=True, eq=False)
class SplitEstimates:
    """Independent sample-split draws: target halves and source thirds.

    ``target_parts`` has shape (2, d) and each half carries effective size
    ``target_size``; ``source_parts`` has shape (m, 3, d) with per-part
    effective sizes ``source_sizes``.
    """

    target_parts: np.ndarray
    source_parts: np.ndarray
    target_size: float
    source_sizes: np.ndarray
    provenance: tuple

    def __post_init__(self):
        object.__setattr__(self, "target_parts", _frozen(self.target_parts))
        object.__setattr__(self, "source_parts", _frozen(self.source_parts))
        object.__setattr__(self, "source_sizes", _frozen(self.source_sizes))
        object.__setattr__(self, "target_size", float(self.target_size))
        object.__setattr__(self, "provenance", tuple(self.provenance))

    @property
    def m(self):
        return self.source_parts.shape[0]


@dataclass(frozen=True, eq=False)
class HardInstanceSpec:
    """Recipe for a worst-case instance family.

    kind is one of ``TwoPoint`` (two collinear sources at g1, g2),
    ``RandomSignTwoCluster`` (sources at ``sign * alpha * v`` for a random
    unit direction v), or ``BalancedTwoCluster`` (two deterministic centers
    with squared separation ``delta_sep``, half the sources at each).  The
    ``hypothesis`` bit selects the target's position where the construction
    has two alternatives (TwoPoint and Balanced).  ``direction``/``signs``
    replay a previously sampled RandomSign draw; when omitted the sampled
    values are recorded in the generated instance's ``meta``.
    """

    kind: str
    g1: float | None = None
    g2: float | None = None
    alpha: float | None = None
    delta_sep: float | None = None
    hypothesis: int = 0
    direction: np.ndarray | None = None
    signs: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in HARD_KINDS:
            raise ValueError(f"kind must be one of {HARD_KINDS}")
        if self.hypothesis not in (0, 1):
            raise ValueError("hypothesis must be 0 or 1")
        if self.kind == "TwoPoint":
            if self.g1 is None or self.g2 is None:
                raise ValueError("TwoPoint needs g1 and g2")
            if not 0 <= self.g1 <= self.g2:
                raise ValueError("need 0 <= g1 <= g2")
        elif self.kind == "RandomSignTwoCluster":
            if self.alpha is None or self.alpha < 0:
                raise ValueError("RandomSignTwoCluster needs alpha >= 0")
        else:
            if self.delta_sep is None or self.delta_sep < 0:
                raise ValueError("BalancedTwoCluster needs delta_sep >= 0")
        if self.direction is not None:
            object.__setattr__(self, "direction", _frozen(self.direction))
        if self.signs is not None:
            object.__setattr__(self, "signs", _frozen(self.signs))


def sample_estimates(instance, seed, replicate=0):
    """Draw the m+1 local estimates for one replicate.

    ``theta_tilde_k = theta_k + (tau / sqrt(n_k)) z_k`` with ``z_k`` standard
    Gaussian, independent across domains; domain ``k`` reads stream
    ``(seed, replicate, k)``, so draws are reproducible in any execution
    order.
    """
    sizes = instance.sizes.all_sizes()
    out = np.empty_like(instance.theta)
    for k in range(instance.m + 1):
        z = _rng.substream(seed, replicate, k).standard_normal(instance.d)
        out[k] = instance.theta[k] + (instance.tau / math.sqrt(sizes[k])) * z
    return LocalEstimates(out, (int(seed), int(replicate)))


def sample_split_estimates(instance, seed, replicate=0, target_parts=2,
                           source_parts=3):
    """Draw independent split estimates at reduced effective sizes.

    Target halves have effective size ``n0 / target_parts`` and source thirds
    ``n_k / source_parts``; noise scales as ``tau / sqrt(n_eff)``, which is
    distributionally identical to splitting the underlying samples.  Part
    ``p`` of domain ``k`` reads stream ``(seed, replicate, k, 1 + p)``.
    """
    d = instance.d
    n0_eff = instance.sizes.n0 / target_parts
    tgt = np.empty((target_parts, d))
    for p in range(target_parts):
        z = _rng.substream(seed, replicate, 0, 1 + p).standard_normal(d)
        tgt[p] = instance.theta[0] + (instance.tau / math.sqrt(n0_eff)) * z
    src_sizes = instance.sizes.n / source_parts
    src = np.empty((instance.m, source_parts, d))
    for k in range(1, instance.m + 1):
        scale = instance.tau / math.sqrt(src_sizes[k - 1])
        for p in range(source_parts):
            z = _rng.substream(seed, replicate, k, 1 + p).standard_normal(d)
            src[k - 1, p] = instance.theta[k] + scale * z
    return SplitEstimates(
        tgt, src, n0_eff, src_sizes, (int(seed), int(replicate))
    )


def reuse_as_splits(estimates, sizes):
    """Reuse one draw in every split role (the no-splitting practical mode).

    Both target halves are the full target estimate (booked at effective size
    ``n0 / 2`` so downstream weighting formulas are unchanged) and all three
    source parts are the full source estimates.
    """
    tt = estimates.theta_tilde
    tgt = np.stack([tt[0], tt[0]])
    src = np.repeat(tt[1:, None, :], 3, axis=1)
    return SplitEstimates(
        tgt, src, sizes.n0 / 2, sizes.n / 3, estimates.provenance
    )


def _base_meta(kind, h_nominal, **extra):
    meta = {"kind": kind, "h_nominal": _frozen(h_nominal)}
    meta.update(extra)
    return meta


def make_cluster_config(d, m, n, delta):
    """Two-cluster configuration: target and first ``floor(m/2)`` sources at
    the origin, the rest shifted by ``delta * sqrt(d/n)`` along e1; all
    domains share size ``n`` and ``tau = 1``."""
    if m < 2:
        raise ValueError("need m >= 2")
    half = m // 2
    shift = float(delta) * math.sqrt(d / n)
    theta = np.zeros((m + 1, d))
    theta[half + 1:, 0] = shift
    h_nom = np.concatenate([np.zeros(half), np.full(m - half, shift)])
    return ProblemInstance(
        d, 1.0, theta, SampleSizes(n, np.full(m, n)),
        _base_meta("cluster", h_nom, delta=float(delta), n_zero=half,
                   mu2_first_coord=shift),
    )


def make_separation1_config(d, m, n, delta, seed):
    """Separation sweep along e1: first ``floor(m/2)`` sources unbiased, the
    rest displaced by ``h_k ~ Uniform(delta sqrt(d/n), 20 delta sqrt(d/n))``."""
    if m < 2:
        raise ValueError("need m >= 2")
    half = m // 2
    lo = float(delta) * math.sqrt(d / n)
    g = _rng.substream(seed, _rng.CONFIG_STREAM)
    hvals = g.uniform(lo, 20.0 * lo, size=m - half) if lo > 0 else np.zeros(m - half)
    theta = np.zeros((m + 1, d))
    theta[half + 1:, 0] = hvals
    h_nom = np.concatenate([np.zeros(half), hvals])
    return ProblemInstance(
        d, 1.0, theta, SampleSizes(n, np.full(m, n)),
        _base_meta("separation1", h_nom, delta=float(delta), n_zero=half),
    )


def make_separation2_config(d, m, n, delta, seed):
    """Separation sweep in random directions: shifted sources sit at
    ``delta sqrt(d/n) u_k`` for independent uniform unit vectors ``u_k``."""
    if m < 2:
        raise ValueError("need m >= 2")
    half = m // 2
    radius = float(delta) * math.sqrt(d / n)
    g = _rng.substream(seed, _rng.CONFIG_STREAM)
    theta = np.zeros((m + 1, d))
    for k in range(half + 1, m + 1):
        z = g.standard_normal(d)
        theta[k] = radius * z / np.linalg.norm(z)
    h_nom = np.concatenate([np.zeros(half), np.full(m - half, radius)])
    return ProblemInstance(
        d, 1.0, theta, SampleSizes(n, np.full(m, n)),
        _base_meta("separation2", h_nom, delta=float(delta), n_zero=half),
    )


def make_hard_instance(spec, base, seed=0):
    """Instantiate a worst-case family member.

    ``base`` is a ``(d, n0, n, m, tau)`` tuple; ``n`` is the shared source
    size.  See :class:`HardInstanceSpec` for the three kinds.
    """
    d, n0, n, m, tau = base
    d, n0, n, m = int(d), int(n0), int(n), int(m)
    tau = float(tau)
    sizes = SampleSizes(n0, np.full(m, n))
    if spec.kind == "TwoPoint":
        if m != 2:
            raise ValueError("TwoPoint requires m = 2")
        cap = tau / (2.0 * math.sqrt(n0))
        if spec.g2 > cap + 1e-12:
            raise ValueError(f"need g1 <= g2 <= tau/(2 sqrt(n0)) = {cap:.6g}")
        theta = np.zeros((3, d))
        theta[1, 0] = spec.g1
        theta[2, 0] = spec.g2
        if spec.hypothesis == 1:
            theta[0, 0] = spec.g1 + spec.g2
        h_nom = np.abs(theta[1:, 0] - theta[0, 0])
        return ProblemInstance(
            d, tau, theta, sizes,
            _base_meta("hard:TwoPoint", h_nom, g1=float(spec.g1),
                       g2=float(spec.g2), hypothesis=spec.hypothesis),
        )
    if spec.kind == "RandomSignTwoCluster":
        g = _rng.substream(seed, _rng.CONFIG_STREAM)
        if spec.direction is not None:
            v = np.asarray(spec.direction, dtype=float)
            if v.shape != (d,):
                raise ValueError("direction must have length d")
        else:
            z = g.standard_normal(d)
            v = z / np.linalg.norm(z)
        if spec.signs is not None:
            signs = np.asarray(spec.signs, dtype=float)
            if signs.shape != (m,) or not np.all(np.abs(signs) == 1):
                raise ValueError("signs must be m values in {-1, +1}")
        else:
            signs = g.choice(np.array([-1.0, 1.0]), size=m)
        theta = np.empty((m + 1, d))
        theta[0] = spec.alpha * v
        theta[1:] = signs[:, None] * spec.alpha * v
        h_nom = np.abs(signs - 1.0) * spec.alpha
        return ProblemInstance(
            d, tau, theta, sizes,
            _base_meta("hard:RandomSignTwoCluster", h_nom,
                       alpha=float(spec.alpha), direction=_frozen(v),
                       signs=_frozen(signs)),
        )
    # BalancedTwoCluster
    if m % 2:
        raise ValueError("BalancedTwoCluster requires even m")
    sep = math.sqrt(spec.delta_sep)
    theta = np.zeros((m + 1, d))
    theta[m // 2 + 1:, 0] = sep
    if spec.hypothesis == 1:
        theta[0, 0] = sep
    h_nom = np.abs(theta[1:, 0] - theta[0, 0])
    mu1 = np.zeros(d)
    mu2 = np.zeros(d)
    mu2[0] = sep
    return ProblemInstance(
        d, tau, theta, sizes,
        _base_meta("hard:BalancedTwoCluster", h_nom,
                   delta_sep=float(spec.delta_sep),
                   hypothesis=spec.hypothesis, mu1=_frozen(mu1),
                   mu2=_frozen(mu2)),
    )
