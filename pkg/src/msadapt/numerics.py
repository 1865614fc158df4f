"""Dense linear-algebra and clustering primitives, plus noise-scale proxies.

Everything here is deterministic: the eigensolvers use fixed start vectors,
k-means takes an explicit seed, and no function touches the global numpy RNG.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "weighted_mean_cov",
    "top_eigenvectors",
    "kmeans_1d_two",
    "kmeans_lloyd",
    "tau_proxy_normal_mean",
    "tau_proxy_linear_regression",
]

# Fixed entropy for the deterministic start vectors of the iterative solvers.
_POWER_START_SEED = 0x5EED
_INVPOWER_START_SEED = 0xA11CE


def weighted_mean_cov(vectors, weights):
    """Weighted mean and weighted covariance of a stack of row vectors.

    Parameters
    ----------
    vectors : (m, d) array_like
        One row per observation.
    weights : (m,) array_like
        Nonnegative weights with a positive sum.

    Returns
    -------
    mean : (d,) ndarray
        ``sum_k w_k x_k / sum_k w_k``.
    cov : (d, d) ndarray
        ``sum_k w_k (x_k - mean)(x_k - mean)^T / sum_k w_k``, exactly
        symmetric.
    """
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2:
        raise ValueError("vectors must be a 2-D array of row vectors")
    w = np.asarray(weights, dtype=float)
    if w.shape != (x.shape[0],):
        raise ValueError("weights length must match the number of vectors")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if not total > 0:
        raise ValueError("total weight must be positive")
    mean = (w @ x) / total
    xc = x - mean
    cov = (xc.T * w) @ xc / total
    cov = 0.5 * (cov + cov.T)
    return mean, cov


def _check_symmetric(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale > 0 and np.max(np.abs(a - a.T)) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    return 0.5 * (a + a.T)


def _fix_sign(v):
    # Sign convention: the largest-magnitude entry is positive.
    j = int(np.argmax(np.abs(v)))
    return -v if v[j] < 0 else v


def top_eigenvectors(a, num, method="eigh"):
    """Orthonormal eigenvectors of the ``num`` largest eigenvalues.

    Parameters
    ----------
    a : (d, d) array_like
        Symmetric positive semi-definite matrix.
    num : int
        Number of leading eigenvectors, ``1 <= num <= d``.
    method : {"eigh", "power"}
        ``"eigh"`` (default) uses a LAPACK symmetric eigendecomposition;
        ``"power"`` runs per-vector power iteration with deflation from fixed
        start vectors.  Both honor the same determinism and sign contract
        (largest-magnitude entry of each column is positive).

    Returns
    -------
    (d, num) ndarray with orthonormal columns ordered by decreasing
    eigenvalue.

    Raises
    ------
    RuntimeError
        If the power method fails to converge within 10**4 iterations for
        some vector.
    """
    a = _check_symmetric(a)
    d = a.shape[0]
    if not 1 <= num <= d:
        raise ValueError(f"num must be in [1, {d}], got {num}")
    norm_a = np.linalg.norm(a)
    if norm_a == 0.0:
        # Degenerate (zero) matrix: fall back to the canonical basis so that
        # downstream clustering has a fixed, documented direction.
        return np.eye(d)[:, :num].copy()
    if method == "eigh":
        _, vecs = np.linalg.eigh(a)
        out = vecs[:, ::-1][:, :num].copy()
        for i in range(num):
            out[:, i] = _fix_sign(out[:, i])
        return out
    if method != "power":
        raise ValueError(f"unknown method {method!r}")

    rng = np.random.default_rng(_POWER_START_SEED)
    work = a.copy()
    out = np.empty((d, num))
    tol = 1e-9 * norm_a
    for i in range(num):
        v = rng.standard_normal(d)
        if i:
            v -= out[:, :i] @ (out[:, :i].T @ v)
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(10_000):
            w = work @ v
            lam = float(v @ w)
            if np.linalg.norm(w - lam * v) <= tol:
                break
            nw = np.linalg.norm(w)
            if nw <= 1e-300:
                # Deflated matrix acts as zero on the remaining subspace: any
                # unit vector orthogonal to the previous columns is an
                # eigenvector (eigenvalue 0), and v already is one.
                lam = 0.0
                break
            v = w / nw
            if i:
                v -= out[:, :i] @ (out[:, :i].T @ v)
                v /= np.linalg.norm(v)
        else:
            raise RuntimeError(
                f"power iteration did not converge for eigenvector {i + 1}"
            )
        out[:, i] = _fix_sign(v)
        work -= lam * np.outer(v, v)
    return out


def kmeans_1d_two(points):
    """Globally optimal 2-means clustering on a line.

    Sorts the points and scans all contiguous splits (the optimal 1-D
    2-means partition is always an interval split of the sorted order).

    Returns
    -------
    centers : (c1, c2) with ``c1 <= c2``
    labels : (m,) int ndarray with values in {1, 2}
        Each point is labeled by its nearest center (ties go to center 1).
        If all points coincide both centers equal that value and every label
        is 1.
    """
    x = np.asarray(points, dtype=float).ravel()
    m = x.size
    if m < 2:
        raise ValueError("need at least two points")
    if x.max() == x.min():
        return (float(x[0]), float(x[0])), np.ones(m, dtype=int)
    xs = np.sort(x)
    csum = np.cumsum(xs)
    total = csum[-1]
    ks = np.arange(1, m)
    left_mean = csum[:-1] / ks
    right_mean = (total - csum[:-1]) / (m - ks)
    # Within-cluster sum of squares == sum(x^2) - (S_L^2/k + S_R^2/(m-k));
    # maximizing the subtracted term minimizes the objective.
    gain = csum[:-1] ** 2 / ks + (total - csum[:-1]) ** 2 / (m - ks)
    best = int(np.argmax(gain))
    c1 = float(left_mean[best])
    c2 = float(right_mean[best])
    labels = np.where(np.abs(x - c1) <= np.abs(x - c2), 1, 2)
    return (c1, c2), labels


def _kmeans_pp_init(points, k, rng):
    m = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    idx = int(rng.integers(m))
    centers[0] = points[idx]
    closest = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = j  # all points coincide with chosen centers; any pick works
        else:
            idx = int(rng.choice(m, p=closest / total))
        centers[j] = points[idx]
        closest = np.minimum(closest, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def _assign(points, centers):
    d2 = (
        (points * points).sum(axis=1)[:, None]
        + (centers * centers).sum(axis=1)[None, :]
        - 2.0 * points @ centers.T
    )
    np.maximum(d2, 0.0, out=d2)
    return np.argmin(d2, axis=1), d2


def kmeans_lloyd(points, k, seed, n_restarts=10, max_iter=300, trace=False):
    """Lloyd's k-means with k-means++ seeding and deterministic restarts.

    Runs ``n_restarts`` independent seeded initializations and keeps the
    solution with the smallest within-cluster sum of squares.  Empty clusters
    are repaired by moving in the point farthest from its current center.

    Returns
    -------
    centers : (k, a) ndarray
    labels : (m,) int ndarray with values in {1, ..., k}
    traces : list of per-iteration objective lists, one per restart
        Only when ``trace=True``.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    m = x.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, {m}], got {k}")
    children = np.random.SeedSequence(int(seed) & ((1 << 64) - 1)).spawn(n_restarts)
    best_obj = np.inf
    best = None
    traces = []
    for child in children:
        rng = np.random.Generator(np.random.Philox(child))
        centers = _kmeans_pp_init(x, k, rng)
        labels, d2 = _assign(x, centers)
        history = []
        for _ in range(max_iter):
            counts = np.bincount(labels, minlength=k)
            for j in np.flatnonzero(counts == 0):
                # Donate the point farthest from its center, never emptying a
                # singleton cluster in the process.
                cur = d2[np.arange(m), labels].copy()
                cur[counts[labels] <= 1] = -np.inf
                donor = int(np.argmax(cur))
                counts[labels[donor]] -= 1
                labels[donor] = j
                counts[j] = 1
            centers = np.zeros((k, x.shape[1]))
            np.add.at(centers, labels, x)
            centers /= np.bincount(labels, minlength=k)[:, None]
            new_labels, d2 = _assign(x, centers)
            history.append(float(d2[np.arange(m), new_labels].sum()))
            if np.array_equal(new_labels, labels):
                break
            labels = new_labels
        traces.append(history)
        obj = float(d2[np.arange(m), labels].sum())
        if obj < best_obj:
            best_obj = obj
            best = (centers.copy(), labels.copy())
    centers, labels = best
    if trace:
        return centers, labels + 1, traces
    return centers, labels + 1


def tau_proxy_normal_mean(samples):
    """Noise-scale proxy for the location model from raw per-domain samples.

    ``sqrt(max_k lambda_max(S_k))`` where ``S_k`` is the k-th domain's sample
    covariance ``(1/n_k) sum_i (z_i - zbar)(z_i - zbar)^T``.
    """
    worst = -np.inf
    count = 0
    for z in samples:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        n = z.shape[0]
        if n < 2:
            raise ValueError("each domain needs at least two samples")
        zc = z - z.mean(axis=0)
        cov = zc.T @ zc / n
        worst = max(worst, float(np.linalg.eigvalsh(cov)[-1]))
        count += 1
    if count == 0:
        raise ValueError("no domains provided")
    return float(np.sqrt(max(worst, 0.0)))


def _lambda_min_inverse_power(g, tol_scale):
    d = g.shape[0]
    rng = np.random.default_rng(_INVPOWER_START_SEED)
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    tol = 1e-9 * tol_scale
    for _ in range(10_000):
        w = np.linalg.solve(g, v)
        w /= np.linalg.norm(w)
        lam = float(w @ g @ w)
        if np.linalg.norm(g @ w - lam * w) <= tol:
            return lam
        v = w
    raise RuntimeError("inverse power iteration did not converge")


def tau_proxy_linear_regression(domains):
    """Noise-scale proxy for linear regression from per-domain ``(X, y)`` data.

    Per domain: OLS residual variance ``rss / (n - d)`` divided by the
    smallest eigenvalue of the scaled Gram matrix ``X^T X / n``; the proxy is
    the square root of the worst ratio over domains.

    Raises
    ------
    ValueError
        If some domain has ``n <= d`` or a numerically singular Gram matrix
        (condition number above 1e12).
    """
    worst = -np.inf
    count = 0
    for x, y in domains:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if x.ndim != 2:
            raise ValueError("design matrix must be 2-D")
        n, d = x.shape
        if y.shape != (n,):
            raise ValueError("response length must match the design")
        if n <= d:
            raise ValueError("need more samples than features per domain")
        gram = x.T @ x / n
        if np.linalg.cond(gram) > 1e12:
            raise ValueError("singular Gram matrix")
        beta, *_ = np.linalg.lstsq(x, y, rcond=None)
        rss = float(((y - x @ beta) ** 2).sum())
        sigma2 = rss / (n - d)
        lam_min = _lambda_min_inverse_power(gram, np.linalg.norm(gram))
        worst = max(worst, sigma2 / lam_min)
        count += 1
    if count == 0:
        raise ValueError("no domains provided")
    return float(np.sqrt(max(worst, 0.0)))
