"""Tests for the linear-algebra and clustering primitives.

Reference values come from deliberately naive implementations (double loops,
Jacobi sweeps, exhaustive split enumeration) so that the fast paths are
checked against something independent.
"""

import numpy as np
import pytest

from msadapt.numerics import (
    kmeans_1d_two,
    kmeans_lloyd,
    tau_proxy_linear_regression,
    tau_proxy_normal_mean,
    top_eigenvectors,
    weighted_mean_cov,
)


# ---------------------------------------------------------------------------
# weighted_mean_cov


def _mean_cov_loops(vectors, weights):
    # plain double-loop reference, no matrix algebra
    m, d = vectors.shape
    total = float(sum(weights))
    mean = np.zeros(d)
    for k in range(m):
        for j in range(d):
            mean[j] += weights[k] * vectors[k, j] / total
    cov = np.zeros((d, d))
    for k in range(m):
        r = vectors[k] - mean
        for i in range(d):
            for j in range(d):
                cov[i, j] += weights[k] * r[i] * r[j] / total
    return mean, cov


def test_weighted_mean_cov_matches_loop_reference():
    rng = np.random.default_rng(7)
    for _ in range(6):
        m = int(rng.integers(2, 9))
        d = int(rng.integers(1, 5))
        v = rng.normal(size=(m, d))
        w = rng.uniform(0.1, 3.0, size=m)
        mean, cov = weighted_mean_cov(v, w)
        ref_mean, ref_cov = _mean_cov_loops(v, w)
        assert np.allclose(mean, ref_mean, atol=1e-12)
        assert np.allclose(cov, ref_cov, atol=1e-12)
        assert np.array_equal(cov, cov.T)


def test_weighted_mean_cov_uniform_weights_equal_plain_moments():
    rng = np.random.default_rng(12)
    v = rng.normal(size=(10, 3))
    mean, cov = weighted_mean_cov(v, np.ones(10))
    assert np.allclose(mean, v.mean(axis=0))
    centered = v - v.mean(axis=0)
    assert np.allclose(cov, centered.T @ centered / 10)


def test_weighted_mean_cov_rejects_bad_input():
    v = np.zeros((3, 2))
    with pytest.raises(ValueError):
        weighted_mean_cov(np.zeros(3), np.ones(3))
    with pytest.raises(ValueError):
        weighted_mean_cov(v, np.ones(2))
    with pytest.raises(ValueError):
        weighted_mean_cov(v, np.array([1.0, -0.5, 1.0]))
    with pytest.raises(ValueError):
        weighted_mean_cov(v, np.zeros(3))


# ---------------------------------------------------------------------------
# top_eigenvectors


def _jacobi_eigh(a):
    """Cyclic Jacobi sweeps. Slow but independent of numpy.linalg."""
    a = np.array(a, dtype=float)
    d = a.shape[0]
    v = np.eye(d)
    for _ in range(100):
        off = np.sum(a**2) - np.sum(np.diag(a) ** 2)
        if off < 1e-24:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                if abs(a[p, q]) < 1e-18:
                    continue
                phi = 0.5 * np.arctan2(2.0 * a[p, q], a[q, q] - a[p, p])
                c, s = np.cos(phi), np.sin(phi)
                rot = np.eye(d)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    idx = np.argsort(np.diag(a))[::-1]
    return np.diag(a)[idx], v[:, idx]


def _random_spd(d, eigvals, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    a = (q * np.asarray(eigvals, dtype=float)) @ q.T
    return 0.5 * (a + a.T)


@pytest.mark.parametrize("method", ["eigh", "power"])
def test_top_eigenvectors_against_jacobi(method):
    eigvals = [9.0, 5.0, 2.0, 0.8, 0.3]
    a = _random_spd(5, eigvals, seed=11)
    vals_ref, vecs_ref = _jacobi_eigh(a)
    # the reference itself must satisfy the eigen equation
    assert np.allclose(a @ vecs_ref, vecs_ref * vals_ref, atol=1e-8)
    assert np.allclose(vals_ref, eigvals, atol=1e-8)

    basis = top_eigenvectors(a, 3, method=method)
    assert basis.shape == (5, 3)
    assert np.allclose(basis.T @ basis, np.eye(3), atol=1e-8)
    overlap = np.abs(np.sum(basis * vecs_ref[:, :3], axis=0))
    assert np.allclose(overlap, 1.0, atol=1e-6)
    rayleigh = np.diag(basis.T @ a @ basis)
    assert np.allclose(rayleigh, eigvals[:3], atol=1e-6)


def test_power_and_eigh_agree_including_sign():
    a = _random_spd(6, [7.0, 4.0, 2.5, 1.0, 0.5, 0.1], seed=3)
    b1 = top_eigenvectors(a, 4, method="eigh")
    b2 = top_eigenvectors(a, 4, method="power")
    assert np.allclose(b1, b2, atol=1e-6)


def test_top_eigenvectors_sign_convention():
    # largest-magnitude entry of each column is positive
    a = _random_spd(5, [6.0, 3.0, 1.0, 0.4, 0.1], seed=19)
    for method in ("eigh", "power"):
        basis = top_eigenvectors(a, 5, method=method)
        for i in range(5):
            col = basis[:, i]
            assert col[np.argmax(np.abs(col))] > 0


def test_top_eigenvectors_zero_matrix_gives_canonical_basis():
    basis = top_eigenvectors(np.zeros((4, 4)), 2)
    assert np.array_equal(basis, np.eye(4)[:, :2])


def test_top_eigenvectors_rejects_bad_input():
    with pytest.raises(ValueError):
        top_eigenvectors(np.arange(9.0).reshape(3, 3), 1)  # not symmetric
    a = np.eye(3)
    with pytest.raises(ValueError):
        top_eigenvectors(a, 0)
    with pytest.raises(ValueError):
        top_eigenvectors(a, 4)
    with pytest.raises(ValueError):
        top_eigenvectors(a, 1, method="svd")


# ---------------------------------------------------------------------------
# kmeans_1d_two


def _best_split_objective(points):
    """Exhaustive search over contiguous splits of the sorted values."""
    x = np.sort(np.asarray(points, dtype=float))
    best = np.inf
    for k in range(1, x.size):
        left, right = x[:k], x[k:]
        obj = ((left - left.mean()) ** 2).sum() + ((right - right.mean()) ** 2).sum()
        best = min(best, obj)
    return best


def _assignment_objective(points, centers):
    x = np.asarray(points, dtype=float)
    c1, c2 = centers
    return float(np.minimum((x - c1) ** 2, (x - c2) ** 2).sum())


def test_kmeans_1d_two_matches_exhaustive_split():
    rng = np.random.default_rng(23)
    cases = [rng.normal(size=n) for n in (2, 3, 5, 9, 17)]
    cases.append(np.array([0.0, 0.0, 0.0, 1.0, 1.0]))  # duplicates
    cases.append(np.array([1.0, 2.0]))
    cases.append(np.concatenate([rng.normal(size=8), rng.normal(10.0, 1.0, size=8)]))
    for x in cases:
        (c1, c2), labels = kmeans_1d_two(x)
        assert c1 <= c2
        assert set(np.unique(labels)) <= {1, 2}
        # returned labels follow the nearest-center rule with ties going low
        expected = np.where(np.abs(x - c1) <= np.abs(x - c2), 1, 2)
        assert np.array_equal(labels, expected)
        # the solution achieves the global two-cluster objective
        assert np.isclose(
            _assignment_objective(x, (c1, c2)), _best_split_objective(x), atol=1e-9
        )
        # centers are the means of their own clusters at the optimum
        if (labels == 1).any():
            assert np.isclose(x[labels == 1].mean(), c1, atol=1e-9)
        if (labels == 2).any():
            assert np.isclose(x[labels == 2].mean(), c2, atol=1e-9)


def test_kmeans_1d_two_all_equal():
    (c1, c2), labels = kmeans_1d_two(np.full(6, 3.25))
    assert c1 == c2 == 3.25
    assert np.array_equal(labels, np.ones(6, dtype=int))


def test_kmeans_1d_two_needs_two_points():
    with pytest.raises(ValueError):
        kmeans_1d_two(np.array([1.0]))


# ---------------------------------------------------------------------------
# kmeans_lloyd


def _blobs(seed=0):
    rng = np.random.default_rng(seed)
    shift = np.array([[0.0, 0.0], [12.0, 0.0], [0.0, 12.0]])
    pts = np.concatenate([rng.normal(size=(6, 2)) * 0.3 + s for s in shift])
    truth = np.repeat([0, 1, 2], 6)
    return pts, truth


def test_kmeans_lloyd_recovers_separated_blobs():
    pts, truth = _blobs()
    centers, labels = kmeans_lloyd(pts, 3, seed=5)
    assert centers.shape == (3, 2)
    assert labels.shape == (18,)
    assert labels.min() >= 1 and labels.max() <= 3
    # partition matches the ground truth up to label permutation
    for g in range(3):
        got = labels[truth == g]
        assert np.all(got == got[0])
    assert len({labels[truth == g][0] for g in range(3)}) == 3
    for g in range(3):
        lab = labels[truth == g][0]
        assert np.allclose(centers[lab - 1], pts[truth == g].mean(axis=0), atol=1e-8)


def test_kmeans_lloyd_deterministic_in_seed():
    pts, _ = _blobs(seed=2)
    c1, l1 = kmeans_lloyd(pts, 3, seed=42)
    c2, l2 = kmeans_lloyd(pts, 3, seed=42)
    assert np.array_equal(c1, c2)
    assert np.array_equal(l1, l2)


def test_kmeans_lloyd_objective_nonincreasing_and_best_restart():
    rng = np.random.default_rng(31)
    pts = rng.normal(size=(40, 3))
    centers, labels, traces = kmeans_lloyd(pts, 4, seed=9, trace=True)
    assert len(traces) == 10  # one history per restart
    for history in traces:
        assert len(history) >= 1
        diffs = np.diff(history)
        assert np.all(diffs <= 1e-9)
    returned_obj = sum(
        ((pts[labels == j + 1] - centers[j]) ** 2).sum() for j in range(4)
    )
    finals = [history[-1] for history in traces]
    assert np.isclose(returned_obj, min(finals), atol=1e-9)


def test_kmeans_lloyd_single_cluster_and_validation():
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(7, 2))
    centers, labels = kmeans_lloyd(pts, 1, seed=0)
    assert np.array_equal(labels, np.ones(7, dtype=int))
    assert np.allclose(centers[0], pts.mean(axis=0))
    with pytest.raises(ValueError):
        kmeans_lloyd(pts, 8, seed=0)
    with pytest.raises(ValueError):
        kmeans_lloyd(pts, 0, seed=0)


# ---------------------------------------------------------------------------
# noise-scale proxies


def test_tau_proxy_normal_mean_matches_direct_computation():
    rng = np.random.default_rng(77)
    samples = [rng.normal(size=(n, 3)) * s for n, s in ((40, 1.0), (25, 2.5), (60, 0.5))]
    worst = 0.0
    for z in samples:
        zc = z - z.mean(axis=0)
        cov = zc.T @ zc / z.shape[0]
        worst = max(worst, float(np.linalg.eigvalsh(cov)[-1]))
    assert np.isclose(tau_proxy_normal_mean(samples), np.sqrt(worst), atol=1e-12)


def test_tau_proxy_normal_mean_needs_two_rows():
    with pytest.raises(ValueError):
        tau_proxy_normal_mean([np.zeros((1, 3))])
    with pytest.raises(ValueError):
        tau_proxy_normal_mean([])


def test_tau_proxy_linear_regression_matches_direct_computation():
    rng = np.random.default_rng(13)
    domains = []
    worst = 0.0
    for n, d in ((50, 3), (80, 5)):
        x = rng.normal(size=(n, d))
        beta = rng.normal(size=d)
        y = x @ beta + 0.7 * rng.normal(size=n)
        domains.append((x, y))
        gram = x.T @ x / n
        coef, *_ = np.linalg.lstsq(x, y, rcond=None)
        rss = float(((y - x @ coef) ** 2).sum())
        sigma2 = rss / (n - d)
        lam_min = float(np.linalg.eigvalsh(gram)[0])
        worst = max(worst, sigma2 / lam_min)
    got = tau_proxy_linear_regression(domains)
    assert np.isclose(got, np.sqrt(worst), rtol=1e-6)


def test_tau_proxy_linear_regression_rejects_degenerate_domains():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(30, 2))
    y = rng.normal(size=30)
    sing = np.column_stack([x[:, 0], x[:, 0]])  # rank deficient
    with pytest.raises(ValueError, match="singular"):
        tau_proxy_linear_regression([(sing, y)])
    with pytest.raises(ValueError):
        tau_proxy_linear_regression([(np.zeros((2, 3)), np.zeros(2))])  # n <= d
    with pytest.raises(ValueError):
        tau_proxy_linear_regression([(x, y[:-1])])
    with pytest.raises(ValueError):
        tau_proxy_linear_regression([])
