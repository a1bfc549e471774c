import numpy as np
import pytest

from pricepanel.errors import InsufficientClustersError, RankDeficientError
from pricepanel.services.covariance import bread, cgm_vcov, cluster_codes, one_way_vcov, psd_repair


def brute_one_way(X, u, keys, ssc=True):
    n, k = X.shape
    B = np.linalg.inv(X.T @ X)
    meat = np.zeros((k, k))
    groups = sorted(set(keys))
    for g in groups:
        s = sum(X[r] * u[r] for r in range(n) if keys[r] == g)
        meat += np.outer(s, s)
    G = len(groups)
    factor = G / (G - 1) * (n - 1) / (n - k) if ssc else 1.0
    return factor * B @ meat @ B


def brute_two_way(X, u, prod, ret, ssc=True):
    pair = [f"{p}|{r}" for p, r in zip(prod, ret)]
    V = brute_one_way(X, u, prod, ssc) + brute_one_way(X, u, ret, ssc) - brute_one_way(X, u, pair, ssc)
    w, Q = np.linalg.eigh((V + V.T) / 2)
    if w.min() < -1e-12 * np.abs(w).max():
        V = (Q * np.clip(w, 0, None)) @ Q.T
    return V


def random_design(rng, n=40, k=3, n_prod=4, n_ret=3):
    X = rng.normal(size=(n, k))
    u = rng.normal(size=n)
    prod = np.array([f"p{i % n_prod}" if i < n_prod else f"p{rng.integers(n_prod)}" for i in range(n)])
    ret = np.array([f"r{i % n_ret}" if i < n_ret else f"r{rng.integers(n_ret)}" for i in range(n)])
    return X, u, prod, ret


@pytest.mark.parametrize("seed", range(50))
def test_matches_brute_force_sandwich(seed):
    rng = np.random.default_rng(seed)
    X, u, prod, ret = random_design(rng, n=int(rng.integers(20, 80)), k=int(rng.integers(1, 5)))
    result = cgm_vcov(X, u, prod, ret)
    expected = brute_two_way(X, u, list(prod), list(ret))
    assert np.linalg.norm(result.vcov - expected) <= 1e-10 * np.linalg.norm(expected)
    assert result.n_clusters[:2] == (4, 3)


def test_without_small_sample_factor(rng):
    X, u, prod, ret = random_design(rng)
    raw = one_way_vcov(X, u, prod, ssc="none")
    np.testing.assert_allclose(raw, brute_one_way(X, u, list(prod), ssc=False), atol=1e-12)


def test_nested_retailers_collapse_to_product_clustering(rng):
    # every retailer sells a single product, so retailer and pair clusters coincide
    X, u, _, _ = random_design(rng, n=30)
    ret = np.array([f"r{i % 6}" for i in range(30)])
    prod = np.array(["p0" if i % 6 < 3 else "p1" for i in range(30)])
    result = cgm_vcov(X, u, prod, ret)
    np.testing.assert_allclose(result.vcov, one_way_vcov(X, u, prod), atol=1e-12)
    assert not result.psd_repaired


@pytest.mark.parametrize("seed", range(30))
def test_result_is_symmetric_psd(seed):
    rng = np.random.default_rng(100 + seed)
    X, u, prod, ret = random_design(rng, n=int(rng.integers(12, 60)), k=int(rng.integers(1, 5)))
    V = cgm_vcov(X, u, prod, ret).vcov
    np.testing.assert_allclose(V, V.T, atol=0)
    eig = np.linalg.eigvalsh(V)
    assert eig.min() >= -1e-10 * max(np.abs(eig).max(), 1e-300)


def test_psd_repair_clips_negative_eigenvalues():
    V = np.array([[1.0, 2.0], [2.0, 1.0]])
    repaired, changed = psd_repair(V)
    assert changed
    assert np.linalg.eigvalsh(repaired).min() >= -1e-12
    np.testing.assert_allclose(repaired, [[1.5, 1.5], [1.5, 1.5]])

    same, changed = psd_repair(np.eye(2))
    assert not changed and np.array_equal(same, np.eye(2))


def test_single_retailer_is_insufficient(rng):
    X, u, prod, _ = random_design(rng)
    with pytest.raises(InsufficientClustersError):
        cgm_vcov(X, u, prod, np.array(["r"] * len(u)))


def test_singular_bread():
    a = np.arange(1.0, 6.0)
    with pytest.raises(RankDeficientError):
        bread(np.column_stack([a, a]))


def test_cluster_codes_intersection():
    codes = cluster_codes(np.array(["a", "a", "b", "b"]), np.array(["x", "y", "x", "x"]))
    assert codes.tolist() == [0, 1, 2, 2]


@pytest.mark.slow
def test_standard_errors_track_sampling_spread():
    # homoskedastic errors on a regressor with product and retailer components
    rng = np.random.default_rng(11)
    n_prod, n_ret, reps = 40, 40, 500
    prod = np.repeat(np.arange(n_prod), n_ret)
    ret = np.tile(np.arange(n_ret), n_prod)
    betas, variances = [], []
    for _ in range(reps):
        x = rng.normal(size=n_prod)[prod] + rng.normal(size=n_ret)[ret] + rng.normal(size=len(prod))
        u = rng.normal(size=len(prod))
        X = (x - x.mean())[:, None]
        beta = float(X[:, 0] @ u / (X[:, 0] @ X[:, 0]))
        resid = u - X[:, 0] * beta
        betas.append(beta)
        variances.append(float(cgm_vcov(X, resid, prod, ret).vcov[0, 0]))
    ratio = np.sqrt(np.mean(variances)) / np.std(betas)
    assert 0.85 < ratio < 1.15
