"""
Cluster-robust covariance for the within-transformed regression.

Two-way clustering by product and retailer uses inclusion-exclusion:
V = V_prod + V_ret - V_pair, each term a one-way sandwich over the demeaned
regressors with its own small-sample factor. Negative eigenvalues of the
combination are clipped to zero.
"""
from __future__ import annotations

import logging
from typing import Literal, NamedTuple

import numpy as np
import scipy.linalg

from ..errors import InsufficientClustersError, RankDeficientError

logger = logging.getLogger(__name__)

SscRule = Literal["standard", "none"]
PSD_TOL = 1e-12


class ClusteredCovariance(NamedTuple):
    vcov: np.ndarray
    psd_repaired: bool
    n_clusters: tuple[int, int, int]


def bread(X: np.ndarray) -> np.ndarray:
    """(X'X)^-1 of the demeaned design."""
    xpx = X.T @ X
    try:
        return scipy.linalg.inv(xpx)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise RankDeficientError("singular bread matrix") from exc


def cluster_codes(*keys: np.ndarray) -> np.ndarray:
    """Dense 0..G-1 codes for the intersection of one or more key arrays."""
    stacked = np.column_stack([np.asarray(k) for k in keys])
    _, codes = np.unique(stacked, axis=0, return_inverse=True)
    return codes.reshape(-1)


def score_sums(scores: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Per-cluster sums of the row scores x_r * u_r, one row per cluster."""
    n_groups = int(codes.max()) + 1
    return np.column_stack(
        [np.bincount(codes, weights=scores[:, col], minlength=n_groups) for col in range(scores.shape[1])]
    )


def small_sample_factor(n_groups: int, n_obs: int, k: int, ssc: SscRule) -> float:
    if ssc == "none":
        return 1.0
    if n_groups < 2:
        raise InsufficientClustersError(f"need at least 2 clusters, got {n_groups}")
    if n_obs <= k:
        raise InsufficientClustersError(f"{n_obs} observations leave no residual degrees of freedom for {k} regressors")
    return n_groups / (n_groups - 1) * (n_obs - 1) / (n_obs - k)


def one_way_vcov(
    X: np.ndarray,
    resid: np.ndarray,
    codes: np.ndarray,
    ssc: SscRule = "standard",
    k: int | None = None,
    xpx_inv: np.ndarray | None = None,
) -> np.ndarray:
    """One-way cluster sandwich B (sum_g s_g s_g') B with the small-sample factor."""
    n, n_cols = X.shape
    k = n_cols if k is None else k
    codes = cluster_codes(codes)
    n_groups = int(codes.max()) + 1
    B = bread(X) if xpx_inv is None else xpx_inv
    S = score_sums(X * resid[:, None], codes)
    meat = S.T @ S
    return small_sample_factor(n_groups, n, k, ssc) * (B @ meat @ B)


def psd_repair(V: np.ndarray) -> tuple[np.ndarray, bool]:
    """Clip negative eigenvalues to zero. Returns (matrix, repaired)."""
    V = (V + V.T) / 2
    if V.size == 0:
        return V, False
    eigval, eigvec = np.linalg.eigh(V)
    scale = max(float(np.abs(eigval).max()), 0.0)
    if eigval.min() >= -PSD_TOL * scale:
        return V, False
    clipped = np.clip(eigval, 0.0, None)
    repaired = (eigvec * clipped) @ eigvec.T
    return (repaired + repaired.T) / 2, True


def cgm_vcov(
    X: np.ndarray,
    resid: np.ndarray,
    prod_codes: np.ndarray,
    ret_codes: np.ndarray,
    ssc: SscRule = "standard",
    k: int | None = None,
) -> ClusteredCovariance:
    """Two-way covariance clustered by product and retailer."""
    prod = cluster_codes(prod_codes)
    ret = cluster_codes(ret_codes)
    pair = cluster_codes(prod_codes, ret_codes)
    g_prod, g_ret, g_pair = int(prod.max()) + 1, int(ret.max()) + 1, int(pair.max()) + 1
    if g_prod < 2 or g_ret < 2:
        raise InsufficientClustersError(f"two-way clustering needs 2+ products and 2+ retailers, got {g_prod} and {g_ret}")

    B = bread(X)
    v_prod = one_way_vcov(X, resid, prod, ssc, k, B)
    v_ret = one_way_vcov(X, resid, ret, ssc, k, B)
    v_pair = one_way_vcov(X, resid, pair, ssc, k, B)
    V, repaired = psd_repair(v_prod + v_ret - v_pair)
    if repaired:
        logger.warning("Two-way covariance was not positive semi-definite; clipped negative eigenvalues")
    return ClusteredCovariance(vcov=V, psd_repaired=repaired, n_clusters=(g_prod, g_ret, g_pair))
