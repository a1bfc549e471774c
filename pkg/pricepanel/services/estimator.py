"""
Event-study regression with product and retailer fixed effects.

    Y_ijt = sum_{b != ref} beta_b 1[bin_t = b] + alpha_i + delta_j + e_ijt

The fixed effects are absorbed by alternating projections (iterated group
demeaning); bin coefficients come from least squares on the demeaned data and
inference uses two-way clustering by product and retailer.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.sparse.csgraph import connected_components

from ..errors import ConvergenceError, EstimationError, InsufficientClustersError, RankDeficientError
from ..schemas import AnalysisRow, ConvergenceInfo, EventStudyFit, FixedEffectsSolution
from .covariance import SscRule, cgm_vcov
from .timevars import window_bins

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10_000
# a bin column is collinear when its residual sum of squares, after projecting
# on the columns already kept, falls below this share of its row count
COLLINEAR_TOL = 1e-10

Outcome = Literal["P", "logP"]
RetailerKey = Literal["ret_name", "ret_id"]


class GroupIndex:
    """Dense group codes with per-group means and broadcasts."""

    def __init__(self, labels: Sequence[str]) -> None:
        self.labels, codes = np.unique(np.asarray(labels, dtype=object).astype(str), return_inverse=True)
        self.codes = codes.reshape(-1)
        self.counts = np.bincount(self.codes, minlength=len(self.labels)).astype(float)

    @property
    def n_groups(self) -> int:
        return len(self.labels)

    def sums(self, matrix: np.ndarray) -> np.ndarray:
        return np.column_stack(
            [np.bincount(self.codes, weights=matrix[:, c], minlength=self.n_groups) for c in range(matrix.shape[1])]
        )

    def means(self, matrix: np.ndarray) -> np.ndarray:
        return self.sums(matrix) / self.counts[:, None]

    def expand(self, group_values: np.ndarray) -> np.ndarray:
        return group_values[self.codes]

    def singletons(self) -> int:
        return int((self.counts == 1).sum())


@dataclass(frozen=True)
class RegressionSample:
    """Outcome, event bin and cluster keys of every row with a present outcome."""

    y: np.ndarray
    bins: np.ndarray
    prod: GroupIndex
    ret: GroupIndex
    ref_bin: int = 0
    outcome: Outcome = "P"
    group: str = "sample"
    retailer_key: RetailerKey = "ret_id"

    @classmethod
    def from_rows(
        cls,
        rows: Sequence[AnalysisRow],
        outcome: Outcome = "P",
        ref_bin: int = 0,
        group: str = "sample",
        retailer_key: RetailerKey = "ret_name",
    ) -> "RegressionSample":
        """
        Rows with a present outcome. Retailer effects and clusters are keyed on
        the snapshot name by default; rows without a name fall back to `ret_id`.
        """
        kept = [r for r in rows if getattr(r, outcome) is not None]
        if len(kept) < len(rows):
            logger.info("%s: %d of %d rows have no %s and are excluded", group, len(rows) - len(kept), len(rows), outcome)
        if retailer_key == "ret_name":
            unnamed = sum(1 for r in kept if r.ret_name is None)
            if unnamed:
                logger.info("%s: %d rows have no retailer name; keyed on ret_id", group, unnamed)
            ret = [r.ret_id if r.ret_name is None else r.ret_name for r in kept]
        else:
            ret = [r.ret_id for r in kept]
        return cls.from_arrays(
            y=[getattr(r, outcome) for r in kept],
            bins=[r.b for r in kept],
            prod=[r.prod_id for r in kept],
            ret=ret,
            ref_bin=ref_bin,
            outcome=outcome,
            group=group,
            retailer_key=retailer_key,
        )

    @classmethod
    def from_arrays(
        cls,
        y,
        bins,
        prod,
        ret,
        ref_bin: int = 0,
        outcome: Outcome = "P",
        group: str = "sample",
        retailer_key: RetailerKey = "ret_id",
    ) -> "RegressionSample":
        y = np.asarray(y, dtype=float).reshape(-1)
        bins = np.asarray(bins, dtype=int).reshape(-1)
        if not (len(y) == len(bins) == len(prod) == len(ret)):
            raise EstimationError("outcome, bin and cluster arrays differ in length")
        if len(y) == 0:
            raise EstimationError(f"{group}: no observations with a present outcome")
        if not np.all(np.isfinite(y)):
            raise EstimationError(f"{group}: outcome contains non-finite values")
        valid = set(window_bins())
        bad = sorted(set(bins.tolist()) - valid)
        if bad:
            raise EstimationError(f"{group}: bins {bad} are outside the event window")
        return cls(
            y=y,
            bins=bins,
            prod=GroupIndex(prod),
            ret=GroupIndex(ret),
            ref_bin=ref_bin,
            outcome=outcome,
            group=group,
            retailer_key=retailer_key,
        )

    @property
    def n_obs(self) -> int:
        return len(self.y)

    @property
    def n_pairs(self) -> int:
        return len(set(zip(self.prod.codes.tolist(), self.ret.codes.tolist())))

    def dummies(self, bins: Sequence[int]) -> np.ndarray:
        return (self.bins[:, None] == np.asarray(bins, dtype=int)[None, :]).astype(float)


@dataclass(frozen=True)
class Demeaned:
    matrix: np.ndarray
    iterations: int
    max_change: float


@dataclass(frozen=True)
class WithinEstimate:
    """Everything the covariance and fit statistics need from one fit."""

    bins: list[int]
    dropped_bins: list[int]
    beta: np.ndarray
    X: np.ndarray
    y: np.ndarray
    resid: np.ndarray
    demeaning: Demeaned


def within_transform(
    sample: RegressionSample, matrix: np.ndarray, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> Demeaned:
    """
    Remove product and retailer means from every column of `matrix` by
    alternating projections. A sweep demeans by product, then by retailer;
    iteration stops once the product means left after a sweep (the change the
    next sweep would make) are all below `tol`.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    X = np.array(matrix, dtype=float, copy=True)
    if X.ndim == 1:
        X = X[:, None]
    max_change = 0.0
    for iteration in range(1, max_iter + 1):
        X -= sample.prod.expand(sample.prod.means(X))
        X -= sample.ret.expand(sample.ret.means(X))
        max_change = float(np.abs(sample.prod.means(X)).max(initial=0.0))
        if max_change < tol:
            logger.debug("Demeaning converged after %d sweeps (max change %.3e)", iteration, max_change)
            return Demeaned(matrix=X, iterations=iteration, max_change=max_change)
    raise ConvergenceError(max_iter, max_change)


def _select_columns(X: np.ndarray, bins: list[int], counts: dict[int, int]) -> tuple[list[int], list[int]]:
    """
    Keep bins greedily from the most positive down, dropping any column that
    is (numerically) a combination of the ones kept, so the most negative
    bins go first.
    """
    basis: list[np.ndarray] = []
    kept: list[int] = []
    dropped: list[int] = []
    for col in sorted(range(len(bins)), key=lambda c: -bins[c]):
        r = X[:, col].copy()
        for _ in range(2):
            for q in basis:
                r -= (q @ r) * q
        norm2 = float(r @ r)
        if norm2 <= COLLINEAR_TOL * counts[bins[col]]:
            dropped.append(bins[col])
            continue
        basis.append(r / np.sqrt(norm2))
        kept.append(col)
    return sorted(kept), dropped


def estimate_within(
    sample: RegressionSample, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> WithinEstimate:
    """Demean outcome and bin dummies, drop empty or collinear bins, solve least squares."""
    if not np.any(sample.bins == sample.ref_bin):
        raise EstimationError(f"{sample.group}: reference bin {sample.ref_bin} has no observations")
    counts = dict(zip(*np.unique(sample.bins, return_counts=True)))
    counts = {int(b): int(c) for b, c in counts.items()}
    candidates = [b for b in window_bins() if b != sample.ref_bin]
    present = [b for b in candidates if counts.get(b, 0) > 0]
    empty = [b for b in candidates if counts.get(b, 0) == 0]

    D = sample.dummies(present)
    demeaned = within_transform(sample, np.column_stack([sample.y, D]), tol, max_iter)
    y_dm, X_dm = demeaned.matrix[:, 0], demeaned.matrix[:, 1:]

    keep, collinear = _select_columns(X_dm, present, counts)
    if collinear:
        logger.warning("%s: bins %s are collinear with the fixed effects and were dropped", sample.group, sorted(collinear))
    bins = [present[c] for c in keep]
    if not bins:
        raise RankDeficientError(f"{sample.group}: no estimable bin coefficients remain after drops")
    X = X_dm[:, keep]
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise RankDeficientError(f"{sample.group}: design is rank deficient after dropping bins")

    beta, *_ = scipy.linalg.lstsq(X, y_dm)
    resid = y_dm - X @ beta
    return WithinEstimate(
        bins=bins,
        dropped_bins=sorted(empty + collinear),
        beta=beta,
        X=X,
        y=y_dm,
        resid=resid,
        demeaning=demeaned,
    )


def count_components(sample: RegressionSample) -> int:
    """Connected components of the product-retailer bipartite graph."""
    n_p, n_r = sample.prod.n_groups, sample.ret.n_groups
    graph = scipy.sparse.coo_matrix(
        (np.ones(sample.n_obs), (sample.prod.codes, n_p + sample.ret.codes)), shape=(n_p + n_r, n_p + n_r)
    )
    n_components, _ = connected_components(graph, directed=False)
    return int(n_components)


def fit_statistics(
    sample: RegressionSample,
    estimate: WithinEstimate,
    rmse_denominator: Literal["n", "dof"] = "n",
) -> tuple[float, Optional[float], Optional[float]]:
    """(rmse, adj_r2, within_r2). Absent statistics are None."""
    n = sample.n_obs
    rss = float(estimate.resid @ estimate.resid)
    k_total = len(estimate.bins) + sample.prod.n_groups + sample.ret.n_groups - count_components(sample)
    tss = float(((sample.y - sample.y.mean()) ** 2).sum())
    tss_within = float(estimate.y @ estimate.y)

    if rmse_denominator == "dof" and n > k_total:
        rmse = float(np.sqrt(rss / (n - k_total)))
    else:
        if rmse_denominator == "dof":
            logger.warning("%s: n <= k (%d <= %d); RMSE uses n", sample.group, n, k_total)
        rmse = float(np.sqrt(rss / n))

    adj_r2 = None
    if n > k_total and tss > 0:
        adj_r2 = 1.0 - (rss / (n - k_total)) / (tss / (n - 1))
    within_r2 = 1.0 - rss / tss_within if tss_within > 0 else None
    return rmse, adj_r2, within_r2


def fit_event_study(
    sample: RegressionSample,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    ssc: SscRule = "standard",
    rmse_denominator: Literal["n", "dof"] = "n",
) -> EventStudyFit:
    """
    Fit the event study. Fewer than two clusters in either dimension still
    yields coefficients, with the covariance left absent.
    """
    est = estimate_within(sample, tol, max_iter)
    g_prod, g_ret = sample.prod.n_groups, sample.ret.n_groups

    vcov = None
    repaired = False
    if g_prod < 2 or g_ret < 2:
        logger.warning("%s: %d products, %d retailers; covariance not computed", sample.group, g_prod, g_ret)
    else:
        try:
            clustered = cgm_vcov(est.X, est.resid, sample.prod.codes, sample.ret.codes, ssc=ssc)
        except InsufficientClustersError as exc:
            logger.warning("%s: %s; covariance not computed", sample.group, exc)
        else:
            vcov = clustered.vcov.tolist()
            repaired = clustered.psd_repaired

    rmse, adj_r2, within_r2 = fit_statistics(sample, est, rmse_denominator)
    fit = EventStudyFit(
        group=sample.group,
        outcome=sample.outcome,
        ref_bin=sample.ref_bin,
        bins=est.bins,
        beta=est.beta.tolist(),
        vcov=vcov,
        n_obs=sample.n_obs,
        n_products=g_prod,
        n_retailers=g_ret,
        n_pairs=sample.n_pairs,
        dropped_bins=est.dropped_bins,
        rmse=rmse,
        adj_r2=adj_r2,
        within_r2=within_r2,
        dof_inference=max(min(g_prod, g_ret) - 1, 0),
        ssc=ssc,
        retailer_key=sample.retailer_key,
        psd_repaired=repaired,
        singleton_products=sample.prod.singletons(),
        singleton_retailers=sample.ret.singletons(),
        convergence=ConvergenceInfo(iterations=est.demeaning.iterations, max_change=est.demeaning.max_change),
    )
    logger.info(
        "%s: fitted %d bins on %d rows (%d products, %d retailers), dropped %s",
        sample.group, len(fit.bins), fit.n_obs, g_prod, g_ret, fit.dropped_bins or "none",
    )
    return fit


def recover_fixed_effects(
    sample: RegressionSample,
    fit: EventStudyFit,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> FixedEffectsSolution:
    """
    Product and retailer effects given the bin coefficients, by alternating
    group means of the partial residual. Normalized so the retailer effects
    average to zero; the product effects carry the grand mean.
    """
    partial = sample.y - sample.dummies(fit.bins) @ np.asarray(fit.beta, dtype=float)
    r = partial[:, None]
    delta = np.zeros((sample.ret.n_groups, 1))
    alpha = np.zeros((sample.prod.n_groups, 1))
    change = np.inf
    for iteration in range(1, max_iter + 1):
        alpha_new = sample.prod.means(r - sample.ret.expand(delta))
        delta_new = sample.ret.means(r - sample.prod.expand(alpha_new))
        change = float(max(np.abs(alpha_new - alpha).max(), np.abs(delta_new - delta).max()))
        alpha, delta = alpha_new, delta_new
        if change < tol:
            break
    else:
        raise ConvergenceError(max_iter, change)

    shift = float(delta.mean())
    delta -= shift
    alpha += shift
    resid = partial - sample.prod.expand(alpha)[:, 0] - sample.ret.expand(delta)[:, 0]
    return FixedEffectsSolution(
        alpha={str(k): float(v) for k, v in zip(sample.prod.labels, alpha[:, 0])},
        delta={str(k): float(v) for k, v in zip(sample.ret.labels, delta[:, 0])},
        iterations=iteration,
        residual_norm=float(np.sqrt(resid @ resid)),
    )
