"""
Student-t tail probabilities and quantiles.

Two-sided p-values come from the regularized incomplete beta function:
P(|T| > |t|) = I_x(dof/2, 1/2) with x = dof / (dof + t^2).
"""
from __future__ import annotations

import math
from typing import NamedTuple, Optional

from scipy import special, stats


class TTest(NamedTuple):
    t: Optional[float]
    p: float
    degenerate: bool = False


def two_sided_p(t: float, dof: float) -> float:
    if dof < 1:
        raise ValueError(f"dof must be >= 1, got {dof}")
    if math.isinf(t):
        return 0.0
    x = dof / (dof + t * t)
    return float(min(1.0, max(0.0, special.betainc(dof / 2.0, 0.5, x))))


def t_pvalue(estimate: float, se: float, dof: int) -> TTest:
    """
    t statistic and two-sided p-value. A zero standard error gives p = 0
    and no t statistic, flagged as degenerate.
    """
    if se < 0 or math.isnan(se):
        raise ValueError(f"invalid standard error {se}")
    if se == 0:
        return TTest(t=None, p=0.0, degenerate=True)
    t = estimate / se
    return TTest(t=t, p=two_sided_p(t, dof))


def t_quantile(prob: float, dof: float) -> float:
    """Quantile of Student's t, e.g. `t_quantile(0.95, 30)` for a 90% CI."""
    if not 0 < prob < 1:
        raise ValueError(f"probability must lie in (0, 1), got {prob}")
    if dof < 1:
        raise ValueError(f"dof must be >= 1, got {dof}")
    return float(stats.t.ppf(prob, df=dof))
