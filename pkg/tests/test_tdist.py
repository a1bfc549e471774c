import math

import numpy as np
import pytest
from scipy import integrate

from pricepanel.services.tdist import t_pvalue, t_quantile, two_sided_p


def t_density(x, dof):
    log_c = math.lgamma((dof + 1) / 2) - math.lgamma(dof / 2) - 0.5 * math.log(dof * math.pi)
    return math.exp(log_c - (dof + 1) / 2 * math.log1p(x * x / dof))


@pytest.mark.parametrize("dof", [1, 5, 30, 1000])
@pytest.mark.parametrize("t", [0.3, 1.0, 2.0, 4.5])
def test_agrees_with_density_integral(dof, t):
    tail, _ = integrate.quad(t_density, t, np.inf, args=(dof,), epsabs=1e-13, epsrel=1e-11)
    assert two_sided_p(t, dof) == pytest.approx(2 * tail, rel=1e-6, abs=1e-12)


def test_zero_and_sign():
    assert two_sided_p(0.0, 7) == pytest.approx(1.0)
    assert two_sided_p(-2.0, 7) == two_sided_p(2.0, 7)
    assert two_sided_p(math.inf, 7) == 0.0


def test_normal_limit():
    assert two_sided_p(1.959964, 10**7) == pytest.approx(0.05, abs=1e-5)


def test_classic_table_value():
    assert two_sided_p(2.571, 5) == pytest.approx(0.05, abs=1e-3)


def test_dof_must_be_positive():
    with pytest.raises(ValueError):
        two_sided_p(1.0, 0)


def test_zero_standard_error_is_degenerate():
    result = t_pvalue(3.0, 0.0, 5)
    assert result.t is None and result.p == 0.0 and result.degenerate


def test_t_pvalue():
    result = t_pvalue(5.0, 2.0, 5)
    assert result.t == 2.5 and not result.degenerate
    assert result.p == pytest.approx(two_sided_p(2.5, 5))


def test_quantile_inverts_p():
    q = t_quantile(0.95, 12)
    assert two_sided_p(q, 12) == pytest.approx(0.10, rel=1e-8)
    assert t_quantile(0.95, 10**7) == pytest.approx(1.6449, abs=1e-3)
