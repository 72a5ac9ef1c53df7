import math

import numpy as np
import pytest
from scipy.special import j1

import rdstab as r
from rdstab.errors import ConvergenceError, DomainError, DimensionError, InvalidParameterError


def closed_form(x, y, mu, nu):
    """Bessel closed form of the series; independent oracle."""
    z = (mu / nu) * (x * x - y * y)
    if z == 0.0:
        return -mu * y / (2.0 * nu)
    w = math.sqrt(z)
    return -(mu * y / (2.0 * nu)) * 2.0 * j1(w) / w


def test_series_matches_bessel_closed_form():
    for mu, nu in ((6.0, 1.0), (15.0, 1.0), (3.0, 0.5)):
        for x, y in ((0.3, 0.1), (0.7, 0.7), (1.0, 0.45), (1.0, 1.0), (0.2, 0.0)):
            got = r.kernel_series(x, y, mu, nu, 60)
            assert got == pytest.approx(closed_form(x, y, mu, nu), abs=1e-12)


def test_series_longdouble_resummation():
    # re-sum the series in extended precision with explicit factorials
    mu, nu, x, y = 15.0, 1.0, 1.0, 0.6
    q = np.longdouble(-mu / (4.0 * nu))
    z = np.longdouble(x * x - y * y)
    total = np.longdouble(0.0)
    for m in range(40):
        total += q**m * z**m / (
            np.longdouble(math.factorial(m)) * np.longdouble(math.factorial(m + 1))
        )
    expected = float(np.longdouble(-mu * y / (2.0 * nu)) * total)
    assert r.kernel_series(x, y, mu, nu, 40) == pytest.approx(expected, rel=1e-13)


def test_series_domain_checks():
    with pytest.raises(DomainError):
        r.kernel_series(0.5, 0.6, 6.0, 1.0, 10)
    with pytest.raises(DomainError):
        r.kernel_series(0.5, -0.1, 6.0, 1.0, 10)
    with pytest.raises(InvalidParameterError):
        r.kernel_series(0.5, 0.2, 6.0, 0.0, 10)


def test_truncation_orders_frozen():
    # brute-force oracle: smallest M with max increment below 1e-12 on the
    # top grid row gave 9 (mu=6) and 12 (mu=15)
    g = r.make_grid(1.0, 200)
    assert r.truncate_order(6.0, 1.0, g) == 9
    assert r.truncate_order(15.0, 1.0, g) == 12


def test_truncation_raises_past_cap():
    g = r.make_grid(1.0, 50)
    with pytest.raises(ConvergenceError):
        r.truncate_order(1e6, 1e-3, g)


def test_table_boundary_conditions_exact(grid200, exp1_kernel, exp2_kernel):
    for kern, mu in ((exp1_kernel, 6.0), (exp2_kernel, 15.0)):
        diag = np.diag(kern.values)
        assert np.max(np.abs(diag + mu * grid200.nodes / 2.0)) == 0.0
        assert np.all(kern.values[:, 0] == 0.0)


def test_table_strictly_lower_triangular(exp1_kernel):
    assert np.all(np.triu(exp1_kernel.values, 1) == 0.0)


def test_table_achieved_delta_below_tol(exp1_kernel):
    assert exp1_kernel.achieved_delta < exp1_kernel.tol


def test_value_accessor_guards(exp1_kernel):
    assert exp1_kernel.value(10, 3) == exp1_kernel.values[10, 3]
    with pytest.raises(DomainError):
        exp1_kernel.value(3, 10)
    with pytest.raises(DimensionError):
        exp1_kernel.value(400, 0)


def test_boundary_row_is_last_row(exp1_kernel):
    assert np.array_equal(exp1_kernel.boundary_row(), exp1_kernel.values[-1])


def test_pde_residual_second_order(grid200):
    g400 = r.make_grid(1.0, 400)
    for mu in (6.0, 15.0):
        coarse = r.kernel_pde_residual(r.kernel_table(grid200, mu, 1.0))
        fine = r.kernel_pde_residual(r.kernel_table(g400, mu, 1.0))
        assert 3.0 <= coarse / fine <= 5.0


def test_pde_residual_needs_enough_nodes():
    k = r.kernel_table(r.make_grid(1.0, 4), 6.0, 1.0)
    with pytest.raises(DimensionError):
        r.kernel_pde_residual(k)


def test_table_values_read_only(exp1_kernel):
    with pytest.raises(ValueError):
        exp1_kernel.values[0, 0] = 1.0
