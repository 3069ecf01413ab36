import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbm_transforms.frac_calc import frac_integral_indicator
from fbm_transforms.quadrature import (PiecewiseKernel, QuadRule, cell_averages,
                                       frac_transform, integrate_square, rule_from_tol)
from fbm_transforms.special import DomainError, gamma_fn


def indicator(t=1.0):
    return PiecewiseKernel(lambda v: np.where((v >= 0) & (v < t), 1.0, 0.0), (0.0, t))


def test_rule_from_tol_depth():
    assert rule_from_tol(1e-8).levels == 24
    assert rule_from_tol(1e-2).levels == 11
    assert rule_from_tol(1.0 - 1e-9).levels == 8
    assert rule_from_tol(1e-20).levels == 28
    with pytest.raises(DomainError):
        rule_from_tol(0.0)
    with pytest.raises(DomainError):
        QuadRule(n_gauss=1)


@pytest.mark.parametrize("H", [0.15, 0.3, 0.45, 0.6, 0.75, 0.9])
def test_transform_of_indicator_matches_closed_form(H):
    v = np.array([-37.0, -2.5, -0.3, 0.01, 0.5, 0.97, 1.4])
    got = frac_transform(indicator(), H - 0.5, v)
    assert np.allclose(got, frac_integral_indicator(H, 1.0, v), rtol=1e-10, atol=1e-12)


def test_transform_order_zero_is_identity():
    v = np.linspace(-1, 2, 13)
    assert np.array_equal(frac_transform(indicator(), 0.0, v), indicator()(v))


def test_transform_of_power_kernel():
    # I^a of (1-u)^b 1_[0,1) at s in (0,1) is G(b+1)/G(a+b+1) (1-s)^(a+b)
    a, b = 0.35, -0.4
    kern = PiecewiseKernel(lambda u: np.where((u > 0) & (u < 1), np.abs(1 - u) ** b, 0.0),
                           (0.0, 1.0))
    s = np.array([0.1, 0.5, 0.9, 0.999])
    exact = gamma_fn(b + 1) / gamma_fn(a + b + 1) * (1 - s) ** (a + b)
    # the kernel itself is singular at the breakpoint: accuracy is set by the
    # innermost graded cell, ~ (3^-levels)^(1+b)
    assert np.allclose(frac_transform(kern, a, s), exact, rtol=1e-7)


def test_transform_rejects_breakpoints_and_bad_order():
    with pytest.raises(DomainError):
        frac_transform(indicator(), 0.2, np.array([0.0]))
    with pytest.raises(DomainError):
        frac_transform(indicator(), 1.0, np.array([0.5]))


def test_piecewise_kernel_is_zero_on_breakpoints():
    kern = PiecewiseKernel(lambda v: 1.0 / v, (0.0, 1.0))
    assert kern(np.array([0.0]))[0] == 0.0
    with pytest.raises(DomainError):
        PiecewiseKernel(lambda v: v, (1.0, 0.0))


def test_integrate_square_of_indicator():
    total, tail = integrate_square(indicator(2.0), [0.0, 2.0], L=10.0)
    assert total == pytest.approx(2.0, rel=1e-13)
    assert tail == 0.0


@pytest.mark.parametrize("p", [-0.3, 0.2])
def test_integrate_square_with_half_line_tail(p):
    # int_{-inf}^{-1} |v|^{2p-2} dv = 1/(1-2p) with psi = |v|^{p-1} on (-inf, -1)
    def psi(v):
        return np.where(v < -1, np.abs(v) ** (p - 1), 0.0)

    total, tail = integrate_square(psi, [-1.0], L=4.0)
    # the mapped tail integrand behaves like x^(-2p) at x = 0
    assert total == pytest.approx(1 / (1 - 2 * p), rel=1e-8)
    assert tail == pytest.approx(4.0 ** (2 * p - 1) / (1 - 2 * p), rel=1e-8)
    body, _ = integrate_square(psi, [-1.0], L=4.0, truncate=True)
    assert body == pytest.approx(total - tail, rel=1e-12)


def test_integrate_square_needs_left_split():
    with pytest.raises(DomainError):
        integrate_square(indicator(), [-5.0, 1.0], L=4.0)


def _power_averages(beta, edges):
    return (edges[1:] ** (beta + 1) - edges[:-1] ** (beta + 1)) / ((beta + 1) * np.diff(edges))


@given(beta=st.floats(0.0, 2.0), n=st.integers(1, 40))
def test_cell_averages_of_regular_power(beta, n):
    edges = np.linspace(0.0, 1.0, n + 1)
    got = cell_averages(lambda x: x**beta, edges, singular_points=(0.0,))
    assert np.allclose(got, _power_averages(beta, edges), rtol=1e-9)


@pytest.mark.parametrize("beta", [-0.8, -0.5, -0.2])
def test_cell_averages_of_singular_power_converge_geometrically(beta):
    edges = np.array([0.0, 0.5, 1.0])
    exact = _power_averages(beta, edges)
    errs = [abs(cell_averages(lambda x: x**beta, edges, (0.0,), levels=lv)[0] - exact[0])
            for lv in (8, 12, 16, 20)]
    ratios = np.array(errs[1:]) / np.array(errs[:-1])
    assert np.all(ratios < 1.5 * 3.0 ** (-4 * (1 + beta)))


def test_cell_averages_two_sided_singularity():
    # x^-0.5 (1-x)^-0.5 on one cell averages to pi
    got = cell_averages(lambda x: (x * (1 - x)) ** -0.5, [0.0, 1.0], (0.0, 1.0), levels=20)
    assert got[0] == pytest.approx(np.pi, rel=1e-6)
    with pytest.raises(DomainError):
        cell_averages(np.sin, [0.0, 0.0, 1.0])
