import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fbm_transforms.frac_calc import (SampledFunction, frac_integral_indicator,
                                      marchaud_derivative, rl_derivative, rl_integral,
                                      rl_integral_steps, sample_function, sample_indicator,
                                      transformed_cell_averages)
from fbm_transforms.special import DomainError, gamma_fn


def bump(x):
    return np.where((x >= 0) & (x <= 1), (x * (1 - x)) ** 2 * np.exp(x), 0.0)


def sampled_bump(n):
    return sample_function(bump, -0.5, 1.5 / n, n + 1, 1.0)


def interior(f):
    g = f.grid
    return (g > -0.4) & (g < 0.9)


def observed_orders(errors):
    e = np.asarray(errors)
    return np.log2(e[:-1] / e[1:])


def refine(check, sizes=(200, 400, 800, 1600)):
    return [check(sampled_bump(n)) for n in sizes]


def test_semigroup_converges_at_first_order_or_better():
    def err(f):
        lhs = rl_integral(rl_integral(f, 0.3), 0.45).values
        rhs = rl_integral(f, 0.75).values
        return np.max(np.abs(lhs - rhs)[interior(f)])

    errors = refine(err)
    assert errors[-1] < 1e-6
    assert np.all(observed_orders(errors) >= 1.0)


@pytest.mark.parametrize("alpha,beta", [(0.3, 0.7), (0.6, 0.8), (0.2, 0.2)])
def test_derivative_of_integral(alpha, beta):
    def err(f):
        lhs = rl_derivative(rl_integral(f, beta), alpha).values
        rhs = f.values if alpha == beta else rl_integral(f, beta - alpha).values
        return np.max(np.abs(lhs - rhs)[interior(f)])

    errors = refine(err)
    assert errors[-1] < 1e-5
    assert np.all(observed_orders(errors) >= 1.0)


def test_marchaud_agrees_with_riemann_liouville():
    def err(f):
        lhs = marchaud_derivative(rl_integral(f, 0.7), 0.3, 4 * f.grid_step).values
        rhs = rl_integral(f, 0.4).values
        return np.max(np.abs(lhs - rhs)[interior(f)])

    errors = refine(err)
    assert errors[-1] < 1e-5
    assert np.all(observed_orders(errors) >= 1.0)


def test_marchaud_extrapolation_beats_plain_truncation():
    f = sampled_bump(800)
    ref = rl_integral(f, 0.4).values
    g = rl_integral(f, 0.7)
    eps = 8 * f.grid_step
    plain = marchaud_derivative(g, 0.3, eps, extrapolate=False).values
    extra = marchaud_derivative(g, 0.3, eps).values
    m = interior(f)
    assert np.max(np.abs(extra - ref)[m]) < 0.2 * np.max(np.abs(plain - ref)[m])


def test_integral_of_constant_on_half_line():
    # I^a 1_[0,1)(s) = (1-s)^a / G(a+1) for 0 <= s < 1
    alpha = 0.35
    n = 2000
    f = SampledFunction(0.0, 1.0 / n, np.ones(n + 1), 1.0)
    out = rl_integral(f, alpha)
    g = out.grid
    assert np.allclose(out.values, (1 - g) ** alpha / gamma_fn(alpha + 1), atol=1e-12)


@pytest.mark.parametrize("H", [0.3, 0.7])
def test_indicator_closed_form_matches_nodal_operator(H):
    errors = []
    for n in (300, 600, 1200):
        ind = sample_indicator(0.0, 1.0, -2.0, 3.0 / n, n + 1)
        out = rl_integral(ind, H - 0.5) if H > 0.5 else rl_derivative(ind, 0.5 - H)
        g = out.grid
        m = (np.abs(g) > 0.1) & (np.abs(g - 1) > 0.1) & (g < 0.9)
        errors.append(np.max(np.abs(out.values[m] - frac_integral_indicator(H, 1.0, g[m]))))
    assert errors[-1] < 2e-3
    assert np.all(observed_orders(errors) >= 0.9)


@pytest.mark.parametrize("H", [0.2, 0.3, 0.7, 0.85])
def test_indicator_cell_averages_are_exact(H):
    n = 128
    h = 1.0 / n
    edges = -3 + h * np.arange(4 * n + 1)
    cells = ((edges[:-1] >= 0) & (edges[:-1] < 1)).astype(float)
    got = transformed_cell_averages(cells, h, H - 0.5)

    def upper(x):  # I^{H+1/2} 1_[0,1)
        return (np.clip(1 - x, 0, None) ** (H + 0.5)
                - np.clip(-x, 0, None) ** (H + 0.5)) / gamma_fn(H + 1.5)

    exact = (upper(edges[:-1]) - upper(edges[1:])) / h
    assert np.max(np.abs(got - exact)) < 1e-11


def test_indicator_negative_t_flips_sign():
    s = np.array([-2.0, -0.7, 0.4])
    assert np.allclose(frac_integral_indicator(0.7, -1.0, s),
                       -frac_integral_indicator(0.7, 1.0, s + 1.0))


def test_steps_match_cell_averages_at_order_plus_one():
    rng = np.random.default_rng(3)
    v = rng.normal(size=50)
    h = 0.1
    nodes = rl_integral_steps(v, h, 1.3)
    avg = transformed_cell_averages(v, h, 0.3)
    assert np.allclose((nodes[:-1] - nodes[1:]) / h, avg, rtol=1e-10, atol=1e-12)


@given(arrays(float, 40, elements=st.floats(-5, 5)), arrays(float, 40, elements=st.floats(-5, 5)),
       st.floats(-3, 3), st.floats(0.05, 1.0))
def test_rl_integral_is_linear(x, y, c, alpha):
    x[-1] = y[-1] = 0.0
    fx = SampledFunction(0.0, 0.05, x, 1.95)
    fy = SampledFunction(0.0, 0.05, y, 1.95)
    lhs = rl_integral(fx.with_values(x + c * y), alpha).values
    rhs = rl_integral(fx, alpha).values + c * rl_integral(fy, alpha).values
    assert np.allclose(lhs, rhs, atol=1e-9)


@given(arrays(float, 30, elements=st.floats(0, 10)), st.floats(0.05, 1.0))
def test_rl_integral_preserves_sign(x, alpha):
    out = rl_integral(SampledFunction(0.0, 0.1, x, 10.0), alpha).values
    assert np.all(out >= -1e-12 * (1 + np.max(x)))


@given(arrays(float, 25, elements=st.floats(-5, 5)), st.floats(-0.9, 0.9))
def test_cell_averages_zero_row_and_order_zero(v, order):
    assert np.all(transformed_cell_averages(np.zeros_like(v), 0.1, order) == 0)
    assert np.array_equal(transformed_cell_averages(v, 0.1, 0.0), v)


def test_domain_errors():
    f = sampled_bump(10)
    with pytest.raises(DomainError):
        rl_integral(f, 0.0)
    with pytest.raises(DomainError):
        rl_integral(f, 1.5)
    with pytest.raises(DomainError):
        rl_derivative(f, 1.0)
    with pytest.raises(DomainError):
        marchaud_derivative(f, 0.3, 0.0)
    with pytest.raises(DomainError):
        transformed_cell_averages([1.0, 2.0], 0.1, 1.0)
    with pytest.raises(DomainError):
        SampledFunction(0.0, 0.1, np.ones(5), 0.15)      # non-zero right of support
    with pytest.raises(DomainError):
        frac_integral_indicator(0.3, 1.0, 0.0)
    with pytest.raises(DomainError):
        frac_integral_indicator(0.3, 0.0, 0.5)
