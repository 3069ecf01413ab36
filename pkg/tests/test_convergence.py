import math

import numpy as np
import pytest

from fbm_transforms.convergence import (DistanceCurve, check_bound, distance_curve,
                                        fit_rate, format_rate_summary, increment_kernel,
                                        l2_distance, l2_distance_detail, prefactor,
                                        representation_covariance, representation_variance,
                                        tail_bound, transformed_delta_f, variance_identity,
                                        write_distance_csv)
from fbm_transforms.kernels import KernelSpec, bound_constants, delta_kernels
from fbm_transforms.quadrature import PiecewiseKernel, frac_transform
from fbm_transforms.simulate import fbm_covariance
from fbm_transforms.special import DomainError


@pytest.mark.parametrize("H", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("t", [1.0, 2.0])
def test_variance_identity_half(H, t):
    assert variance_identity(KernelSpec(0.5, H, t), L=128.0) == pytest.approx(1.0, rel=1e-6)


def test_variance_identity_general_K():
    assert variance_identity(KernelSpec(0.7, 0.4), L=128.0) == pytest.approx(1.0, rel=1e-6)


def test_truncated_variance_is_smaller():
    sp = KernelSpec(0.5, 0.3)
    full = representation_variance(sp, 0.0, 1.0, L=8.0)
    cut = representation_variance(sp, 0.0, 1.0, L=8.0, truncate=True)
    assert cut < full
    # the discarded part is int_{-inf}^{-8} ((1-v)^b - (-v)^b)^2 dv ~ b^2 8^(2b-1)/(1-2b)
    b = sp.beta
    assert (full - cut) / prefactor(sp) == pytest.approx(b**2 * 8 ** (2 * b - 1) / (1 - 2 * b),
                                                         rel=0.2)


@pytest.mark.parametrize("K,H,t,tp", [(0.5, 0.7, 0.5, 1.0), (0.7, 0.4, 1.0, 2.0),
                                      (0.5, 0.3, 1.0, 1.0)])
def test_covariance_by_polarisation(K, H, t, tp):
    got = representation_covariance(KernelSpec(K, H), t, tp, L=64.0)
    assert got == pytest.approx(fbm_covariance(H, t, tp), rel=1e-6)


def test_covariance_needs_positive_times():
    with pytest.raises(DomainError):
        representation_covariance(KernelSpec(0.5, 0.3), 0.0, 1.0)


def test_increment_kernel_values():
    sp = KernelSpec(0.5, 0.75)
    kern = increment_kernel(sp, 0.0, 1.0)
    v = np.array([-3.0, 0.5, 1.5])
    assert np.allclose(kern(v), [4**0.25 - 3**0.25, 0.5**0.25, 0.0], rtol=1e-14)
    with pytest.raises(DomainError):
        increment_kernel(sp, 1.0, 1.0)


@pytest.mark.parametrize("K,H", [(0.3, 0.6), (0.7, 0.4)])
def test_transformed_delta_f_matches_quadrature(K, H):
    sp = KernelSpec(K, H, 1.0, 4.0)
    kf = PiecewiseKernel(lambda v: delta_kernels(sp, "f", v), (-4.0,), left_unbounded=True)
    v = np.array([-40.0, -9.0, -5.0, -4.3])
    got = transformed_delta_f(sp, v)
    ref = frac_transform(kf, K - 0.5, v)
    assert np.allclose(got, ref, rtol=1e-7, atol=0)
    assert np.all(transformed_delta_f(sp, np.array([-3.9, 0.0, 2.0])) == 0)


# ---------------------------------------------------------------------------
# distance


def test_distance_is_insensitive_to_split_and_tolerance():
    sp = KernelSpec(0.5, 0.7)
    base = l2_distance(sp, 16.0)
    assert l2_distance(sp, 16.0, L=128.0) == pytest.approx(base, rel=1e-8)
    assert l2_distance(sp, 32.0, L=256.0) == pytest.approx(l2_distance(sp, 32.0), rel=1e-8)
    # halving the quadrature tolerance repeatedly changes the value less and less
    vals = [l2_distance(sp, 16.0, quad_tol=q) for q in (1e-4, 5e-5, 2.5e-5)]
    assert abs(vals[2] - vals[1]) <= abs(vals[1] - vals[0]) + 1e-15
    assert vals[2] == pytest.approx(base, rel=1e-4)


def test_tail_is_reported_and_bounded():
    sp = KernelSpec(0.5, 0.3)
    res = l2_distance_detail(sp, 8.0, L=32.0)
    assert 0 < res.tail <= res.tail_bound
    cut = l2_distance(sp, 8.0, L=32.0, truncate=True)
    assert cut == pytest.approx(res.value - res.tail, rel=1e-10)
    assert tail_bound(sp, 8.0, 64.0) < res.tail_bound


def test_distance_decreases_with_shift():
    sp = KernelSpec(0.5, 0.3)
    d = [l2_distance(sp, s) for s in (8.0, 16.0, 32.0, 64.0)]
    assert np.all(np.diff(d) < 0)


def test_degenerate_distance_is_zero():
    assert l2_distance(KernelSpec(0.4, 0.4), 10.0) == 0.0


def test_distance_domain_errors():
    sp = KernelSpec(0.5, 0.3)
    with pytest.raises(DomainError):
        l2_distance(sp, 0.0)
    with pytest.raises(DomainError):
        l2_distance(sp, 10.0, L=39.0)
    with pytest.raises(DomainError):
        distance_curve(sp, [8.0, 16.0], L_rule=3.0)


# ---------------------------------------------------------------------------
# rate fit and bounds


def _synthetic_curve(exponent, noise=0.0, H=0.7):
    s = np.array([8.0, 16.0, 32.0, 64.0, 128.0])
    rng = np.random.default_rng(0)
    d = 0.3 * s**exponent * np.exp(noise * rng.standard_normal(s.size))
    return DistanceCurve(KernelSpec(0.5, H), tuple(s), tuple(d))


def test_fit_rate_recovers_synthetic_exponent():
    rate = fit_rate(_synthetic_curve(-0.6))
    assert rate.slope == pytest.approx(-0.6, abs=1e-12)
    assert rate.intercept == pytest.approx(math.log(0.3), abs=1e-12)
    assert rate.max_residual < 1e-12
    assert rate.target_exponent == pytest.approx(2 * 0.7 - 2)
    assert rate.within(0.01)
    assert not rate.within(0.01, exponent=-1.0)


def test_fit_rate_needs_enough_positive_points():
    curve = DistanceCurve(KernelSpec(0.5, 0.7), (1.0, 2.0, 3.0), (1.0, 0.5, 0.3))
    with pytest.raises(DomainError):
        fit_rate(curve)
    curve = DistanceCurve(KernelSpec(0.5, 0.7), (1.0, 2.0, 3.0, 4.0), (1.0, 0.5, 0.0, 0.1))
    with pytest.raises(DomainError):
        fit_rate(curve)


def test_distance_curve_validation():
    sp = KernelSpec(0.5, 0.7)
    with pytest.raises(DomainError):
        DistanceCurve(sp, (2.0, 1.0), (0.1, 0.2))
    with pytest.raises(DomainError):
        DistanceCurve(sp, (1.0, 2.0), (0.1, -0.2))
    with pytest.raises(DomainError):
        DistanceCurve(sp, (1.0, 2.0), (0.1,))
    with pytest.raises(DomainError):
        DistanceCurve(sp, (1.0, 2.0), (0.1, 0.2), method="guess")


def test_short_rate_curve_and_bound():
    sp = KernelSpec(0.5, 0.3)
    curve = distance_curve(sp, [8.0, 16.0, 32.0, 64.0])
    rate = fit_rate(curve)
    assert rate.within(0.15)
    report = check_bound(curve, bound_constants(sp))
    assert report.passed
    assert report.violations == ()
    report.raise_on_violation()
    assert all(r.margin > 1 for r in report.rows)


def test_bound_violation_is_reported():
    from fbm_transforms.convergence import BoundViolation

    sp = KernelSpec(0.5, 0.3)
    consts = bound_constants(sp)
    huge = DistanceCurve(sp, (8.0, 16.0), (1e6, 1e-12))
    report = check_bound(huge, consts)
    assert not report.passed
    assert report.violations == (8.0,)
    with pytest.raises(BoundViolation):
        report.raise_on_violation()
    with pytest.raises(DomainError):
        check_bound(DistanceCurve(sp, (1.0, 16.0), (0.1, 0.01)), consts)


def test_degenerate_curve_and_bound():
    sp = KernelSpec(0.6, 0.6)
    curve = distance_curve(sp, [8.0, 16.0])
    assert curve.distances == (0.0, 0.0)
    report = check_bound(curve, bound_constants(sp))
    assert report.passed
    assert all(r.margin == math.inf and r.bound == 0 for r in report.rows)


def test_csv_and_summary_output(tmp_path):
    curve = _synthetic_curve(-0.6)
    report = check_bound(curve, bound_constants(curve.spec))
    path = tmp_path / "d.csv"
    write_distance_csv(path, curve, report)
    lines = path.read_text().splitlines()
    assert lines[0] == "s,delta,tail_bound,bound_value,margin"
    assert len(lines) == 6
    first = lines[1].split(",")
    assert float(first[0]) == 8.0
    assert float(first[1]) == curve.distances[0]
    assert first[2] == "nan"
    assert float(first[4]) == pytest.approx(report.rows[0].margin, rel=1e-15)

    text = format_rate_summary(fit_rate(curve), True, {"K": 0.5, "note": "x"})
    kv = dict(line.split("=", 1) for line in text.splitlines())
    assert float(kv["slope"]) == pytest.approx(-0.6, abs=1e-12)
    assert kv["pass"] == "true"
    assert kv["note"] == "x"
    assert float(kv["K"]) == 0.5
    assert text.endswith("pass=true\n")
