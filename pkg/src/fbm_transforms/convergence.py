"""Deterministic mean-square distance between the shifted compact and the
half-line representations, rate fits and bound checks.

Both processes are Wiener integrals against the same Brownian motion, so
their mean-square difference is a deterministic integral,

    Delta(s) = C(K,H)^2 C(K)^2  int (I^{K-1/2}_- (k - f))(v)^2 dv,

with ``f``, ``k`` the kernel differences of :func:`kernels.delta_kernels`.
For ``K = 1/2`` the operator is the identity and ``f``, ``k`` have disjoint
supports, so the integral splits into ``int f^2 + int k^2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import (BoundConstants, KernelSpec, aux_G_max, delta_kernels,
                      distance_bound, power_difference)
from .quadrature import PiecewiseKernel, frac_transform, integrate_square, rule_from_tol
from .special import DomainError, gamma_fn, hyp2f1, norm_C

__all__ = [
    "prefactor",
    "increment_kernel",
    "representation_variance",
    "representation_covariance",
    "variance_identity",
    "transformed_delta_f",
    "DistanceResult",
    "l2_distance",
    "l2_distance_detail",
    "tail_bound",
    "DistanceCurve",
    "distance_curve",
    "RateEstimate",
    "fit_rate",
    "BoundRow",
    "BoundReport",
    "BoundViolation",
    "check_bound",
    "write_distance_csv",
    "format_rate_summary",
]

DEFAULT_QUAD_TOL = 1e-8
DEFAULT_L_RULE = 4.0


def prefactor(spec: KernelSpec) -> float:
    """``C(K,H)^2 C(K)^2 = C(H)^2 / G(H-K+1)^2``."""
    return (norm_C(spec.H) / gamma_fn(spec.H - spec.K + 1)) ** 2


# ---------------------------------------------------------------------------
# variance of the half-line representation


def increment_kernel(spec: KernelSpec, t0: float, t1: float) -> PiecewiseKernel:
    """Unnormalised half-line kernel of ``Z_{t1} - Z_{t0}``, ``t0 < t1``.

    ``(t1 - v)_+^beta - (t0 - v)_+^beta``; with ``t0 = 0`` this is the
    integrand of ``Z_{t1}`` itself.
    """
    if not t0 < t1:
        raise DomainError(f"need t0 < t1, got {t0}, {t1}")
    beta = spec.beta
    gap = t1 - t0

    def func(v):
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape)
        left = v < t0
        mid = (v >= t0) & (v < t1)
        if beta == 0:
            out[mid] = 1.0
            return out
        out[left] = power_difference(t0 - v[left], gap, beta)
        out[mid] = (t1 - v[mid]) ** beta
        return out

    return PiecewiseKernel(func, (t0, t1), left_unbounded=True)


def _alpha(spec):
    return spec.K - 0.5


def _check_L(L):
    if not L > 0:
        raise DomainError(f"L must be positive, got {L}")


def representation_variance(spec: KernelSpec, t0: float, t1: float, L: float = 128.0,
                            quad_tol: float = DEFAULT_QUAD_TOL,
                            truncate: bool = False) -> float:
    """``E[(Z_{t1} - Z_{t0})^2]`` for the half-line representation, by quadrature.

    ``truncate=True`` drops the part of the ``v``-integral left of
    ``min(t0, 0) - L``.
    """
    _check_L(L)
    rule = rule_from_tol(quad_tol)
    kern = increment_kernel(spec, t0, t1)
    alpha = _alpha(spec)

    def psi(v):
        return frac_transform(kern, alpha, v, rule)

    split = L - min(t0, 0.0)
    total, _ = integrate_square(psi, kern.breaks, split, rule, truncate=truncate)
    return prefactor(spec) * total


def representation_covariance(spec: KernelSpec, t: float, t_prime: float,
                              L: float = 128.0,
                              quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """``E[Z_t Z_t']`` for ``t, t' > 0`` by polarisation of quadrature variances."""
    if not (t > 0 and t_prime > 0):
        raise DomainError("covariance needs t, t' > 0")
    v_t = representation_variance(spec, 0.0, t, L, quad_tol)
    v_tp = representation_variance(spec, 0.0, t_prime, L, quad_tol)
    if t == t_prime:
        return v_t
    lo, hi = sorted((t, t_prime))
    v_inc = representation_variance(spec, lo, hi, L, quad_tol)
    return 0.5 * (v_t + v_tp - v_inc)


def variance_identity(spec: KernelSpec, L: float = 128.0,
                      quad_tol: float = DEFAULT_QUAD_TOL,
                      truncate: bool = False) -> float:
    """Ratio of the quadrature variance of ``Z_t`` to ``t^(2H)``; ideally 1."""
    var = representation_variance(spec, 0.0, spec.t, L, quad_tol, truncate)
    return var / spec.t ** (2 * spec.H)


# ---------------------------------------------------------------------------
# distance between the representations


def transformed_delta_f(spec: KernelSpec, v):
    """Closed form of ``(I^{K-1/2}_- f)(v)`` for the far-left kernel difference.

    For ``v < -s``::

        (-s-v)^(K-1/2) / G(K+1/2) * [(t-v)^beta F(K-H, K-1/2, K+1/2, z1)
                                     - (-v)^beta F(K-H, K-1/2, K+1/2, z2)]

    with ``z1 = (-s-v)/(t-v)`` and ``z2 = (-s-v)/(-v)``; zero for ``v >= -s``.
    """
    s = spec.require_shift()
    K, H, t, beta = spec.K, spec.H, spec.t, spec.beta
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape)
    m = v < -s
    if not np.any(m) or beta == 0:
        return out
    vm = v[m]
    a, b, c = K - H, K - 0.5, K + 0.5
    f1 = hyp2f1(a, b, c, (-s - vm) / (t - vm), one_minus_z=(t + s) / (t - vm))
    f2 = hyp2f1(a, b, c, (-s - vm) / (-vm), one_minus_z=s / (-vm))
    out[m] = (-s - vm) ** (K - 0.5) / gamma_fn(K + 0.5) * (
        (t - vm) ** beta * np.asarray(f1) - (-vm) ** beta * np.asarray(f2))
    return out


@dataclass(frozen=True)
class DistanceResult:
    """Distance at one shift with its tail diagnostics (variance units).

    ``tail`` is the computed contribution of ``(-inf, -L)``; ``tail_bound``
    the analytic bound on the far-left part of that contribution.
    """

    s: float
    value: float
    tail: float
    tail_bound: float
    L: float


def tail_bound(spec: KernelSpec, s: float, L: float) -> float:
    """Analytic bound on ``prefactor * int_{-inf}^{-L} (I^{K-1/2} f)^2``.

    Uses ``|I^{K-1/2} f(v)|^2 <= c t^2 max(1, ((t+s)/s)^(2(H-K)))
    (-s-v)^(2K-1) (-v)^(2(H-K-1))`` with ``c = ((K-H)/G(K+1/2))^2 G1*^2``,
    and ``(-s-v)^(2K-1) <= max(1, (1-s/L)^(2K-1)) (-v)^(2K-1)``.
    """
    if spec.degenerate:
        return 0.0
    K, H, t = spec.K, spec.H, spec.t
    g1 = aux_G_max(1, spec, "star_right")
    coef = ((K - H) / gamma_fn(K + 0.5)) ** 2 * g1**2 * t**2
    coef *= max(1.0, ((t + s) / s) ** (2 * (H - K)))
    coef *= max(1.0, (1 - s / L) ** (2 * K - 1))
    return prefactor(spec) * coef * L ** (2 * H - 2) / (2 - 2 * H)


def _delta_kernel(spec, which):
    s, t = spec.shift_s, spec.t
    if which == "f":
        return PiecewiseKernel(lambda v: delta_kernels(spec, "f", v), (-s,),
                               left_unbounded=True)
    return PiecewiseKernel(lambda v: delta_kernels(spec, "k", v), (-s, 0.0, t))


def l2_distance_detail(spec: KernelSpec, s: float, L: float | None = None,
                       quad_tol: float = DEFAULT_QUAD_TOL,
                       truncate: bool = False) -> DistanceResult:
    """Mean-square distance at shift ``s`` with tail diagnostics.

    Parameters
    ----------
    spec : KernelSpec
        ``K``, ``H``, ``t``; any ``shift_s`` on it is replaced by ``s``.
    s : float
        Shift, > 0.
    L : float, optional
        Split point; defaults to ``4 s`` and must be ``>= 4 s``.  The part
        of the integral left of ``-L`` is integrated after mapping to a
        bounded interval, so the result barely depends on ``L``.
    quad_tol : float
        Target tolerance; sets the depth of geometric grading.
    truncate : bool
        Drop the part left of ``-L`` (what a simulation truncated at ``-L``
        sees).
    """
    if not s > 0:
        raise DomainError(f"s must be positive, got {s}")
    L = 4.0 * s if L is None else float(L)
    if L < 4 * s:
        raise DomainError(f"L = {L} must be at least 4 s = {4 * s}")
    sp = spec.with_shift(s)
    if sp.degenerate:
        return DistanceResult(float(s), 0.0, 0.0, 0.0, L)
    rule = rule_from_tol(quad_tol)
    alpha = _alpha(sp)
    t = sp.t
    kk = _delta_kernel(sp, "k")
    if alpha == 0:
        kf = _delta_kernel(sp, "f")
        f_tot, f_tail = integrate_square(kf, [-s], L, rule, truncate=truncate)
        k_tot, _ = integrate_square(kk, [-s, 0.0, t], L, rule)
        total, tail = f_tot + k_tot, f_tail
    else:
        def psi(v):
            return frac_transform(kk, alpha, v, rule) - transformed_delta_f(sp, v)

        total, tail = integrate_square(psi, [-s, 0.0, t], L, rule, truncate=truncate)
    pref = prefactor(sp)
    return DistanceResult(float(s), pref * total, pref * tail, tail_bound(sp, s, L), L)


def l2_distance(spec: KernelSpec, s: float, L: float | None = None,
                quad_tol: float = DEFAULT_QUAD_TOL, truncate: bool = False) -> float:
    """``E[Z^{H,s}_t - Z^H_t]^2`` by quadrature; see :func:`l2_distance_detail`."""
    return l2_distance_detail(spec, s, L, quad_tol, truncate).value


@dataclass(frozen=True)
class DistanceCurve:
    """Distances over a sequence of shifts."""

    spec: KernelSpec
    shifts: tuple
    distances: tuple
    method: str = "deterministic"
    truncation_L: float = DEFAULT_L_RULE
    quad_tol: float = DEFAULT_QUAD_TOL
    tail_bounds: tuple = ()

    def __post_init__(self):
        sh = np.asarray(self.shifts, dtype=float)
        if sh.size and np.any(np.diff(sh) <= 0):
            raise DomainError("shifts must be strictly increasing")
        if np.any(np.asarray(self.distances, dtype=float) < 0):
            raise DomainError("distances must be non-negative")
        if len(self.distances) != len(self.shifts):
            raise DomainError("shifts and distances differ in length")
        if self.method not in ("deterministic", "monte_carlo"):
            raise DomainError(f"unknown method {self.method!r}")


def distance_curve(spec: KernelSpec, shifts, L_rule: float = DEFAULT_L_RULE,
                   quad_tol: float = DEFAULT_QUAD_TOL,
                   truncate: bool = False) -> DistanceCurve:
    """Deterministic distances for each shift, with ``L = L_rule * s``.

    ``truncation_L`` on the result records ``L_rule``.
    """
    if L_rule < 4:
        raise DomainError(f"L_rule must be at least 4, got {L_rule}")
    shifts = tuple(float(s) for s in shifts)
    res = [l2_distance_detail(spec, s, L_rule * s, quad_tol, truncate) for s in shifts]
    return DistanceCurve(spec.with_shift(None), shifts,
                         tuple(max(r.value, 0.0) for r in res), "deterministic",
                         L_rule, quad_tol, tuple(r.tail_bound for r in res))


# ---------------------------------------------------------------------------
# rate fit


@dataclass(frozen=True)
class RateEstimate:
    """Least-squares fit of ``log Delta = intercept + slope log s``.

    ``target_exponent`` is ``2H - 2``; ``secondary_exponent`` is ``2K - 2``
    (relevant for ``K < 1/2``).
    """

    slope: float
    intercept: float
    max_residual: float
    fit_range: tuple
    target_exponent: float
    secondary_exponent: float

    def within(self, tol: float, exponent: float | None = None) -> bool:
        e = self.target_exponent if exponent is None else exponent
        return abs(self.slope - e) <= tol


def fit_rate(curve: DistanceCurve) -> RateEstimate:
    """Log-log regression over all points of ``curve`` (at least 4)."""
    s = np.asarray(curve.shifts, dtype=float)
    d = np.asarray(curve.distances, dtype=float)
    if s.size < 4:
        raise DomainError("rate fit needs at least 4 points")
    if np.any(d <= 0):
        raise DomainError("rate fit needs strictly positive distances")
    x, y = np.log(s), np.log(d)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (intercept + slope * x)
    return RateEstimate(float(slope), float(intercept), float(np.max(np.abs(resid))),
                        (float(s[0]), float(s[-1])), 2 * curve.spec.H - 2,
                        2 * curve.spec.K - 2)


# ---------------------------------------------------------------------------
# bound check


class BoundViolation(AssertionError):
    """A distance exceeded its bound."""


@dataclass(frozen=True)
class BoundRow:
    s: float
    delta: float
    bound: float
    margin: float


@dataclass(frozen=True)
class BoundReport:
    rows: tuple
    constants: BoundConstants
    truncated_maxima: tuple = field(default=())

    @property
    def passed(self) -> bool:
        return all(r.margin >= 1 for r in self.rows)

    @property
    def violations(self) -> tuple:
        return tuple(r.s for r in self.rows if r.margin < 1)

    def raise_on_violation(self):
        if not self.passed:
            raise BoundViolation(f"bound violated at shifts {self.violations}")


def check_bound(curve: DistanceCurve, constants: BoundConstants) -> BoundReport:
    """Compare each distance with its bound; ``margin = bound / delta``.

    A zero distance gets margin ``inf``.
    """
    shifts = np.asarray(curve.shifts, dtype=float)
    if np.any(shifts <= constants.valid_from_s):
        raise DomainError(f"all shifts must exceed {constants.valid_from_s}")
    bounds = np.atleast_1d(distance_bound(curve.spec, constants, shifts))
    rows = []
    for s, d, b in zip(shifts, curve.distances, bounds):
        margin = math.inf if d == 0 else float(b) / d
        rows.append(BoundRow(float(s), float(d), float(b), margin))
    return BoundReport(tuple(rows), constants, constants.truncated)


# ---------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    return repr(float(x)) if math.isfinite(x) else str(float(x))


def write_distance_csv(path, curve: DistanceCurve, report: BoundReport | None = None):
    """Write ``s, delta, tail_bound, bound_value, margin`` rows."""
    rows = report.rows if report is not None else None
    tails = curve.tail_bounds or (math.nan,) * len(curve.shifts)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s", "delta", "tail_bound", "bound_value", "margin"])
        for i, (s, d) in enumerate(zip(curve.shifts, curve.distances)):
            b = rows[i].bound if rows else math.nan
            m = rows[i].margin if rows else math.nan
            w.writerow([f"{s:.17g}", f"{d:.17g}", f"{tails[i]:.17g}",
                        f"{b:.17g}", f"{m:.17g}"])


def format_rate_summary(rate: RateEstimate, passed: bool, extra: dict | None = None) -> str:
    """Flat ``key=value`` lines."""
    items = {
        "slope": f"{rate.slope:.17g}",
        "intercept": f"{rate.intercept:.17g}",
        "max_residual": f"{rate.max_residual:.17g}",
        "target_exponent": f"{rate.target_exponent:.17g}",
        "secondary_exponent": f"{rate.secondary_exponent:.17g}",
        "fit_range": f"{rate.fit_range[0]:.17g}:{rate.fit_range[1]:.17g}",
    }
    for k, v in (extra or {}).items():
        items[k] = v if isinstance(v, str) else f"{v:.17g}"
    items["pass"] = "true" if passed else "false"
    return "".join(f"{k}={v}\n" for k, v in items.items())
