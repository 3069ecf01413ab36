"""Gauss hypergeometric function on (-inf, 1] plus gamma/beta helpers.

All hypergeometric evaluations are vectorised over the argument ``z`` while
the parameters ``a, b, c`` stay scalar; this is the access pattern of every
kernel in the package (fixed Hurst pair, many evaluation points).

Evaluation strategy
-------------------
* ``0 <= z <= 0.75``: power series.
* ``0.75 < z < 1``: the ``z -> 1 - z`` connection formula.  When
  ``c - a - b`` is an integer the logarithmic form is used instead, and
  near-integer values are handled by polynomial interpolation in ``c``.
* ``z < 0``: Pfaff transformation ``(1-z)^{-a} F(a, c-b; c; z/(z-1))``.
* ``z == 1``: Gauss summation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma

__all__ = [
    "DomainError",
    "ConvergenceError",
    "HypParams",
    "EvalOptions",
    "gamma_fn",
    "rgamma",
    "beta_fn",
    "hyp2f1",
    "hyp2f1_series",
    "hyp2f1_at_one",
    "hyp2f1_dz",
    "power_weighted_integral",
    "power_weighted_integral_forms",
    "contiguity_residual",
    "norm_C",
    "norm_CKH",
]

# switch point between the direct series and the 1-z connection formula
_SERIES_CUTOFF = 0.75
# |c-a-b - n| below this is treated as the integer n
_INTEGER_TOL = 1e-12
# width of the band around integer c-a-b handled by interpolation
_NEAR_INTEGER_BAND = 1e-3


class DomainError(ValueError):
    """Argument outside the domain where a function is defined here."""


class ConvergenceError(ArithmeticError):
    """A series or quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class EvalOptions:
    rel_tol: float = 1e-14
    max_terms: int = 10000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise DomainError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.max_terms < 1:
            raise DomainError(f"max_terms must be >= 1, got {self.max_terms}")


DEFAULT_OPTIONS = EvalOptions()


@dataclass(frozen=True)
class HypParams:
    """Parameters ``(a, b, c)`` and argument ``z`` of ``2F1``."""

    a: float
    b: float
    c: float
    z: float

    def __post_init__(self):
        _check_params(self.a, self.b, self.c, np.asarray(self.z, dtype=float))

    def evaluate(self, opts: EvalOptions | None = None) -> float:
        return hyp2f1(self.a, self.b, self.c, self.z, opts)


def _is_nonpos_int(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def _check_params(a, b, c, z):
    if _is_nonpos_int(c):
        raise DomainError(f"c = {c} is a non-positive integer")
    if np.any(np.isnan(z)):
        raise DomainError("z is NaN")
    if np.any(z > 1):
        raise DomainError("z must be <= 1")
    if np.any(z == 1) and not _gauss_sum_ok(a, b, c):
        raise DomainError(
            f"F({a}, {b}, {c}, 1) diverges: c - a - b = {c - a - b} <= 0"
        )


def _gauss_sum_ok(a, b, c):
    if a == 0 or b == 0:
        return True
    if _is_nonpos_int(a) or _is_nonpos_int(b):
        return not _is_nonpos_int(c - a - b) or c - a - b > 0
    return c - a - b > 0


# ---------------------------------------------------------------------------
# gamma and beta


def gamma_fn(x: float) -> float:
    """Gamma function; raises :class:`DomainError` at the poles."""
    if _is_nonpos_int(x):
        raise DomainError(f"gamma has a pole at {x}")
    try:
        return math.gamma(x)
    except OverflowError as exc:
        raise DomainError(f"gamma({x}) overflows") from exc


def rgamma(x: float) -> float:
    """Reciprocal gamma, equal to zero at the poles."""
    if _is_nonpos_int(x):
        return 0.0
    return 1.0 / math.gamma(x)


def beta_fn(x: float, y: float) -> float:
    """Beta function ``Gamma(x) Gamma(y) / Gamma(x + y)``."""
    for v in (x, y, x + y):
        if _is_nonpos_int(v):
            raise DomainError(f"beta({x}, {y}): gamma pole at {v}")
    try:
        return math.gamma(x) * math.gamma(y) / math.gamma(x + y)
    except OverflowError:
        sign = _gamma_sign(x) * _gamma_sign(y) * _gamma_sign(x + y)
        return sign * math.exp(math.lgamma(x) + math.lgamma(y) - math.lgamma(x + y))


def _gamma_sign(x):
    return 1.0 if x > 0 else (-1.0) ** (math.floor(-x) + 1)


# ---------------------------------------------------------------------------
# series kernels


def _sum_series(ratio, z, rel_tol, max_terms, first=None):
    """Sum ``sum_k t_k`` with ``t_{k+1} = t_k * ratio(k) * z``.

    Stops once the geometric tail estimate ``|t_k| / (1 - |z|)`` is below
    ``rel_tol * |S_k|`` for three consecutive ``k``.
    """
    z = np.asarray(z, dtype=float)
    tail = 1.0 / (1.0 - np.minimum(np.abs(z), 0.999))
    term = np.ones_like(z) if first is None else np.array(first, dtype=float)
    total = term.copy()
    quiet = np.zeros(z.shape, dtype=np.int8)
    for k in range(max_terms):
        term = term * (ratio(k) * z)
        total = total + term
        small = np.abs(term) * tail <= rel_tol * np.abs(total)
        quiet = np.where(small, np.minimum(quiet + 1, 3), 0)
        if np.all(quiet >= 3):
            return total
    raise ConvergenceError(
        f"series did not converge in {max_terms} terms (max |z| = {np.max(np.abs(z))})"
    )


def hyp2f1_series(a, b, c, z, opts: EvalOptions | None = None):
    """Plain power series of ``2F1``; valid for ``|z| < 1``."""
    opts = opts or DEFAULT_OPTIONS
    z = np.asarray(z, dtype=float)
    if np.any(np.abs(z) >= 1):
        raise DomainError("power series needs |z| < 1")
    if _is_nonpos_int(c):
        raise DomainError(f"c = {c} is a non-positive integer")
    out = _sum_series(lambda k: (a + k) * (b + k) / ((c + k) * (k + 1)), z,
                      opts.rel_tol, opts.max_terms)
    return out[()] if out.ndim == 0 else out


def _polynomial(a, b, c, z):
    # a is a non-positive integer: the series terminates after -a terms
    z = np.asarray(z, dtype=float)
    term = np.ones_like(z)
    total = term.copy()
    for k in range(int(-a)):
        term = term * ((a + k) * (b + k) / ((c + k) * (k + 1)) * z)
        total = total + term
    return total


def _connection(a, b, c, x, opts, y=None):
    """``z -> 1 - z`` connection formula, non-integer ``c - a - b``."""
    m = c - a - b
    y = 1.0 - x if y is None else y
    ga = gamma_fn(c) * gamma_fn(m) * rgamma(c - a) * rgamma(c - b)
    gb = gamma_fn(c) * gamma_fn(-m) * rgamma(a) * rgamma(b)
    out = np.zeros_like(x)
    if ga != 0.0:
        out = out + ga * _sum_series(
            lambda k: (a + k) * (b + k) / ((1 - m + k) * (k + 1)), y,
            opts.rel_tol, opts.max_terms)
    if gb != 0.0:
        out = out + gb * y**m * _sum_series(
            lambda k: (c - a + k) * (c - b + k) / ((1 + m + k) * (k + 1)), y,
            opts.rel_tol, opts.max_terms)
    return out


def _log_case(a, b, n, x, opts, y=None):
    """``F(a, b; a+b+n; x)`` for integer ``n >= 0`` and ``x`` near 1.

    Logarithmic connection formula (Abramowitz & Stegun 15.3.11).
    """
    c = a + b + n
    y = 1.0 - x if y is None else y
    gc = gamma_fn(c)
    finite = np.zeros_like(x)
    if n > 0:
        coef = gc * rgamma(a + n) * rgamma(b + n)
        term = math.factorial(n - 1) * np.ones_like(x)
        finite = term.copy()
        for k in range(1, n):
            term = term * ((a + k - 1) * (b + k - 1) / (k * (n - k)) * (-y))
            finite = finite + term
        finite = coef * finite

    pref = gc * rgamma(a) * rgamma(b)
    if pref == 0.0:
        return finite
    log_y = np.log(y)
    # t_k = (a+n)_k (b+n)_k / (k! (k+n)!) y^k
    t = np.full_like(x, 1.0 / math.factorial(n))
    # q_k = psi(k+1) + psi(k+n+1) - psi(a+k+n) - psi(b+k+n)
    q = digamma(1.0) + digamma(n + 1.0) - digamma(a + n) - digamma(b + n)
    total = t * (log_y - q)
    quiet = np.zeros(x.shape, dtype=np.int8)
    for k in range(opts.max_terms):
        t = t * ((a + n + k) * (b + n + k) / ((k + 1) * (k + 1 + n)) * y)
        q = q + 1.0 / (k + 1) + 1.0 / (k + 1 + n) - 1.0 / (a + n + k) - 1.0 / (b + n + k)
        inc = t * (log_y - q)
        total = total + inc
        small = np.abs(inc) <= opts.rel_tol * np.abs(total)
        quiet = np.where(small, np.minimum(quiet + 1, 3), 0)
        if np.all(quiet >= 3):
            break
    else:
        raise ConvergenceError("logarithmic connection series did not converge")
    return finite - pref * (-y) ** n * total


def _integer_case(a, b, n, x, opts, y):
    if n >= 0:
        return _log_case(a, b, n, x, opts, y)
    # Euler: F(a,b;c;x) = (1-x)^{c-a-b} F(c-a, c-b; c; x)
    c = a + b + n
    return y ** n * _unit(c - a, c - b, c, x, opts, y)


def _near_one(a, b, c, x, opts, y):
    m = c - a - b
    n = round(m)
    delta = m - n
    if abs(delta) <= _INTEGER_TOL:
        return _integer_case(a, b, n, x, opts, y)
    if abs(delta) < _NEAR_INTEGER_BAND:
        # F is analytic in c: interpolate through the integer point and four
        # points far enough from it for the connection formula to be stable.
        h = _NEAR_INTEGER_BAND
        nodes = (-2 * h, -h, 0.0, h, 2 * h)
        vals = [_integer_case(a, b, n, x, opts, y) if d == 0.0
                else _connection(a, b, a + b + n + d, x, opts, y) for d in nodes]
        out = np.zeros_like(x)
        for i, di in enumerate(nodes):
            w = 1.0
            for j, dj in enumerate(nodes):
                if j != i:
                    w *= (delta - dj) / (di - dj)
            out = out + w * vals[i]
        return out
    return _connection(a, b, c, x, opts, y)


def _unit(a, b, c, x, opts, y=None):
    """``F(a, b; c; x)`` for an array ``x`` in ``[0, 1)``; ``y = 1 - x``."""
    if y is None:
        y = 1.0 - x
    if a == 0 or b == 0:
        return np.ones_like(x)
    if _is_nonpos_int(a):
        return _polynomial(a, b, c, x)
    if _is_nonpos_int(b):
        return _polynomial(b, a, c, x)
    out = np.empty_like(x)
    lo = x <= _SERIES_CUTOFF
    if np.any(lo):
        out[lo] = _sum_series(lambda k: (a + k) * (b + k) / ((c + k) * (k + 1)),
                              x[lo], opts.rel_tol, opts.max_terms)
    if not np.all(lo):
        out[~lo] = _near_one(a, b, c, x[~lo], opts, y[~lo])
    return out


def hyp2f1(a, b, c, z, opts: EvalOptions | None = None, one_minus_z=None):
    """Gauss hypergeometric function ``F(a, b, c, z)`` for ``z <= 1``.

    Parameters
    ----------
    a, b, c : float
        Parameters; ``c`` must not be a non-positive integer.
    z : float or array_like
        Argument(s) in ``(-inf, 1]``.  ``z == 1`` requires ``c - a - b > 0``.
    opts : EvalOptions, optional
        Series tolerance and term budget.
    one_minus_z : float or array_like, optional
        ``1 - z`` computed by the caller without cancellation.  Worth passing
        when ``z`` is close to 1 or very negative.

    Returns
    -------
    float or ndarray
        Same shape as ``z``.

    Raises
    ------
    DomainError
        Inadmissible parameters or argument.
    ConvergenceError
        A series did not settle within ``opts.max_terms`` terms.
    """
    opts = opts or DEFAULT_OPTIONS
    a, b, c = float(a), float(b), float(c)
    if b < a:
        a, b = b, a
    z_arr = np.asarray(z, dtype=float)
    _check_params(a, b, c, z_arr)
    zf = np.atleast_1d(z_arr).astype(float)
    out = np.ones_like(zf)
    if a == 0 or b == 0:
        return _shape_like(out, z_arr)

    at_one = zf == 1.0
    if np.any(at_one):
        out[at_one] = hyp2f1_at_one(a, b, c)
    if one_minus_z is None:
        omz = 1.0 - zf
    else:
        omz = np.broadcast_to(np.asarray(one_minus_z, dtype=float), z_arr.shape)
        omz = np.atleast_1d(omz).astype(float)
    pos = (zf > 0) & ~at_one
    if np.any(pos):
        out[pos] = _unit(a, b, c, zf[pos], opts, omz[pos])
    neg = zf < 0
    if np.any(neg):
        # Pfaff: F(a,b,c,z) = q^a F(a, c-b, c, 1-q) with q = 1/(1-z)
        q = 1.0 / omz[neg]
        out[neg] = q**a * _unit(a, c - b, c, 1.0 - q, opts, q)
    return _shape_like(out, z_arr)


def _shape_like(out, z_arr):
    if z_arr.ndim == 0:
        return float(out[0])
    return out.reshape(z_arr.shape)


def hyp2f1_at_one(a: float, b: float, c: float) -> float:
    """Gauss summation ``F(a,b,c,1) = G(c)G(c-a-b) / (G(c-a)G(c-b))``."""
    if _is_nonpos_int(c):
        raise DomainError(f"c = {c} is a non-positive integer")
    if a == 0 or b == 0:
        return 1.0
    if not _gauss_sum_ok(a, b, c):
        raise DomainError(f"F({a}, {b}, {c}, 1) diverges: c - a - b <= 0")
    if _is_nonpos_int(c - a - b):
        # only reachable for terminating series; fall back to the polynomial
        lead = a if _is_nonpos_int(a) else b
        other = b if lead is a else a
        return float(_polynomial(lead, other, c, np.array([1.0]))[0])
    return gamma_fn(c) * gamma_fn(c - a - b) * rgamma(c - a) * rgamma(c - b)


def hyp2f1_dz(a, b, c, z, opts: EvalOptions | None = None):
    """Derivative ``d/dz F(a,b,c,z) = (ab/c) F(a+1, b+1, c+1, z)``."""
    if a == 0 or b == 0:
        z_arr = np.asarray(z, dtype=float)
        return 0.0 if z_arr.ndim == 0 else np.zeros_like(z_arr)
    return (a * b / c) * hyp2f1(a + 1, b + 1, c + 1, z, opts)


# ---------------------------------------------------------------------------
# integrals and identities


def power_weighted_integral_forms(a, b, c, w, x, y, geometry="w_below"):
    """Both closed forms of ``int_x^y (y-u)^b |u-w|^c (u-x)^a du``.

    Returns the pair ``(first, second)`` built from the two hypergeometric
    arguments ``(y-x)/(w-x)`` and ``(y-x)/(y-w)``.
    """
    if not (a > -1 and b > -1):
        raise DomainError(f"need a, b > -1, got a={a}, b={b}")
    if geometry == "w_below":
        if not w < x < y:
            raise DomainError(f"w_below needs w < x < y, got {w}, {x}, {y}")
        first_w, second_w = x - w, y - w
    elif geometry == "w_above":
        if not x < y < w:
            raise DomainError(f"w_above needs x < y < w, got {x}, {y}, {w}")
        first_w, second_w = w - x, w - y
    else:
        raise DomainError(f"unknown geometry {geometry!r}")
    pref = beta_fn(a + 1, b + 1) * (y - x) ** (1 + a + b)
    first = pref * first_w**c * hyp2f1(-c, a + 1, a + 2 + b, (y - x) / (w - x))
    second = pref * second_w**c * hyp2f1(-c, b + 1, a + 2 + b, (y - x) / (y - w))
    return first, second


def power_weighted_integral(a, b, c, w, x, y, geometry="w_below") -> float:
    """Closed form of ``int_x^y (y-u)^b |u-w|^c (u-x)^a du``.

    ``geometry="w_below"`` needs ``w < x < y``; ``"w_above"`` needs
    ``x < y < w``.  The form whose hypergeometric argument lies in
    ``[0, 1)`` is returned (no Pfaff step needed).
    """
    first, second = power_weighted_integral_forms(a, b, c, w, x, y, geometry)
    return second if geometry == "w_below" else first


def contiguity_residual(a, b, c, z, opts: EvalOptions | None = None):
    """Left-hand side of a three-term contiguity relation; ideally zero.

    ``-c F(a,b-1,c,z) + (c-b+zb-za) F(a,b,c+1,z) + b(1-z) F(a,b+1,c+1,z)``
    """
    z = np.asarray(z, dtype=float)
    if np.any(z >= 1):
        raise DomainError("contiguity residual needs z < 1")
    r = (-c * hyp2f1(a, b - 1, c, z, opts)
         + (c - b + z * b - z * a) * hyp2f1(a, b, c + 1, z, opts)
         + b * (1 - z) * hyp2f1(a, b + 1, c + 1, z, opts))
    return float(r) if np.ndim(r) == 0 else r


# ---------------------------------------------------------------------------
# fBm normalisation constants


def _check_hurst(h, name="H"):
    if not 0 < h < 1:
        raise DomainError(f"{name} must lie in (0, 1), got {h}")


def norm_C(H: float) -> float:
    """``C(H) = (2H G(H+1/2) G(3/2-H) / G(2-2H))^{1/2}``."""
    _check_hurst(H)
    return math.sqrt(2 * H * gamma_fn(H + 0.5) * gamma_fn(1.5 - H) / gamma_fn(2 - 2 * H))


def norm_CKH(K: float, H: float) -> float:
    """``C(K, H) = C(H) / (C(K) G(H-K+1))``."""
    _check_hurst(K, "K")
    _check_hurst(H)
    return norm_C(H) / norm_C(K) / gamma_fn(H - K + 1)
