"""Closed-form kernels linking fBm with different Hurst indices.

Notation: ``K`` is the Hurst index of the driving process, ``H`` the index
of the represented one, ``beta = H - K`` and

    Fhat(z) = F(1 - K - H, H - K, 1 + H - K, z).

The compact-interval (Molchan-Golosov type) kernel on ``(0, t)`` is
``C(K,H) (t-u)^beta Fhat((u-t)/u)``; the half-line (Mandelbrot-Van Ness
type) kernel is ``C(K,H) [(t-v)_+^beta - (-v)_+^beta]``.  Shifting the
compact representation to ``(-s, t)`` and comparing with the half-line one
produces the kernel differences returned by :func:`delta_kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .special import (DomainError, gamma_fn, hyp2f1, hyp2f1_at_one, norm_C,
                      norm_CKH)

__all__ = [
    "KernelSpec",
    "fhat",
    "power_difference",
    "mg_kernel",
    "mvn_kernel",
    "mvn_integrand",
    "shifted_mg_integrand",
    "delta_kernels",
    "aux_G",
    "aux_G_derivative",
    "aux_G_max",
    "aux_G_max_detail",
    "GMax",
    "BoundConstants",
    "bound_constants",
]


@dataclass(frozen=True)
class KernelSpec:
    """Hurst pair, horizon and optional shift.

    Parameters
    ----------
    K : float
        Hurst index of the driver, in (0, 1).
    H : float
        Hurst index of the represented process, in (0, 1).
    t : float
        Horizon, > 0.
    shift_s : float, optional
        Shift ``s > 0`` of the compact representation.
    """

    K: float
    H: float
    t: float = 1.0
    shift_s: float | None = None

    def __post_init__(self):
        for name in ("K", "H"):
            val = getattr(self, name)
            if not 0 < val < 1:
                raise DomainError(f"{name} must lie in (0, 1), got {val}")
        if not self.t > 0:
            raise DomainError(f"t must be positive, got {self.t}")
        if self.shift_s is not None and not self.shift_s > 0:
            raise DomainError(f"shift_s must be positive, got {self.shift_s}")

    @property
    def beta(self) -> float:
        return self.H - self.K

    @property
    def degenerate(self) -> bool:
        """``K == H``: every kernel reduces to an indicator."""
        return self.H == self.K

    def with_shift(self, s) -> "KernelSpec":
        return KernelSpec(self.K, self.H, self.t, None if s is None else float(s))

    def require_shift(self) -> float:
        if self.shift_s is None:
            raise DomainError("this kernel needs shift_s")
        return self.shift_s


def _scalar_or_array(out, like):
    return float(out) if np.ndim(like) == 0 else out


def fhat(spec: KernelSpec, z, one_minus_z=None):
    """``F(1-K-H, H-K, 1+H-K, z)`` for ``z <= 1``."""
    K, H = spec.K, spec.H
    return hyp2f1(1 - K - H, H - K, 1 + H - K, z, one_minus_z=one_minus_z)


def power_difference(base, gap, beta):
    """``(base + gap)^beta - base^beta`` for ``base > 0``, ``gap >= 0``.

    Written as ``base^beta * expm1(beta * log1p(gap/base))`` so that the far
    tail, where the two powers nearly cancel, keeps full relative accuracy.
    For ``gap > base`` there is no cancellation and the powers are subtracted
    directly (this also avoids overflow of ``gap/base`` for tiny bases).
    """
    base = np.asarray(base, dtype=float)
    gap = np.broadcast_to(np.asarray(gap, dtype=float), base.shape)
    near = gap <= base
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        stable = base**beta * np.expm1(beta * np.log1p(gap / base))
        direct = (base + gap) ** beta - base**beta
    out = np.where(near, stable, direct)
    return float(out) if out.ndim == 0 else out


def _check_singular(spec, v, points):
    if spec.beta < 0:
        for p in points:
            if np.any(v == p):
                raise DomainError(f"kernel is singular at v = {p} for H < K")


# ---------------------------------------------------------------------------
# representation kernels


def mg_kernel(spec: KernelSpec, u):
    """Compact-interval kernel ``C(K,H) (t-u)^(H-K) Fhat((u-t)/u)`` on ``(0, t)``.

    The hypergeometric argument tends to ``-inf`` as ``u -> 0``; it is passed
    together with the exact complement ``1 - z = t/u`` so the Pfaff-mapped
    argument keeps its accuracy there.
    """
    u_arr = np.asarray(u, dtype=float)
    t = spec.t
    if np.any((u_arr <= 0) | (u_arr >= t)):
        raise DomainError(f"u must lie in (0, {t})")
    if spec.degenerate:
        return _scalar_or_array(np.ones_like(u_arr), u_arr)
    val = (t - u_arr) ** spec.beta * fhat(spec, (u_arr - t) / u_arr,
                                          one_minus_z=t / u_arr)
    return _scalar_or_array(norm_CKH(spec.K, spec.H) * val, u_arr)


def mvn_integrand(spec: KernelSpec, v, t=None):
    """``(t-v)_+^beta - (-v)_+^beta`` without the constant (zero for ``v >= t``)."""
    v = np.asarray(v, dtype=float)
    t = spec.t if t is None else t
    beta = spec.beta
    out = np.zeros(v.shape)
    left = v < 0
    mid = (v >= 0) & (v < t)
    if beta == 0:
        out[mid] = 1.0
        return out
    out[left] = power_difference(-v[left], t, beta)
    out[mid] = (t - v[mid]) ** beta
    return out


def mvn_kernel(spec: KernelSpec, v):
    """Half-line kernel ``C(K,H) [(t-v)^beta 1_{v<t} - (-v)^beta 1_{v<0}]``."""
    v_arr = np.asarray(v, dtype=float)
    _check_singular(spec, v_arr, (0.0, spec.t))
    out = norm_CKH(spec.K, spec.H) * mvn_integrand(spec, np.atleast_1d(v_arr))
    return _scalar_or_array(out.reshape(v_arr.shape), v_arr)


# ---------------------------------------------------------------------------
# shifted kernels and their differences


def _fhat_parts(spec, v):
    """``Fhat`` at the two shifted arguments, on their supports.

    Returns ``(first, second)`` where ``first`` is ``Fhat((v-t)/(v+s))`` on
    ``(-s, t)`` and ``second`` is ``Fhat(v/(v+s))`` on ``(-s, 0)``; entries off
    the support are 1.
    """
    s, t = spec.shift_s, spec.t
    first = np.ones(v.shape)
    second = np.ones(v.shape)
    a = (v > -s) & (v < t)
    if np.any(a):
        va = v[a]
        first[a] = fhat(spec, (va - t) / (va + s), one_minus_z=(t + s) / (va + s))
    b = (v > -s) & (v < 0)
    if np.any(b):
        vb = v[b]
        second[b] = fhat(spec, vb / (vb + s), one_minus_z=s / (vb + s))
    return first, second


def _powers(spec, v):
    """``(t-v)^beta`` on ``v < t`` and ``(-v)^beta`` on ``v < 0``, else 0."""
    t, beta = spec.t, spec.beta
    p1 = np.zeros(v.shape)
    p2 = np.zeros(v.shape)
    a = v < t
    b = v < 0
    p1[a] = (t - v[a]) ** beta
    p2[b] = (-v[b]) ** beta
    return p1, p2


def _delta(spec, which, v):
    s, t = spec.shift_s, spec.t
    beta = spec.beta
    left = v < -s
    inner = (v > -s) & (v < t)
    neg_inner = (v > -s) & (v < 0)
    out = np.zeros(v.shape)
    if which == "f":
        if beta != 0:
            out[left] = power_difference(-v[left], t, beta)
        return out
    if which == "h":
        if beta == 0:
            out[(v >= 0) & (v < t)] = 1.0
            return out
        p1, p2 = _powers(spec, v)
        out[inner] = p1[inner]
        out[neg_inner] -= p2[neg_inner]
        return out
    if spec.degenerate:
        if which == "g":
            out[(v >= 0) & (v < t)] = 1.0
        return out
    p1, p2 = _powers(spec, v)
    f1, f2 = _fhat_parts(spec, v)
    if which == "g":
        out[inner] = p1[inner] * f1[inner]
        out[neg_inner] -= p2[neg_inner] * f2[neg_inner]
        return out
    if which == "k":
        out[inner] = p1[inner] * (f1[inner] - 1.0)
        out[neg_inner] -= p2[neg_inner] * (f2[neg_inner] - 1.0)
        return out
    raise DomainError(f"unknown kernel difference {which!r}")


def delta_kernels(spec: KernelSpec, which: str, v):
    """Kernel differences between the shifted compact and the half-line kernels.

    With ``beta = H - K`` and shift ``s``:

    * ``f``: ``((t-v)^beta - (-v)^beta) 1_{v < -s}``
    * ``g``: ``(t-v)^beta Fhat((v-t)/(v+s)) 1_{(-s,t)} - (-v)^beta Fhat(v/(v+s)) 1_{(-s,0)}``
    * ``h``: ``g`` with ``Fhat`` replaced by 1
    * ``k``: ``g - h``

    ``h + f`` is the unnormalised half-line integrand, so the coupled
    difference of the two representations has integrand ``C(K,H)(k - f)``.

    Parameters
    ----------
    spec : KernelSpec
        Must carry ``shift_s``.
    which : {'f', 'g', 'h', 'k'}
    v : float or array_like
        Evaluation points.  ``v = -s`` returns 0 (all indicators are open).
    """
    spec.require_shift()
    if which not in ("f", "g", "h", "k"):
        raise DomainError(f"unknown kernel difference {which!r}")
    v_arr = np.asarray(v, dtype=float)
    _check_singular(spec, v_arr, (0.0, spec.t))
    vv = np.atleast_1d(v_arr)
    out = _delta(spec, which, vv)
    if which == "k":
        resid = out - (_delta(spec, "g", vv) - _delta(spec, "h", vv))
        scale = np.abs(_delta(spec, "g", vv)) + 1.0
        assert np.all(np.abs(resid) <= 1e-12 * scale), "k = g - h violated"
    return _scalar_or_array(out.reshape(v_arr.shape), v_arr)


def shifted_mg_integrand(spec: KernelSpec, v):
    """Integrand of the shifted compact representation, ``C(K,H) * g``.

    Zero outside ``(-s, t)``.
    """
    spec.require_shift()
    v_arr = np.asarray(v, dtype=float)
    _check_singular(spec, v_arr, (0.0, spec.t))
    out = norm_CKH(spec.K, spec.H) * _delta(spec, "g", np.atleast_1d(v_arr))
    return _scalar_or_array(out.reshape(v_arr.shape), v_arr)


# ---------------------------------------------------------------------------
# auxiliary functions of the bound


def _aux_params(index, K, H):
    """``(a, b, c)`` of the hypergeometric factor of ``G_index``."""
    table = {
        0: (K - H, K - 0.5, K + 0.5),
        1: (K - H + 1, K - 0.5, K + 0.5),
        2: (2 - K - H, H - K + 1, 2 + H - K),
        3: (1.5 - K, H - K + 2, H - K + 3),
        4: (1 - K - H, H - K, 1 + H - K),
        5: (1.5 - K, H - K, H - K + 1),
        6: (1.5 - K, H - K + 1, H - K + 2),
        7: (2 * (K - H + 1), 1.0, 2 * K + 1),
        8: (1 + K - H, K + 0.5, K + 1.5),
        9: (2 * (K + 1 - H), 1.0, 2 * K + 3),
        10: (2 + K - H, K + 0.5, K + 1.5),
        11: (2 * (K + 2 - H), 1.0, 2 * K + 3),
        12: (2 * H, H - K, H - K + 1),
        13: (1.5 - K, 1.0, 3 - K - H),
        14: (H + K - 1, 1.0, K + 0.5),
        15: (K + H, 1.0, K + 1.5),
        16: (K + H - 1, 1.0, K + 1.5),
        17: (1.5 - K, 1.0, 2.0),
    }
    if index not in table:
        raise DomainError(f"auxiliary function index must be in 0..17, got {index}")
    return table[index]


def _power(z, p):
    """``z^p`` for ``z >= 0`` with the limits 0 and inf at ``z = 0``."""
    with np.errstate(divide="ignore"):
        return np.where(z == 0, 1.0 if p == 0 else (0.0 if p > 0 else np.inf),
                        np.abs(z) ** p)


def aux_G(index: int, spec: KernelSpec, z):
    """Auxiliary function ``G_index(z)`` appearing in the bound constants.

    ``G_0``, ``G_4`` and ``G_12`` carry a power prefactor and need ``z >= 0``;
    ``G_4(z) = z^(H-K) (Fhat(-z) - 1)``.  All others are plain hypergeometric
    functions of ``z <= 1``.
    """
    K, H = spec.K, spec.H
    a, b, c = _aux_params(index, K, H)
    z_arr = np.asarray(z, dtype=float)
    if index in (0, 4, 12) and np.any(z_arr < 0):
        raise DomainError(f"G_{index} needs z >= 0")
    if index == 4:
        val = _power(z_arr, H - K) * (fhat(spec, -z_arr) - 1.0)
    else:
        val = np.asarray(hyp2f1(a, b, c, z_arr), dtype=float)
        if index == 0:
            val = _power(z_arr, K - H) * val
        elif index == 12:
            val = _power(z_arr, H - K) * val
    return _scalar_or_array(np.asarray(val, dtype=float), z_arr)


def aux_G_derivative(index: int, spec: KernelSpec, z):
    """Closed-form derivatives known for ``G_0``, ``G_4`` and ``G_12``.

    * ``G_0' = (K-H) z^(K-H-1) G_1``
    * ``G_4' = (H-K) z^(H-K-1) ((1+z)^(H+K-1) - 1)``
    * ``G_12' = (H-K) z^(H-K-1) (1-z)^(-2H)``
    """
    K, H = spec.K, spec.H
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr <= 0):
        raise DomainError("derivative formulas need z > 0")
    if index == 0:
        out = (K - H) * z_arr ** (K - H - 1) * aux_G(1, spec, z_arr)
    elif index == 4:
        out = (H - K) * z_arr ** (H - K - 1) * ((1 + z_arr) ** (H + K - 1) - 1)
    elif index == 12:
        if np.any(z_arr >= 1):
            raise DomainError("G_12' needs z < 1")
        out = (H - K) * z_arr ** (H - K - 1) * (1 - z_arr) ** (-2 * H)
    else:
        raise DomainError(f"no closed-form derivative for G_{index}")
    return _scalar_or_array(np.asarray(out, dtype=float), z_arr)


class GMax(NamedTuple):
    """Maximum of ``|G|`` on an interval and whether an endpoint was cut off."""

    value: float
    truncated: bool


_DELTA_CAP = 1e-6
_N_GRID = 2**12


def _singular_at_zero(index, K, H):
    return (index == 0 and K < H) or (index == 12 and H < K)


def _divergent_at_one(index, K, H):
    if index == 4:
        return False
    a, b, c = _aux_params(index, K, H)
    if a == 0 or b == 0:
        return False
    for p in (a, b):
        if p <= 0 and float(p).is_integer():
            return False
    return c - a - b <= 0


def _golden_max(func, lo, hi, iters=80):
    inv = (math.sqrt(5) - 1) / 2
    x1 = hi - inv * (hi - lo)
    x2 = lo + inv * (hi - lo)
    f1, f2 = func(x1), func(x2)
    for _ in range(iters):
        if hi - lo <= 1e-14 * max(1.0, abs(lo) + abs(hi)):
            break
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + inv * (hi - lo)
            f2 = func(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - inv * (hi - lo)
            f1 = func(x1)
    return max(f1, f2)


def aux_G_max_detail(index: int, spec: KernelSpec, interval: str = "star_right",
                     n_grid: int = _N_GRID) -> GMax:
    """``max |G_index|`` on ``[0, 1]`` (``star_right``) or ``[-1, 0]`` (``star_left``).

    Dense sampling on ``n_grid + 1`` points followed by golden-section
    refinement in the bracket around the best sample.  If ``G`` diverges at an
    endpoint, that endpoint is moved inward by ``1e-6`` and the result is
    flagged as truncated.
    """
    K, H = spec.K, spec.H
    if interval == "star_right":
        lo, hi = 0.0, 1.0
    elif interval == "star_left":
        lo, hi = -1.0, 0.0
        if index in (0, 4, 12):
            raise DomainError(f"G_{index} is only defined for z >= 0")
    else:
        raise DomainError(f"unknown interval {interval!r}")
    truncated = False
    if hi == 1.0 and _divergent_at_one(index, K, H):
        hi = 1.0 - _DELTA_CAP
        truncated = True
    if lo == 0.0 and _singular_at_zero(index, K, H):
        lo = _DELTA_CAP
        truncated = True

    def g_abs(z):
        return abs(float(aux_G(index, spec, z)))

    grid = np.linspace(lo, hi, n_grid + 1)
    vals = np.abs(np.asarray(aux_G(index, spec, grid), dtype=float))
    i = int(np.argmax(vals))
    best = float(vals[i])
    left = grid[max(i - 1, 0)]
    right = grid[min(i + 1, n_grid)]
    if right > left:
        best = max(best, _golden_max(g_abs, left, right))
    return GMax(best, truncated)


def aux_G_max(index: int, spec: KernelSpec, interval: str = "star_right") -> float:
    """``max |G_index|`` on the requested interval; see :func:`aux_G_max_detail`."""
    return aux_G_max_detail(index, spec, interval).value


# ---------------------------------------------------------------------------
# bound constants


@dataclass(frozen=True)
class BoundConstants:
    """Constants of the rate bound together with the G-maxima used.

    ``c2`` is set for ``K >= 1/2``; ``c3`` and ``c4`` for ``K < 1/2``.
    ``truncated`` lists G indices whose maximum had to be cut off at a
    divergent endpoint, which makes the corresponding constants (very)
    conservative rather than exact.
    """

    c1: float
    c2: float | None
    c3: float | None
    c4: float | None
    d: float
    valid_from_s: float
    g_max: dict = field(default_factory=dict)
    truncated: tuple = ()


def bound_constants(spec: KernelSpec, d: float = 1.0) -> BoundConstants:
    """Evaluate ``c1`` and ``c2`` (or ``c3``, ``c4``) for ``spec`` and split ``d``.

    The closed-form expressions are used verbatim, including their numerical
    coefficients.  ``K == H`` gives all-zero constants.
    """
    if not d > 0:
        raise DomainError(f"d must be positive, got {d}")
    K, H, t = spec.K, spec.H, spec.t
    valid = 2 * t + 4 * d + 1
    if spec.degenerate:
        zero_hi = 0.0 if K >= 0.5 else None
        zero_lo = None if K >= 0.5 else 0.0
        return BoundConstants(0.0, zero_hi, zero_lo, zero_lo, d, valid)

    cache: dict = {}
    flagged: list = []

    def gs(i):  # G*_i
        key = f"G{i}*"
        if key not in cache:
            res = aux_G_max_detail(i, spec, "star_right")
            cache[key] = res.value
            if res.truncated:
                flagged.append(i)
        return cache[key]

    def sg(i):  # *G_i
        key = f"*G{i}"
        if key not in cache:
            cache[key] = aux_G_max(i, spec, "star_left")
        return cache[key]

    G = gamma_fn
    c1 = ((K - H) / G(K + 0.5)) ** 2 * gs(1) ** 2 * 4 * G(2 * K) * G(2 - 2 * H) \
        / G(2 * K - 2 * H + 2) * t**2
    td = t + d
    c2 = c3 = c4 = None
    if K == 0.5:
        c2 = 2 * sg(2) ** 2 * td ** (2 * H + 2) \
            + (td**2 / (4 * H * d**2) + 2 / (1 - H) + 2) * t**2
    elif K > 0.5:
        first = (20 * sg(2) ** 2 * gs(3) ** 2
                 / (G(K - 0.5) ** 2 * (1 + H - K) ** 2 * (1 - K))
                 + 20 * sg(2) ** 2 * G(H - K + 1) ** 2 / G(H + 1.5) ** 2)
        inner = (max(160 * gs(5) ** 2, 10 * gs(6) ** 2 * td**2 / ((H - K + 1) ** 2 * d**2))
                 + 10 * gs(17) ** 2 + 10 * gs(13) ** 2 / (2 - K - H) ** 2)
        second = (inner / ((1 - K) * G(K - 0.5) ** 2)
                  + (10 * gs(14) ** 2 + 40 * gs(1) ** 2 * gs(7) + 10) / (K * G(K + 0.5) ** 2))
        c2 = first * td ** (2 * H + 2) + second * t**2
    else:
        first = (24 * sg(2) ** 2 * gs(3) ** 2
                 / (G(K - 0.5) ** 2 * (1 + H - K) ** 2 * (1 - K))
                 + 816 * sg(2) ** 2 * G(H - K + 1) ** 2
                 / ((1 + H - K) ** 2 * G(H + 1.5) ** 2))
        inner = (max(192 * gs(5) ** 2, 12 * gs(6) ** 2 * td**2 / ((H - K + 1) ** 2 * d**2))
                 + 12 * gs(13) ** 2 / (2 - H - K) ** 2 + 12 * gs(17) ** 2)
        c3 = (first * td ** (2 * H + 2)
              + inner / (G(K - 0.5) ** 2 * (1 - K)) * t**2
              + 48 / (K * G(K + 0.5) ** 2) * t**2
              + (408 * gs(8) ** 2 * gs(9) + 3072 * gs(10) ** 2 * gs(11)
                 + 378 * gs(15) ** 2 + 24 * gs(16) ** 2 + 48) / G(K + 1.5) ** 2 * t**2)
        c4 = 12 * d ** (2 * (H - K - 1)) * td**2 / (G(K + 0.5) ** 2 * K) * t**2
    return BoundConstants(c1, c2, c3, c4, d, valid, dict(cache), tuple(sorted(set(flagged))))


def distance_bound(spec: KernelSpec, constants: BoundConstants, s):
    """Upper bound on the mean-square distance at shift(s) ``s``.

    ``K = 1/2``: ``(C(H)/G(H+1/2))^2 (c1 + c2) s^(2H-2)``;
    ``K > 1/2``: ``2 C(H)^2 / G(H-K+1)^2 (c1 + c2) s^(2H-2)``;
    ``K < 1/2``: ``2 C(H)^2 / G(H-K+1)^2 ((c1 + c3) s^(2H-2) + c4 s^(2K-2))``.
    """
    K, H = spec.K, spec.H
    s = np.asarray(s, dtype=float)
    if spec.degenerate:
        return _scalar_or_array(np.zeros(s.shape), s)
    c = constants
    if K == 0.5:
        out = (norm_C(H) / gamma_fn(H + 0.5)) ** 2 * (c.c1 + c.c2) * s ** (2 * H - 2)
    else:
        pref = 2 * norm_C(H) ** 2 / gamma_fn(H - K + 1) ** 2
        if K > 0.5:
            out = pref * (c.c1 + c.c2) * s ** (2 * H - 2)
        else:
            out = pref * ((c.c1 + c.c3) * s ** (2 * H - 2) + c.c4 * s ** (2 * K - 2))
    return _scalar_or_array(np.asarray(out, dtype=float), s)


__all__.append("distance_bound")
