"""Right-sided fractional integrals and derivatives on uniform grids.

Functions are carried as :class:`SampledFunction` objects (nodal values on a
uniform grid, zero to the right of ``support_end`` and beyond the grid).
Operators act on the piecewise-linear interpolant of those values and
integrate the power kernel exactly on every cell (product integration), so
the ``(u - s)^(alpha-1)`` endpoint singularity costs no accuracy.

A second, piecewise-constant view is used for Wiener-integral weights:
:func:`rl_integral_steps` and :func:`transformed_cell_averages`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .special import DomainError, gamma_fn

__all__ = [
    "SampledFunction",
    "sample_function",
    "sample_indicator",
    "rl_integral",
    "rl_derivative",
    "marchaud_derivative",
    "frac_integral_indicator",
    "rl_integral_steps",
    "transformed_cell_averages",
]


@dataclass(frozen=True)
class SampledFunction:
    """Real function on the grid ``grid_start + k * grid_step``."""

    grid_start: float
    grid_step: float
    values: np.ndarray
    support_end: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size < 2:
            raise DomainError("need a 1-d array of at least two values")
        if not self.grid_step > 0:
            raise DomainError(f"grid_step must be positive, got {self.grid_step}")
        tail = self.grid > self.support_end + 1e-9 * self.grid_step
        if np.any(vals[tail] != 0):
            raise DomainError("values must vanish to the right of support_end")

    @property
    def grid(self) -> np.ndarray:
        return self.grid_start + self.grid_step * np.arange(self.values.size)

    def with_values(self, values, support_end=None) -> "SampledFunction":
        """Same grid, new values; entries right of the support are zeroed."""
        end = self.support_end if support_end is None else support_end
        vals = np.array(values, dtype=float)
        vals[self.grid > end + 1e-9 * self.grid_step] = 0.0
        return SampledFunction(self.grid_start, self.grid_step, vals, end)


def sample_function(func, grid_start, grid_step, n_points, support_end):
    """Sample a vectorised callable; values right of ``support_end`` are zeroed."""
    grid = grid_start + grid_step * np.arange(n_points)
    vals = np.where(grid <= support_end, func(grid), 0.0)
    return SampledFunction(grid_start, grid_step, vals, support_end)


def sample_indicator(a, b, grid_start, grid_step, n_points):
    """Nodal samples of ``1_[a, b)`` with the value 1/2 at jump nodes.

    The half values make the piecewise-linear interpolant's error at each jump
    odd about the jump, which cancels to first order under fractional
    integration.
    """
    grid = grid_start + grid_step * np.arange(n_points)
    tol = 1e-9 * grid_step
    vals = ((grid > a + tol) & (grid < b - tol)).astype(float)
    vals[np.abs(grid - a) <= tol] = 0.5
    vals[np.abs(grid - b) <= tol] = 0.5
    return SampledFunction(grid_start, grid_step, vals, b)


# ---------------------------------------------------------------------------
# weights


def _second_difference(m, p):
    """``(m+1)^p - 2 m^p + (m-1)^p`` for integer ``m >= 1``, cancellation-free."""
    m = np.asarray(m, dtype=float)
    out = (m + 1) ** p - 2 * m**p + (m - 1) ** p
    big = m > 64
    if np.any(big):
        mb = m[big]
        x2 = mb**-2.0
        acc = np.zeros_like(mb)
        coef = 1.0
        xp = np.ones_like(mb)
        # 2 * sum_j binom(p, 2j) m^{p-2j}
        for j in range(1, 12):
            coef *= (p - 2 * j + 2) * (p - 2 * j + 1) / ((2 * j) * (2 * j - 1))
            xp = xp * x2
            acc = acc + coef * xp
        out[big] = 2 * mb**p * acc
    return out


def _linear_weights(alpha, n):
    """Interior weights ``w_m`` and end weights ``e_m`` for ``I^alpha``.

    In grid units, ``int_0^inf x^{alpha-1} f(x) dx`` for piecewise-linear ``f``
    equals ``sum_m w_m f_m``; ``e_m`` is the weight of node ``m`` when it is
    the last node (hat function cut at the right).
    """
    m = np.arange(n, dtype=float)
    denom = alpha * (alpha + 1)
    w = np.empty(n)
    w[0] = 1.0 / denom
    if n > 1:
        w[1:] = _second_difference(m[1:], alpha + 1) / denom
    e = np.zeros(n)
    if n > 1:
        mm = m[1:]
        e[1:] = ((mm**(alpha + 1) - (mm - 1) ** (alpha + 1)) / (alpha + 1)
                 - (mm - 1) * (mm**alpha - (mm - 1) ** alpha) / alpha)
    return w, e


def _toeplitz_apply(weights, end_weights, values):
    """``out_i = sum_m weights[m] values[i+m]`` with the last node re-weighted."""
    n = values.size
    out = fftconvolve(values, weights[::-1])[n - 1:2 * n - 1]
    last = values[-1]
    if last != 0.0:
        offsets = np.arange(n - 1, -1, -1)
        out = out + (end_weights[offsets] - weights[offsets]) * last
    return out


# ---------------------------------------------------------------------------
# operators


def _check_integral_order(alpha):
    if not 0 < alpha <= 1:
        raise DomainError(f"integral order must lie in (0, 1], got {alpha}")


def _check_derivative_order(alpha):
    if not 0 < alpha < 1:
        raise DomainError(f"derivative order must lie in (0, 1), got {alpha}")


def rl_integral(f: SampledFunction, alpha: float) -> SampledFunction:
    """Right-sided Riemann-Liouville integral ``I^alpha_- f`` on f's grid.

    Parameters
    ----------
    f : SampledFunction
        Integrand; its piecewise-linear interpolant is integrated exactly
        against ``(u - s)^(alpha - 1)``.
    alpha : float
        Order in ``(0, 1]``.
    """
    _check_integral_order(alpha)
    h = f.grid_step
    w, e = _linear_weights(alpha, f.values.size)
    out = _toeplitz_apply(w, e, f.values) * (h**alpha / gamma_fn(alpha))
    return f.with_values(out)


def rl_derivative(f: SampledFunction, alpha: float) -> SampledFunction:
    """Riemann-Liouville derivative ``-d/ds I^{1-alpha}_- f``.

    Central differences inside the grid, one-sided at both ends.
    """
    _check_derivative_order(alpha)
    smoothed = rl_integral(f, 1.0 - alpha).values
    return f.with_values(-np.gradient(smoothed, f.grid_step))


def _marchaud_truncated(f, alpha, eps):
    h = f.grid_step
    n = f.values.size
    e = eps / h
    # per-cell moments of x^{-alpha-1} over [max(k, e), k+1]
    k = np.arange(n - 1, dtype=float)
    lower = np.maximum(k, e)
    live = k + 1 > e
    lo = np.where(live, lower, k + 1)
    p0 = (lo**-alpha - (k + 1) ** -alpha) / alpha
    p1 = ((k + 1) ** (1 - alpha) - lo ** (1 - alpha)) / (1 - alpha)
    left = (k + 1) * p0 - p1   # weight on node k
    right = p1 - k * p0        # weight on node k+1
    w = np.zeros(n)
    w[:-1] += left
    w[1:] += right
    end = np.zeros(n)
    end[1:] = right
    tail = _toeplitz_apply(w, end, f.values) * h**-alpha
    out = alpha / gamma_fn(1 - alpha) * (f.values * eps**-alpha / alpha - tail)
    return out


def marchaud_derivative(f: SampledFunction, alpha: float, epsilon: float,
                        extrapolate: bool = True) -> SampledFunction:
    """Marchaud derivative ``D^alpha_- f``.

    With ``extrapolate=False`` the truncated operator at ``epsilon`` is
    returned.  Otherwise the truncations at ``epsilon``, ``epsilon/2`` and
    ``epsilon/4`` are combined to remove the ``eps^(1-alpha)`` and
    ``eps^(2-alpha)`` error terms.
    """
    _check_derivative_order(alpha)
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if not extrapolate:
        return f.with_values(_marchaud_truncated(f, alpha, epsilon))
    eps = epsilon / np.array([1.0, 2.0, 4.0])
    design = np.column_stack([np.ones(3), eps ** (1 - alpha), eps ** (2 - alpha)])
    combo = np.linalg.solve(design.T, np.array([1.0, 0.0, 0.0]))
    vals = sum(c * _marchaud_truncated(f, alpha, e) for c, e in zip(combo, eps))
    return f.with_values(vals)


def frac_integral_indicator(H: float, t: float, s):
    """Closed form of ``(I^{H-1/2}_- 1_[0,t))(s)``.

    For ``t < 0`` the indicator is read as ``-1_[t,0)``; the same formula
    covers both signs.
    """
    if not 0 < H < 1:
        raise DomainError(f"H must lie in (0, 1), got {H}")
    if t == 0:
        raise DomainError("t must be non-zero")
    s_arr = np.asarray(s, dtype=float)
    p = H - 0.5
    if p < 0 and np.any((s_arr == t) | (s_arr == 0)):
        raise DomainError("singular point s in {0, t} for H < 1/2")
    with np.errstate(divide="ignore", invalid="ignore"):
        first = np.where(s_arr < t, np.abs(t - s_arr) ** p, 0.0)
        second = np.where(s_arr < 0, np.abs(s_arr) ** p, 0.0)
    out = (first - second) / gamma_fn(H + 0.5)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# piecewise-constant view


def rl_integral_steps(cell_values, h: float, alpha: float) -> np.ndarray:
    """``I^alpha_-`` at the nodes of a piecewise-constant function.

    ``cell_values[j]`` is the value on ``[x_j, x_{j+1})`` with ``n`` cells and
    ``n + 1`` nodes; the function is zero right of the last node.  Any
    ``alpha > 0`` is accepted.
    """
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    v = np.asarray(cell_values, dtype=float)
    n = v.size
    k = np.arange(n + 1, dtype=float)
    # node i collects sum_{j >= i} v_j ((j-i+1)^a - (j-i)^a)
    w = (k[1:] ** alpha - k[:-1] ** alpha)
    out = np.zeros(n + 1)
    out[:n] = fftconvolve(v, w[::-1])[n - 1:2 * n - 1]
    return out * h**alpha / gamma_fn(alpha + 1)


def transformed_cell_averages(cell_values, h: float, order: float) -> np.ndarray:
    """Cell averages of ``I^order_- f`` for piecewise-constant ``f``.

    ``order`` may lie anywhere in ``(-1, 1)``: negative orders are
    Riemann-Liouville derivatives.  Uses
    ``int_cell I^order f = I^{order+1} f(x_j) - I^{order+1} f(x_{j+1})``,
    which holds exactly because ``-d/ds I^{order+1} = I^order``.  Order 0
    returns the input.
    """
    if not -1 < order < 1:
        raise DomainError(f"order must lie in (-1, 1), got {order}")
    v = np.asarray(cell_values, dtype=float)
    if order == 0:
        return v.copy()
    # difference of node values written with second-difference weights so
    # that no large nearly-equal numbers are subtracted
    p = order + 1.0
    n = v.size
    d = np.empty(n)
    d[0] = 1.0
    if n > 1:
        d[1:] = _second_difference(np.arange(1, n, dtype=float), p)
    out = fftconvolve(v, d[::-1])[n - 1:2 * n - 1]
    return out * h ** (p - 1.0) / gamma_fn(p + 1.0)
