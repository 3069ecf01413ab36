"""Sample paths: exact fBm, Brownian drivers and discretised representations.

Randomness is drawn per path from a counter-based generator keyed by
``(master_seed, path_index)``, and paths are processed in fixed-size chunks,
so every ensemble is bit-identical regardless of how many worker threads are
used.

Kernels enter the Riemann-Stieltjes sums through their exact (or
graded-quadrature) cell averages, which keeps integrable endpoint
singularities harmless.  Representations driven by a ``K``-fBm with
``K != 1/2`` are built on the underlying Brownian motion: the cell-averaged
kernel is mapped by the fractional operator of order ``K - 1/2`` (see
:func:`frac_calc.transformed_cell_averages`) and summed against Brownian
increments.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .frac_calc import SampledFunction, transformed_cell_averages
from .kernels import KernelSpec, delta_kernels, fhat, power_difference
from .quadrature import cell_averages
from .special import DomainError, gamma_fn, norm_C, norm_CKH

__all__ = [
    "Grid",
    "PathEnsemble",
    "CovarianceEstimate",
    "CholeskyError",
    "fbm_covariance",
    "path_rng",
    "standard_normals",
    "sample_brownian",
    "sample_fbm_exact",
    "fractional_wiener_integral",
    "mg_transform_path",
    "mvn_transform_path",
    "mvn_truncation_bias",
    "zhs_and_zh_paths",
    "coupled_distance_mc",
    "empirical_covariance",
]

PATH_CHUNK = 256
_GRID_TOL = 1e-9


class CholeskyError(ArithmeticError):
    """Covariance matrix not numerically positive definite."""


# ---------------------------------------------------------------------------
# containers


@dataclass(frozen=True)
class Grid:
    """Uniform time grid with ``n_steps`` cells on ``[t_start, t_end]``."""

    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise DomainError(f"need t_start < t_end, got {self.t_start}, {self.t_end}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise DomainError(f"n_steps must be an integer >= 2, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def step(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        out = self.t_start + self.step * np.arange(self.n_steps + 1)
        out[-1] = self.t_end
        return out

    def index_of(self, t: float) -> int:
        """Index of grid time ``t``; domain error if ``t`` is not a node."""
        k = (t - self.t_start) / self.step
        i = int(round(k))
        if abs(k - i) > _GRID_TOL * max(1.0, abs(k)) or not 0 <= i <= self.n_steps:
            raise DomainError(f"time {t} is not a grid node")
        return i

    def contains_node(self, t: float) -> bool:
        try:
            self.index_of(t)
        except DomainError:
            return False
        return True


@dataclass(frozen=True)
class PathEnsemble:
    """``n_paths`` sample paths on a grid (rows are paths)."""

    grid: Grid
    paths: np.ndarray
    master_seed: int
    hurst: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.asarray(self.paths, dtype=float)
        if p.ndim != 2 or p.shape[1] != self.grid.n_steps + 1:
            raise DomainError(f"paths must have shape (n, {self.grid.n_steps + 1})")
        object.__setattr__(self, "paths", p)

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    def values_at(self, t: float) -> np.ndarray:
        return self.paths[:, self.grid.index_of(t)]

    def increments(self) -> np.ndarray:
        return np.diff(self.paths, axis=1)

    def to_csv(self, path) -> None:
        """Header ``time,path_0,...``; one row per grid time, 17 significant digits."""
        with open(path, "w", newline="") as fh:
            fh.write(_csv_text(self.grid.times, self.paths))

    @classmethod
    def from_csv(cls, path, master_seed: int = 0, hurst: float = math.nan) -> "PathEnsemble":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0][0] != "time":
            raise DomainError(f"{path}: not an ensemble file")
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
        if data.shape[0] < 3:
            raise DomainError(f"{path}: need at least 3 time rows")
        times = data[:, 0]
        grid = Grid(float(times[0]), float(times[-1]), times.size - 1)
        if not np.allclose(times, grid.times, rtol=0, atol=1e-9 * max(1.0, abs(grid.t_end))):
            raise DomainError(f"{path}: times are not uniform")
        return cls(grid, data[:, 1:].T.copy(), master_seed, hurst)


def _csv_text(times, paths) -> str:
    n = paths.shape[0]
    lines = ["time," + ",".join(f"path_{i}" for i in range(n))]
    for k, t in enumerate(times):
        lines.append(",".join([f"{t:.17g}"] + [f"{x:.17g}" for x in paths[:, k]]))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class CovarianceEstimate:
    """Sample covariance with delete-one jackknife standard errors."""

    times: tuple
    matrix: np.ndarray
    stderr: np.ndarray
    n_paths: int


# ---------------------------------------------------------------------------
# randomness


def path_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for path ``index``; independent of scheduling."""
    key = (int(master_seed) % 2**64) * 2**64 + int(index)
    return np.random.Generator(np.random.Philox(key=key))


def standard_normals(master_seed: int, lo: int, hi: int, n: int) -> np.ndarray:
    """Rows ``lo .. hi-1`` of the per-path standard normal draws, length ``n``."""
    out = np.empty((hi - lo, n))
    for r, i in enumerate(range(lo, hi)):
        out[r] = path_rng(master_seed, i).standard_normal(n)
    return out


def _map_chunks(fn, n_paths: int, n_workers: int = 1) -> np.ndarray:
    """Apply ``fn(lo, hi)`` to fixed chunks of paths and stack in order."""
    if n_paths < 1:
        raise DomainError(f"n_paths must be >= 1, got {n_paths}")
    bounds = [(lo, min(lo + PATH_CHUNK, n_paths)) for lo in range(0, n_paths, PATH_CHUNK)]
    if n_workers <= 1 or len(bounds) == 1:
        parts = [fn(lo, hi) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as ex:
            parts = list(ex.map(lambda b: fn(*b), bounds))
    return np.concatenate(parts, axis=0)


def _brownian_increments(seed, lo, hi, n_cells, step):
    return standard_normals(seed, lo, hi, n_cells) * math.sqrt(step)


# ---------------------------------------------------------------------------
# exact sampling


def fbm_covariance(H: float, s, t):
    """``(|s|^2H + |t|^2H - |t-s|^2H) / 2``."""
    if not 0 < H < 1:
        raise DomainError(f"H must lie in (0, 1), got {H}")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    out = 0.5 * (np.abs(s) ** (2 * H) + np.abs(t) ** (2 * H) - np.abs(t - s) ** (2 * H))
    return float(out) if out.ndim == 0 else out


def _anchor_at_zero(grid, paths):
    if grid.contains_node(0.0):
        i0 = grid.index_of(0.0)
        paths = paths - paths[:, i0:i0 + 1]
        paths[:, i0] = 0.0
    return paths


def sample_brownian(grid: Grid, n_paths: int, seed: int, n_workers: int = 1) -> PathEnsemble:
    """Brownian paths on ``grid``, zero at time 0 (or at ``t_start`` if 0 is off-grid)."""
    h = grid.step

    def chunk(lo, hi):
        inc = _brownian_increments(seed, lo, hi, grid.n_steps, h)
        paths = np.zeros((hi - lo, grid.n_steps + 1))
        np.cumsum(inc, axis=1, out=paths[:, 1:])
        return _anchor_at_zero(grid, paths)

    return PathEnsemble(grid, _map_chunks(chunk, n_paths, n_workers), seed, 0.5)


def sample_fbm_exact(H: float, grid: Grid, n_paths: int, seed: int,
                     jitter: float = 0.0, n_workers: int = 1) -> PathEnsemble:
    """fBm paths with the exact finite-dimensional law (Cholesky factor).

    Parameters
    ----------
    H : float
        Hurst index.
    grid : Grid
        Sampling times; a grid node at 0 is pinned to 0.
    jitter : float
        Added to the diagonal before factorising.  On failure the error
        message suggests ``1e-12``.
    """
    times = grid.times
    nz = np.abs(times) > 1e-14 * max(1.0, abs(grid.t_end))
    tz = times[nz]
    cov = fbm_covariance(H, tz[:, None], tz[None, :])
    if jitter:
        cov = cov + jitter * np.eye(tz.size)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise CholeskyError("covariance not positive definite; retry with jitter=1e-12") from exc

    def chunk(lo, hi):
        z = standard_normals(seed, lo, hi, tz.size)
        out = np.zeros((hi - lo, times.size))
        out[:, nz] = z @ chol.T
        return out

    return PathEnsemble(grid, _map_chunks(chunk, n_paths, n_workers), seed, H)


# ---------------------------------------------------------------------------
# Wiener integrals


def _check_brownian(driver):
    if driver.hurst != 0.5:
        raise DomainError(f"driver must be Brownian (hurst 0.5), got {driver.hurst}")


def _fractional_weights(cell_values, h, K):
    """``C(K) * (I^{K-1/2} f)`` cell averages for piecewise-constant ``f``."""
    if K == 0.5:
        return np.asarray(cell_values, dtype=float).copy()
    return norm_C(K) * transformed_cell_averages(cell_values, h, K - 0.5)


def fractional_wiener_integral(f: SampledFunction, K: float, driver: PathEnsemble) -> np.ndarray:
    """Per-path ``int f dB^K`` built on the Brownian ``driver``.

    The nodal values of ``f`` are averaged to cell values, transformed by
    ``C(K) I^{K-1/2}_-`` (a fractional derivative for ``K < 1/2``) and summed
    against the Brownian increments.  The transformed integrand is cut off
    at the left end of the driver grid.
    """
    _check_brownian(driver)
    if not 0 < K < 1:
        raise DomainError(f"K must lie in (0, 1), got {K}")
    g = driver.grid
    h = g.step
    if abs(f.grid_step - h) > _GRID_TOL * h or abs(f.grid_start - g.t_start) > _GRID_TOL * h:
        raise DomainError("f must be sampled on the driver grid")
    if f.values.size > g.n_steps + 1 or f.support_end > g.t_end + _GRID_TOL * h:
        raise DomainError("support of f exceeds the driver grid")
    nodes = np.zeros(g.n_steps + 1)
    nodes[:f.values.size] = f.values
    cells = 0.5 * (nodes[:-1] + nodes[1:])
    weights = _fractional_weights(cells, h, K)
    return driver.increments() @ weights


# ---------------------------------------------------------------------------
# compact-interval representation


def _mg_values(spec, t, u):
    """Unnormalised compact kernel ``(t-u)^beta Fhat((u-t)/u)``."""
    return (t - u) ** spec.beta * np.asarray(fhat(spec, (u - t) / u, one_minus_z=t / u))


def _mg_weight_rows(spec, grid_pos, n_left=0):
    """Cell-averaged compact kernels for every positive grid time.

    Returns an array ``(n_steps + 1, n_left + n_steps)``; row ``i`` holds the
    normalised kernel for ``t_i`` on the cells of ``[0, t_i]`` (offset by
    ``n_left`` zero cells on the left).  Row 0 is zero.
    """
    times = grid_pos.times
    n = grid_pos.n_steps
    out = np.zeros((n + 1, n_left + n))
    c = norm_CKH(spec.K, spec.H)
    for i in range(1, n + 1):
        t = times[i]
        edges = times[:i + 1]
        if spec.degenerate:
            row = np.ones(i)
        else:
            row = cell_averages(lambda u, t=t: _mg_values(spec, t, u), edges, (0.0, t))
        out[i, n_left:n_left + i] = c * row
    return out


def _positive_part(driver):
    g = driver.grid
    i0 = g.index_of(0.0)
    return i0, Grid(0.0, g.t_end, g.n_steps - i0)


def mg_transform_path(spec: KernelSpec, driver: PathEnsemble, n_workers: int = 1) -> PathEnsemble:
    """Discretised compact-interval representation at every grid time ``>= 0``.

    With a ``K``-fBm driver (``driver.hurst == spec.K``) the cell-averaged
    kernel is summed against the driver increments; ``K == H`` returns the
    driver values unchanged.  With a Brownian driver and ``K != 1/2`` each
    kernel row is first mapped by ``C(K) I^{K-1/2}_-``; the driver grid
    should then extend left of 0.
    """
    g = driver.grid
    if not g.contains_node(0.0):
        raise DomainError("driver grid must contain time 0")
    i0, gpos = _positive_part(driver)
    if driver.hurst == spec.K:
        if spec.degenerate:
            return PathEnsemble(gpos, driver.paths[:, i0:].copy(), driver.master_seed,
                                spec.H, {"method": "mg", "identity": True})
        rows = _mg_weight_rows(spec, gpos)
        inc = driver.increments()[:, i0:]
        return PathEnsemble(gpos, inc @ rows.T, driver.master_seed, spec.H, {"method": "mg"})
    if driver.hurst != 0.5:
        raise DomainError("driver must be a K-fBm or a Brownian motion")
    rows = _mg_weight_rows(spec, gpos, n_left=i0)
    h = g.step
    weights = np.vstack([_fractional_weights(r, h, spec.K) for r in rows])
    paths = driver.increments() @ weights.T
    paths[:, 0] = 0.0
    return PathEnsemble(gpos, paths, driver.master_seed, spec.H,
                        {"method": "mg", "left_cutoff": g.t_start})


# ---------------------------------------------------------------------------
# half-line representation


def mvn_truncation_bias(spec: KernelSpec, L: float, t: float | None = None) -> float:
    """Bound on the variance lost by cutting the half-line integral at ``-L``.

    ``C(H)^2 / G(H+1/2)^2 * (H-1/2)^2 t^2 L^(2H-2) / (2-2H)``, the same for
    every ``K`` because the transformed kernel is
    ``G(H-K+1)/G(H+1/2) ((t-v)^(H-1/2) - (-v)^(H-1/2))`` left of 0.
    """
    if not L > 0:
        raise DomainError(f"L must be positive, got {L}")
    t = spec.t if t is None else t
    H = spec.H
    if spec.degenerate:
        return 0.0
    return (norm_C(H) / gamma_fn(H + 0.5)) ** 2 * (H - 0.5) ** 2 * t**2 \
        * L ** (2 * H - 2) / (2 - 2 * H)


def _power_cell_averages(beta, h, n):
    """Averages of ``x^beta`` over ``[m h, (m+1) h]``, ``m = 0..n-1``."""
    m = np.arange(n, dtype=float)
    out = np.empty(n)
    out[0] = h**beta / (beta + 1)
    if n > 1:
        out[1:] = power_difference(m[1:] * h, h, beta + 1) / ((beta + 1) * h)
    return out


def _mvn_convolution_weights(spec, h, n_cells):
    """Weights ``b_m`` with ``Z_{t_i} ~ sum_j (b_{i-1-j} - b_{i0-1-j}) dB_j``."""
    K, beta = spec.K, spec.beta
    a = np.ones(n_cells) if beta == 0 else _power_cell_averages(beta, h, n_cells)
    if K == 0.5:
        return a
    # row for the right-most time: cell j holds a_{n-1-j}
    trans = _fractional_weights(a[::-1], h, K)
    return trans[::-1]


def _mvn_from_increments(spec, inc, h, i0, n_out):
    """Half-line representation at node indices ``i0 .. i0+n_out-1``."""
    n_cells = inc.shape[1]
    b = _mvn_convolution_weights(spec, h, n_cells)
    # Y_i = sum_{j<i} b_{i-1-j} dB_j  ->  full convolution at index i-1
    conv = fftconvolve(inc, b[None, :], axes=1)
    idx = np.arange(i0, i0 + n_out)
    y = np.zeros((inc.shape[0], n_out))
    pos = idx > 0
    y[:, pos] = conv[:, idx[pos] - 1]
    z = y - y[:, :1]
    z[:, 0] = 0.0
    return norm_CKH(spec.K, spec.H) * z


def mvn_transform_path(spec: KernelSpec, driver: PathEnsemble, left_truncation: float,
                       n_workers: int = 1) -> PathEnsemble:
    """Half-line representation cut off at ``-L``, at every grid time ``>= 0``.

    The driver must be Brownian, or a ``K``-fBm with ``K = spec.K``; its grid
    must have nodes at ``-L`` and 0.  ``meta['truncation_bias']`` holds
    :func:`mvn_truncation_bias` at ``t_end``.
    """
    L = float(left_truncation)
    g = driver.grid
    if not L > 0:
        raise DomainError(f"L must be positive, got {L}")
    if g.t_start > -L + _GRID_TOL * g.step or not g.contains_node(-L):
        raise DomainError(f"driver grid must cover [-L, t_end] with a node at -L = {-L}")
    if not g.contains_node(0.0):
        raise DomainError("driver grid must contain time 0")
    if driver.hurst != spec.K and driver.hurst != 0.5:
        raise DomainError("driver must be a K-fBm or a Brownian motion")
    iL = g.index_of(-L)
    i0, gpos = _positive_part(driver)
    inc = driver.increments()[:, iL:]
    direct = driver.hurst == spec.K
    h = g.step
    if spec.degenerate and direct:
        paths = driver.paths[:, i0:] - driver.paths[:, i0:i0 + 1]
    else:
        # K-fBm driver: Riemann sums of the kernel against its increments;
        # Brownian driver: kernel mapped by C(K) I^{K-1/2} first
        build = _mvn_direct if direct else _mvn_from_increments

        def chunk(lo, hi):
            return build(spec, inc[lo:hi], h, i0 - iL, gpos.n_steps + 1)

        paths = _map_chunks(chunk, inc.shape[0], n_workers)
    meta = {"method": "mvn", "L": L, "truncation_bias": mvn_truncation_bias(spec, L, g.t_end)}
    return PathEnsemble(gpos, paths, driver.master_seed, spec.H, meta)


def _mvn_direct(spec, inc, h, i0, n_out):
    """Riemann sums of the cell-averaged half-line kernel against ``inc``."""
    n_cells = inc.shape[1]
    a = np.ones(n_cells) if spec.beta == 0 else _power_cell_averages(spec.beta, h, n_cells)
    conv = fftconvolve(inc, a[None, :], axes=1)
    idx = np.arange(i0, i0 + n_out)
    y = np.zeros((inc.shape[0], n_out))
    pos = idx > 0
    y[:, pos] = conv[:, idx[pos] - 1]
    z = y - y[:, :1]
    z[:, 0] = 0.0
    return norm_CKH(spec.K, spec.H) * z


# ---------------------------------------------------------------------------
# coupled shifted / half-line processes


def _shifted_weight_rows(spec, times, edges_all, i_s):
    """Cell-averaged ``C(K,H) g`` for each output time, on the cells of ``edges_all``.

    ``i_s`` is the index of ``-s`` in ``edges_all``; output times are nodes of
    ``edges_all``.
    """
    c = norm_CKH(spec.K, spec.H)
    s = spec.shift_s
    n_cells = edges_all.size - 1
    rows = np.zeros((times.size, n_cells))
    for r, t in enumerate(times):
        if t <= 0:
            continue
        sp = KernelSpec(spec.K, spec.H, float(t), s)
        i_t = int(round((t - edges_all[0]) / (edges_all[1] - edges_all[0])))
        edges = edges_all[i_s:i_t + 1]
        if spec.degenerate:
            vals = np.where(edges[:-1] >= 0, 1.0, 0.0)
        else:
            vals = cell_averages(lambda v, sp=sp: delta_kernels(sp, "g", v), edges,
                                 (-s, 0.0, float(t)))
        rows[r, i_s:i_t] = c * vals
    return rows


def zhs_and_zh_paths(spec: KernelSpec, grid: Grid, L: float, n_paths: int, seed: int,
                     n_workers: int = 1) -> tuple:
    """Coupled shifted-compact and half-line processes on ``grid``.

    Both are driven by the same Brownian increments on ``[-L, t_end]`` with
    the step of ``grid`` (which must start at 0).  For ``K != 1/2`` the
    kernels are mapped by ``C(K) I^{K-1/2}_-`` and cut off at ``-L``.

    Returns
    -------
    (shifted, half_line) : tuple of PathEnsemble
    """
    s = spec.require_shift()
    if grid.t_start != 0:
        raise DomainError("grid must start at 0")
    if not L >= s:
        raise DomainError(f"need L >= s, got L={L}, s={s}")
    h = grid.step
    nL, ns = L / h, s / h
    if abs(nL - round(nL)) > 1e-9 * max(1.0, nL) or abs(ns - round(ns)) > 1e-9 * max(1.0, ns):
        raise DomainError("L and s must be multiples of the grid step")
    nL, ns = int(round(nL)), int(round(ns))
    n_cells = nL + grid.n_steps
    edges_all = -L + h * np.arange(n_cells + 1)
    edges_all[nL] = 0.0
    times = grid.times
    rows = _shifted_weight_rows(spec, times, edges_all, nL - ns)
    if spec.K != 0.5:
        rows = np.vstack([_fractional_weights(r, h, spec.K) if np.any(r) else r
                          for r in rows])

    def chunk(lo, hi):
        inc = _brownian_increments(seed, lo, hi, n_cells, h)
        zs = inc @ rows.T
        zh = _mvn_from_increments(spec, inc, h, nL, grid.n_steps + 1)
        return np.concatenate([zs, zh], axis=1)

    both = _map_chunks(chunk, n_paths, n_workers)
    m = grid.n_steps + 1
    meta = {"L": L, "s": s, "coupled": True}
    return (PathEnsemble(grid, both[:, :m], seed, spec.H, dict(meta, process="shifted")),
            PathEnsemble(grid, both[:, m:], seed, spec.H, dict(meta, process="half_line")))


def coupled_distance_mc(spec: KernelSpec, L: float, n_steps: int, n_paths: int, seed: int,
                        n_workers: int = 1) -> tuple:
    """Monte Carlo ``E[Z^{H,s}_t - Z^H_t]^2`` with its standard error.

    Uses :func:`zhs_and_zh_paths` on ``[0, t]`` with ``n_steps`` cells.
    """
    grid = Grid(0.0, spec.t, n_steps)
    zs, zh = zhs_and_zh_paths(spec, grid, L, n_paths, seed, n_workers)
    d2 = (zs.paths[:, -1] - zh.paths[:, -1]) ** 2
    return float(d2.mean()), float(d2.std(ddof=1) / math.sqrt(d2.size))


# ---------------------------------------------------------------------------
# covariance estimation


def empirical_covariance(ens: PathEnsemble, times) -> CovarianceEstimate:
    """Sample covariance at ``times`` with delete-one jackknife standard errors.

    The jackknife uses the closed form of the leave-one-out estimates of the
    centred covariance, so no resampling loop is needed.
    """
    n = ens.n_paths
    if n < 2:
        raise DomainError("need at least 2 paths")
    idx = [ens.grid.index_of(float(t)) for t in times]
    x = ens.paths[:, idx]
    d = x - x.mean(axis=0)
    S = d.T @ d
    cov = S / (n - 1)
    d2 = d * d
    Q = d2.T @ d2
    if n > 2:
        var = (n - 1) / n * (n / ((n - 1) * (n - 2))) ** 2 * (Q - S * S / n)
        stderr = np.sqrt(np.maximum(var, 0.0))
    else:
        stderr = np.full(cov.shape, np.nan)
    cov = 0.5 * (cov + cov.T)
    return CovarianceEstimate(tuple(float(t) for t in times), cov, stderr, n)
