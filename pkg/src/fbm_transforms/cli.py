"""Command-line entry point.

Subcommands: ``hyp``, ``kernel``, ``simulate``, ``covcheck``, ``converge``,
``bounds``.  Exit codes: 0 success/pass, 1 check failed, 2 domain or usage
error, 3 convergence failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .convergence import (DEFAULT_QUAD_TOL, check_bound, distance_curve, fit_rate,
                          format_rate_summary, write_distance_csv)
from .kernels import (KernelSpec, bound_constants, delta_kernels, mg_kernel, mvn_kernel,
                      shifted_mg_integrand)
from .simulate import (Grid, PathEnsemble, empirical_covariance, fbm_covariance,
                       mg_transform_path, mvn_transform_path, sample_brownian,
                       sample_fbm_exact)
from .special import ConvergenceError, DomainError, hyp2f1

EXIT_OK, EXIT_FAIL, EXIT_DOMAIN, EXIT_CONVERGENCE, EXIT_IO = 0, 1, 2, 3, 4


def _g(x) -> str:
    return f"{float(x):.17g}"


# ---------------------------------------------------------------------------
# configs


@dataclass(frozen=True)
class SimulateConfig:
    method: str
    K: float
    H: float
    t: float
    steps: int
    paths: int
    seed: int
    out: str
    trunc_l: float
    threads: int
    driver_out: str | None = None

    def __post_init__(self):
        if self.method not in ("exact", "mg", "mvn"):
            raise DomainError(f"unknown method {self.method!r}")
        KernelSpec(self.K, self.H, self.t)
        Grid(0.0, self.t, self.steps)
        if self.paths < 1:
            raise DomainError("--paths must be >= 1")
        if not self.trunc_l > 0:
            raise DomainError("--trunc-l must be positive")


@dataclass(frozen=True)
class ConvergeConfig:
    spec: KernelSpec
    shifts: tuple
    d: float
    L_rule: float
    quad_tol: float
    slope_tol: float
    out: str

    def __post_init__(self):
        if len(self.shifts) < 4:
            raise DomainError("--shifts needs at least 4 values")
        if not self.d > 0:
            raise DomainError("--d must be positive")
        if self.L_rule < 4:
            raise DomainError("--trunc-l (multiple of s) must be at least 4")


# ---------------------------------------------------------------------------
# commands


def cmd_hyp(args) -> int:
    print(_g(hyp2f1(args.a, args.b, args.c, args.z)))
    return EXIT_OK


def cmd_kernel(args) -> int:
    spec = KernelSpec(args.hurst_k, args.hurst_h, args.t, args.shift)
    pts = np.asarray(args.points, dtype=float)
    if args.kind == "mg":
        vals = mg_kernel(spec, pts)
    elif args.kind == "mvn":
        vals = mvn_kernel(spec, pts)
    elif args.kind == "shifted":
        vals = shifted_mg_integrand(spec, pts)
    else:
        vals = delta_kernels(spec, args.kind, pts)
    for v, k in zip(pts, np.atleast_1d(vals)):
        print(f"{_g(v)},{_g(k)}")
    return EXIT_OK


def _simulate(cfg: SimulateConfig):
    spec = KernelSpec(cfg.K, cfg.H, cfg.t)
    grid = Grid(0.0, cfg.t, cfg.steps)
    h = grid.step
    if cfg.method == "exact":
        return sample_fbm_exact(cfg.H, grid, cfg.paths, cfg.seed, n_workers=cfg.threads), None
    n_left = int(math.ceil(cfg.trunc_l / h - 1e-9))
    L = n_left * h
    if cfg.method == "mg":
        if cfg.K == 0.5 or spec.degenerate:
            driver = sample_fbm_exact(cfg.K, grid, cfg.paths, cfg.seed, n_workers=cfg.threads)
        else:
            driver = sample_brownian(Grid(-L, cfg.t, n_left + cfg.steps), cfg.paths, cfg.seed,
                                     n_workers=cfg.threads)
        return mg_transform_path(spec, driver, n_workers=cfg.threads), driver
    driver = sample_brownian(Grid(-L, cfg.t, n_left + cfg.steps), cfg.paths, cfg.seed,
                             n_workers=cfg.threads)
    return mvn_transform_path(spec, driver, L, n_workers=cfg.threads), driver


def cmd_simulate(args) -> int:
    cfg = SimulateConfig(args.method, args.hurst_k, args.hurst_h, args.t, args.steps,
                         args.paths, args.seed, args.out, args.trunc_l, args.threads,
                         args.driver_out)
    ens, driver = _simulate(cfg)
    ens.to_csv(cfg.out)
    if cfg.driver_out and driver is not None:
        driver.to_csv(cfg.driver_out)
    if "truncation_bias" in ens.meta:
        print(f"truncation_bias={_g(ens.meta['truncation_bias'])}")
    print(f"wrote {cfg.out}")
    return EXIT_OK


def cmd_covcheck(args) -> int:
    ens = PathEnsemble.from_csv(args.ensemble, hurst=args.hurst_h)
    times = args.times or list(ens.grid.times[1:][:: max(1, ens.grid.n_steps // 4)])
    est = empirical_covariance(ens, times)
    tt = np.asarray(est.times)
    theory = fbm_covariance(args.hurst_h, tt[:, None], tt[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.abs(est.matrix - theory) / est.stderr
    worst = float(np.nanmax(np.where(est.stderr > 0, z, 0.0)))
    print(f"max_abs_z={_g(worst)}")
    print(f"n_paths={est.n_paths}")
    ok = worst <= args.z_max
    print(f"pass={'true' if ok else 'false'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_converge(args) -> int:
    spec = KernelSpec(args.hurst_k, args.hurst_h, args.t)
    cfg = ConvergeConfig(spec, tuple(sorted(args.shifts)), args.d, args.trunc_l,
                         args.quad_tol, args.slope_tol, args.out)
    os.makedirs(cfg.out, exist_ok=True)
    curve_path = os.path.join(cfg.out, "distance_curve.csv")
    rate_path = os.path.join(cfg.out, "rate_summary.txt")
    if spec.degenerate:
        print("K == H: the representations coincide, every distance is 0")
        curve = distance_curve(spec, cfg.shifts, cfg.L_rule, cfg.quad_tol)
        write_distance_csv(curve_path, curve)
        with open(rate_path, "w") as fh:
            fh.write("degenerate=true\npass=true\n")
        return EXIT_OK
    consts = bound_constants(spec, cfg.d)
    curve = distance_curve(spec, cfg.shifts, cfg.L_rule, cfg.quad_tol)
    report = check_bound(curve, consts)
    rate = fit_rate(curve)
    if spec.K < 0.5:
        slope_ok = rate.slope <= rate.target_exponent + cfg.slope_tol
    else:
        slope_ok = rate.within(cfg.slope_tol)
    passed = slope_ok and report.passed
    write_distance_csv(curve_path, curve, report)
    extra = {"min_margin": min(r.margin for r in report.rows),
             "slope_ok": "true" if slope_ok else "false",
             "margins_ok": "true" if report.passed else "false"}
    if consts.truncated:
        extra["truncated_maxima"] = " ".join(f"G{i}" for i in consts.truncated)
    text = format_rate_summary(rate, passed, extra)
    with open(rate_path, "w") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_bounds(args) -> int:
    spec = KernelSpec(args.hurst_k, args.hurst_h, args.t)
    c = bound_constants(spec, args.d)
    for name in ("c1", "c2", "c3", "c4"):
        val = getattr(c, name)
        if val is not None:
            print(f"{name}={_g(val)}")
    print(f"d={_g(c.d)}")
    print(f"valid_from_s={_g(c.valid_from_s)}")
    for k in sorted(c.g_max):
        print(f"{k}={_g(c.g_max[k])}")
    if c.truncated:
        print("truncated_maxima=" + " ".join(f"G{i}" for i in c.truncated))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_spec(p, shift=False):
    p.add_argument("--hurst-k", type=float, default=0.5, help="Hurst index K of the driver")
    p.add_argument("--hurst-h", type=float, required=True, help="target Hurst index H")
    p.add_argument("--t", type=float, default=1.0, help="horizon t > 0")
    if shift:
        p.add_argument("--shift", type=float, default=None, help="shift s > 0")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fbm-transforms", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hyp", help="evaluate F(a, b, c, z)")
    for name in ("a", "b", "c", "z"):
        p.add_argument(name, type=float)
    p.set_defaults(func=cmd_hyp)

    p = sub.add_parser("kernel", help="evaluate a kernel at points")
    _add_spec(p, shift=True)
    p.add_argument("--kind", choices=["mg", "mvn", "shifted", "f", "g", "h", "k"], default="mg")
    p.add_argument("--points", type=float, nargs="+", required=True)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("simulate", help="simulate an ensemble and write CSV")
    _add_spec(p)
    p.add_argument("--method", choices=["exact", "mg", "mvn"], default="exact")
    p.add_argument("--steps", type=int, default=256)
    p.add_argument("--paths", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trunc-l", type=float, default=64.0,
                   help="left truncation L of the half-line integral / driver extension")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--driver-out", default=None, help="also write the driver ensemble")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("covcheck", help="compare an ensemble with the fBm covariance")
    p.add_argument("ensemble")
    p.add_argument("--hurst-h", type=float, required=True)
    p.add_argument("--times", type=float, nargs="*", default=None)
    p.add_argument("--z-max", type=float, default=5.0)
    p.set_defaults(func=cmd_covcheck)

    p = sub.add_parser("converge", help="distance curve, rate fit and bound margins")
    _add_spec(p)
    p.add_argument("--shifts", type=float, nargs="+", default=[8, 16, 32, 64, 128, 256])
    p.add_argument("--d", type=float, default=1.0)
    p.add_argument("--trunc-l", type=float, default=4.0, help="split point L as a multiple of s")
    p.add_argument("--quad-tol", type=float, default=DEFAULT_QUAD_TOL)
    p.add_argument("--slope-tol", type=float, default=0.15)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("bounds", help="print the bound constants")
    _add_spec(p)
    p.add_argument("--d", type=float, default=1.0)
    p.set_defaults(func=cmd_bounds)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
