"""Coupled Monte Carlo distance versus the deterministic integral.

Usage: python3 scripts/coupling_crosscheck.py [N_PATHS]
"""

import sys

from fbm_transforms.convergence import l2_distance
from fbm_transforms.kernels import KernelSpec
from fbm_transforms.simulate import coupled_distance_mc

CASES = [(0.5, 0.7, 16.0), (0.5, 0.3, 16.0), (0.7, 0.4, 8.0)]


def main(n_paths="10000"):
    n_paths = int(n_paths)
    L = 64.0
    print(f"{'K':>4} {'H':>4} {'s':>5} {'MC':>11} {'stderr':>9} {'quadrature':>11} {'z':>6}")
    for K, H, s in CASES:
        spec = KernelSpec(K, H, 1.0, s)
        mean, se = coupled_distance_mc(spec, L, n_steps=64, n_paths=n_paths, seed=8)
        det = l2_distance(spec, s, L=L, truncate=True)
        print(f"{K:4.2f} {H:4.2f} {s:5.0f} {mean:11.5g} {se:9.2g} {det:11.5g} "
              f"{(mean - det) / se:6.2f}")


if __name__ == "__main__":
    main(*sys.argv[1:])
