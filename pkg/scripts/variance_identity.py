"""Quadrature variance of the half-line representation against t^(2H).

Usage: python3 scripts/variance_identity.py
Also shows how truncating the integral at -L biases the variance.
"""

from fbm_transforms.convergence import variance_identity
from fbm_transforms.kernels import KernelSpec


def main():
    print(f"{'K':>4} {'H':>5} {'t':>3} {'ratio':>20} {'ratio (cut at -128)':>20}")
    for K in (0.5, 0.3, 0.7):
        for H in (0.25, 0.4, 0.5, 0.75):
            for t in (1.0, 2.0):
                spec = KernelSpec(K, H, t)
                full = variance_identity(spec, L=128.0)
                cut = variance_identity(spec, L=128.0, truncate=True)
                print(f"{K:4.2f} {H:5.2f} {t:3.0f} {full:20.15f} {cut:20.15f}")


if __name__ == "__main__":
    main()
