"""Molchan-Golosov and Mandelbrot-Van Ness representations of fractional
Brownian motion, with the hypergeometric and fractional-calculus tooling
they need."""

from .special import ConvergenceError, DomainError

__version__ = "0.1.0"

__all__ = ["ConvergenceError", "DomainError", "__version__"]
