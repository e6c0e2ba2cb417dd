"""Numerical construction and certification of torus-invariant metrics with
positive Ricci curvature on cohomogeneity-two torus manifolds."""

__version__ = "0.1.0"
