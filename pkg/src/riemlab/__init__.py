"""riemlab: geodesics, curvature jets, invariant subspaces, convex bodies."""

__version__ = "0.1.0"
