"""Numerical lab for stable zero-scalar-curvature hypersurfaces of R^4."""

__version__ = "0.1.0"
