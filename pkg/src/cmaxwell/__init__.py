"""Dirac-Bergmann constrained Hamiltonian engine and canonical Maxwell solver."""

from cmaxwell.geometry import GridSpec, SpacetimeMetric

__version__ = "0.1.0"

__all__ = ["GridSpec", "SpacetimeMetric", "__version__"]
