"""Spectral manifold laboratory.

Graph Laplacians, heat-kernel PCA and spectral perturbation bounds on
analytic manifolds with exactly known Laplace-Beltrami spectra.
"""

from . import (
    errors,
    experiments,
    graph_laplacian,
    heat_pca,
    kernels,
    manifolds,
    perturbation,
    spectral,
)
from .manifolds import Circle, PointCloud, TorusD, TwoCircles, make_manifold

__version__ = "0.1.0"

__all__ = [
    "Circle",
    "PointCloud",
    "TorusD",
    "TwoCircles",
    "errors",
    "experiments",
    "graph_laplacian",
    "heat_pca",
    "kernels",
    "make_manifold",
    "manifolds",
    "perturbation",
    "spectral",
]
