"""Dissipative dynamics of a two-level emitter in a gapped photonic environment.

Submodules
----------
model      : spectral density, bath correlation kernel, derived scales
chainmap   : orthogonal-polynomial mapping of the continuum onto a chain
invlaplace : generic numerical inverse Laplace transforms (two methods)
rwa        : exact single-excitation solvers and the analytic long-time form
mps        : matrix-product-state TEBD evolution (full and RWA couplings)
polaron    : variational polaron theory of the renormalized splitting
analysis   : frequency/plateau/decay extraction and detuning sweeps
svgplot    : deterministic SVG line plots
cli        : command-line interface
"""

from .model import (
    DerivedScales,
    ModelParams,
    bath_correlation,
    correlation_by_quadrature,
    derived_scales,
    laplace_of_G,
    spectral_density,
)

__version__ = "0.1.0"

__all__ = [
    "DerivedScales",
    "ModelParams",
    "bath_correlation",
    "correlation_by_quadrature",
    "derived_scales",
    "laplace_of_G",
    "spectral_density",
    "__version__",
]
