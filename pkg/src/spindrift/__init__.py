"""Phase-space simulation of driven, dissipatively coupled two-level ensembles.

Three solution routes for one model: dense Lindblad integration (exact),
the deterministic mean-field flow (N -> infinity), and stochastic sampling
of the coherent-state quasiprobability on the Bloch ball, whose cost does
not grow with the Hilbert-space dimension.
"""

__version__ = "0.1.0"

from .model import BlochVector, ModelParams, SphericalPoint, convert_coords

__all__ = [
    "BlochVector",
    "ModelParams",
    "SphericalPoint",
    "convert_coords",
    "__version__",
]
