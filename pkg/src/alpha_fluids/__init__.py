"""alpha-fluids: averaged incompressible hydrodynamics on the flat 2D torus,
a Camassa-Holm suite on the interval/circle, vortex-blob dynamics in the
plane, and the curvature/Jacobi geometry of the volume-preserving
diffeomorphism group at desk scale."""

__version__ = "0.1.0"

from .spectral import (  # noqa: F401
    AlphaParam,
    SpectralField,
    TorusGrid2D,
    make_grid,
    to_physical,
    to_spectral,
)
