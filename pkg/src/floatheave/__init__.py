"""Linear water waves around a half-immersed cylinder in heave.

Modules
-------
grids
    Surface, line and field-point discretizations and the maps between them.
halfplane
    Poisson extension, Hilbert transform and Dirichlet-to-Neumann map on the half-plane.
omega
    Harmonic extension and Dirichlet-to-Neumann map outside the half-disk.
coupling
    Coupled wave and heave dynamics, energies and time stepping.
verify
    Named numerical checks of every identity and bound.
config, cli
    Configuration files and the ``floatheave`` command.
"""

from .grids import (
    FieldPoints,
    InvalidParameterError,
    LineFunction,
    LineGrid,
    SurfaceFunction,
    SurfaceGrid,
    build_line_grid,
    build_surface_grid,
    norm,
)

__version__ = "0.1.0"

__all__ = [
    "FieldPoints",
    "InvalidParameterError",
    "LineFunction",
    "LineGrid",
    "SurfaceFunction",
    "SurfaceGrid",
    "build_line_grid",
    "build_surface_grid",
    "norm",
    "__version__",
]
