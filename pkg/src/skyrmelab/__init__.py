"""Self-similar blow-up laboratory for the strong-field equivariant Skyrme model.

The 5+1 dimensional equivariant model with target S^5 reduces, under the
self-similar ansatz u(t, r) = w(-r/t) and y = cos w, to a singular
boundary-value problem on [0, 1].  This package constructs its smooth
monotone solution by shooting and by minimizing the associated energy,
checks the phase-space structure of that solution, and evolves the
corresponding Cauchy data to exhibit gradient blow-up at the origin.
"""

from skyrmelab.radial_core import (
    GridKind,
    RadialField,
    RadialGrid,
    derivative,
    h1_seminorm,
    integrate,
    interpolate,
    make_grid,
)

__version__ = "0.1.0"

__all__ = [
    "GridKind",
    "RadialField",
    "RadialGrid",
    "derivative",
    "h1_seminorm",
    "integrate",
    "interpolate",
    "make_grid",
]
