"""Uniform radial grids, second-order quadrature and finite differences.

Everything downstream (profile, energy functional, wave evolution) samples
functions of a single radial variable on one of two uniform layouts:

* ``interior-offset``: nodes at (j + 1/2) R / n, never touching 0 or R, so
  integrands with 1/rho^2 or 1/(1 - rho^2) factors are never evaluated at
  their singular points.  Weights are the composite midpoint rule.
* ``endpoint-inclusive``: nodes at j R / n including both ends, with the
  composite trapezoid rule.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class GridKind(str, enum.Enum):
    INTERIOR_OFFSET = "interior-offset"
    ENDPOINT_INCLUSIVE = "endpoint-inclusive"


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform grid on [0, R] with quadrature weights aligned to the nodes."""

    nodes: np.ndarray
    spacing: float
    weights: np.ndarray
    kind: GridKind
    R: float

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("grid needs at least two nodes")
        if weights.shape != nodes.shape:
            raise ValueError("weights must align with nodes")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if nodes[0] < 0 or nodes[-1] > self.R * (1 + 1e-14):
            raise ValueError("nodes must lie in [0, R]")
        if self.kind is GridKind.INTERIOR_OFFSET and (nodes[0] == 0 or nodes[-1] == self.R):
            raise ValueError("interior-offset grids exclude both endpoints")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return self.nodes.size

    @property
    def n(self) -> int:
        return self.nodes.size

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> "RadialField":
        return RadialField(self, np.asarray(func(self.nodes), dtype=float))


def make_grid(n: int, R: float = 1.0, kind: GridKind | str = GridKind.INTERIOR_OFFSET) -> RadialGrid:
    """Build a uniform grid of ``n`` cells on [0, R].

    An interior-offset grid has ``n`` nodes at cell midpoints; an
    endpoint-inclusive grid has ``n + 1`` nodes at the cell edges.
    """
    if int(n) != n or n < 8:
        raise ValueError(f"unusable discretization: n={n} (need n >= 8)")
    if not R > 0:
        raise ValueError(f"unusable discretization: R={R} (need R > 0)")
    n = int(n)
    kind = GridKind(kind)
    h = R / n
    if kind is GridKind.INTERIOR_OFFSET:
        nodes = (np.arange(n) + 0.5) * h
        weights = np.full(n, h)
    else:
        nodes = np.arange(n + 1) * h
        nodes[-1] = R
        weights = np.full(n + 1, h)
        weights[0] = weights[-1] = 0.5 * h
    return RadialGrid(nodes=nodes, spacing=h, weights=weights, kind=kind, R=float(R))


@dataclass(frozen=True, eq=False)
class RadialField:
    """Real samples of a radial function, one per grid node."""

    grid: RadialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.nodes.shape:
            raise ValueError(
                f"field has {values.size} values for {self.grid.n} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def with_values(self, values: np.ndarray) -> "RadialField":
        return RadialField(self.grid, values)

    def __neg__(self) -> "RadialField":
        return RadialField(self.grid, -self.values)


def integrate(f: RadialField, weight: str = "plain") -> float:
    """Composite second-order quadrature of f over [0, R].

    ``weight="rho2"`` integrates f(rho) rho^2 instead of f(rho).
    """
    if weight == "plain":
        integrand = f.values
    elif weight == "rho2":
        integrand = f.values * f.grid.nodes**2
    else:
        raise ValueError(f"unknown weight {weight!r}")
    return float(np.dot(f.grid.weights, integrand))


def derivative(f: RadialField) -> RadialField:
    """Second-order finite-difference derivative on the same grid.

    Centered in the interior, one-sided three-point at the two ends.  The
    stencils are written as differences of samples so constants map to
    exactly zero.
    """
    v = f.values
    if v.size < 4:
        raise ValueError("derivative needs at least 4 nodes")
    h = f.grid.spacing
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    out[0] = (4 * (v[1] - v[0]) - (v[2] - v[0])) / (2 * h)
    out[-1] = (4 * (v[-1] - v[-2]) - (v[-1] - v[-3])) / (2 * h)
    return RadialField(f.grid, out)


def interpolate(f: RadialField, x: float) -> float:
    """Local four-point Lagrange interpolation; exact for cubics."""
    nodes = f.grid.nodes
    if not nodes[0] <= x <= nodes[-1]:
        raise ValueError(f"x={x} outside grid hull [{nodes[0]}, {nodes[-1]}]")
    i = int(np.searchsorted(nodes, x)) - 2
    i = min(max(i, 0), nodes.size - 4)
    xs = nodes[i : i + 4]
    ys = f.values[i : i + 4]
    total = 0.0
    for k in range(4):
        basis = 1.0
        for m in range(4):
            if m != k:
                basis *= (x - xs[m]) / (xs[k] - xs[m])
        total += ys[k] * basis
    return float(total)


def h1_seminorm(f: RadialField) -> float:
    """(int f_rho^2 rho^2 drho)^(1/2)."""
    df = derivative(f)
    return float(np.sqrt(integrate(df.with_values(df.values**2), weight="rho2")))
