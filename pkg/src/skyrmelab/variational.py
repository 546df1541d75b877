"""Regularized energy functional whose critical points are self-similar profiles.

    J[psi] = 1/2 int_0^1 [ psi_rho^2 + F(psi) / (rho^2 (1 - rho^2)) ] rho^2 drho,

over radial psi with psi(1) = 0.  F equals -3 psi^2 (1 - psi^2 / 2) for
|psi| < 1, vanishes for |psi| >= sqrt(2), and is bridged by a quintic
smooth-step in between.

Discretization
--------------
Unknowns sit on an interior-offset grid; a single ghost node at rho = 1
carries the boundary value 0.  The kinetic term uses the geometric-mean
weight rho_j rho_{j+1} on each interval, which makes the discrete operator
-(1/rho^2)(rho^2 psi')' exact on quadratics at every node including the one
next to the origin; the potential term is the midpoint rule.  With the
default grid (spacing 1 / (n + 1/2)) the ghost lands exactly on rho = 1 and
every part of J is second-order accurate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from skyrmelab.radial_core import GridKind, RadialField, RadialGrid, make_grid

SQRT2 = math.sqrt(2.0)
ARMIJO = 1e-4
MAX_HALVINGS = 60
# J at the closed-form profile by adaptive quadrature (regression constant)
J0_REFERENCE = -0.27719425996762653


def variational_grid(n: int) -> RadialGrid:
    """Interior-offset grid whose ghost node ((n + 1/2) h) is exactly rho = 1."""
    return make_grid(n, R=n / (n + 0.5), kind=GridKind.INTERIOR_OFFSET)


# ---------------------------------------------------------------- potential


def _bridge_s(a):
    return (SQRT2 - a) / (SQRT2 - 1.0)


def F_reg(psi):
    """Regularized potential F(psi)."""
    p = np.asarray(psi, dtype=float)
    a = np.abs(p)
    inner = -3.0 * p * p * (1.0 - 0.5 * p * p)
    s = np.clip(_bridge_s(a), 0.0, 1.0)
    bridge = -1.5 * s**3 * (6.0 * s * s - 15.0 * s + 10.0)
    out = np.where(a < 1.0, inner, np.where(a < SQRT2, bridge, 0.0))
    return float(out) if out.ndim == 0 else out


def F_prime(psi):
    p = np.asarray(psi, dtype=float)
    a = np.abs(p)
    inner = -6.0 * p * (1.0 - p * p)
    s = np.clip(_bridge_s(a), 0.0, 1.0)
    # d/ds of -1.5 (6 s^5 - 15 s^4 + 10 s^3) is -45 s^2 (s - 1)^2; ds/d|psi| = -1/(sqrt2 - 1)
    dbridge = 45.0 * s * s * (s - 1.0) ** 2 / (SQRT2 - 1.0) * np.sign(p)
    out = np.where(a < 1.0, inner, np.where(a < SQRT2, dbridge, 0.0))
    return float(out) if out.ndim == 0 else out


def F_second(psi):
    p = np.asarray(psi, dtype=float)
    a = np.abs(p)
    inner = -6.0 + 18.0 * p * p
    s = np.clip(_bridge_s(a), 0.0, 1.0)
    d2 = -45.0 * (4.0 * s**3 - 6.0 * s * s + 2.0 * s) / (SQRT2 - 1.0) ** 2
    out = np.where(a < 1.0, inner, np.where(a < SQRT2, d2, 0.0))
    return float(out) if out.ndim == 0 else out


# ------------------------------------------------------------ discrete pieces


@dataclass(frozen=True)
class _Stencil:
    rho: np.ndarray        # nodes with the boundary node rho = 1 appended
    lengths: np.ndarray    # interval lengths rho_{j+1} - rho_j
    kin: np.ndarray        # rho_j rho_{j+1} / length
    pot: np.ndarray        # weight_j / (1 - rho_j^2)
    mass: np.ndarray       # rho_j^2 weight_j


def _stencil(grid: RadialGrid) -> _Stencil:
    if grid.kind is not GridKind.INTERIOR_OFFSET or grid.nodes[-1] >= 1.0:
        raise ValueError("the functional needs an interior-offset grid inside [0, 1)")
    rho = np.append(grid.nodes, 1.0)
    lengths = np.diff(rho)
    kin = rho[:-1] * rho[1:] / lengths
    nodes = grid.nodes
    pot = grid.weights / ((1.0 - nodes) * (1.0 + nodes))
    mass = nodes**2 * grid.weights
    return _Stencil(rho=rho, lengths=lengths, kin=kin, pot=pot, mass=mass)


def _diffs(values: np.ndarray) -> np.ndarray:
    # psi_{j+1} - psi_j with psi = 0 at the boundary node
    return np.diff(np.append(values, 0.0))


def kinetic_energy(f: RadialField) -> float:
    """int f_rho^2 rho^2 drho in the discretization used by J."""
    st = _stencil(f.grid)
    return float(np.dot(st.kin, _diffs(f.values) ** 2))


def weighted_l2(f: RadialField) -> float:
    """int f^2 rho^2 drho."""
    st = _stencil(f.grid)
    return float(np.dot(st.mass, f.values**2))


def _kinetic_gradient(st: _Stencil, v: np.ndarray) -> np.ndarray:
    flux = st.kin * _diffs(v)
    grad = -flux.copy()
    grad[1:] += flux[:-1]
    return grad


def evaluate_J(psi: RadialField) -> float:
    st = _stencil(psi.grid)
    v = psi.values
    return 0.5 * float(np.dot(st.kin, _diffs(v) ** 2)) + 0.5 * float(np.dot(st.pot, F_reg(v)))


def _euclidean_gradient(st: _Stencil, v: np.ndarray) -> np.ndarray:
    return _kinetic_gradient(st, v) + 0.5 * st.pot * F_prime(v)


def gradient_J(psi: RadialField) -> RadialField:
    """Gradient of J in the discrete L^2(rho^2 drho) inner product.

    Approximates -(1/rho^2)(rho^2 psi')' + F'(psi) / (2 rho^2 (1 - rho^2)),
    i.e. minus the profile ODE.
    """
    st = _stencil(psi.grid)
    return RadialField(psi.grid, _euclidean_gradient(st, psi.values) / st.mass)


def l2_norm(f: RadialField) -> float:
    return math.sqrt(weighted_l2(f))


def second_variation(ybar: RadialField, eta: RadialField, convention: str = "literal") -> float:
    """d^2/de^2 J[ybar + e eta] at e = 0.

    ``literal`` is the exact second derivative of the implemented J,
    int eta'^2 rho^2 + 1/2 int F''(ybar) eta^2 / (1 - rho^2).  ``doubled``
    replaces 1/2 F''(ybar) = -3 (1 - 3 ybar^2) by -6 (1 - 3 ybar^2), a
    variant kept for comparison; both give the same sign on the certified
    test direction.
    """
    if ybar.grid is not eta.grid:
        raise ValueError("ybar and eta must share a grid")
    st = _stencil(eta.grid)
    kinetic = float(np.dot(st.kin, _diffs(eta.values) ** 2))
    if convention == "literal":
        coeff = 0.5 * F_second(ybar.values)
    elif convention == "doubled":
        coeff = -6.0 * (1.0 - 3.0 * ybar.values**2)
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return kinetic + float(np.dot(st.pot, coeff * eta.values**2))


def hardy_quotient(eta: RadialField) -> float:
    """int eta'^2 rho^2 / int eta^2 / (rho^2 (1 - rho^2)) rho^2."""
    st = _stencil(eta.grid)
    denom = float(np.dot(st.pot, eta.values**2))
    if denom == 0.0:
        raise ValueError("hardy_quotient of the zero field is undefined")
    return float(np.dot(st.kin, _diffs(eta.values) ** 2)) / denom


# -------------------------------------------------------------- minimization


@dataclass
class MinimizeResult:
    psi: RadialField
    J_value: float
    iterations: int
    grad_norm: float
    converged: bool
    history: list[tuple[int, float, float]] = field(default_factory=list)
    message: str = ""


def _potential_change(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """F(b) - F(a), factored on the polynomial branch to keep relative accuracy."""
    inner = (np.abs(a) < 1.0) & (np.abs(b) < 1.0)
    out = np.where(inner, 0.0, F_reg(b) - F_reg(a))
    ai, bi = a[inner], b[inner]
    out[inner] = (bi - ai) * (bi + ai) * (-3.0 + 1.5 * (ai * ai + bi * bi))
    return out


def _energy_change(st: _Stencil, old: np.ndarray, new: np.ndarray) -> float:
    """J(new) - J(old) without cancellation between two nearly equal totals.

    Armijo tests near convergence compare changes far below the rounding
    error of J itself, so the difference is formed term by term.
    """
    d_old, d_new = _diffs(old), _diffs(new)
    kinetic = float(np.dot(st.kin, (d_new - d_old) * (d_new + d_old)))
    potential = float(np.dot(st.pot, _potential_change(old, new)))
    return 0.5 * (kinetic + potential)


def _preconditioner(st: _Stencil) -> np.ndarray:
    """Banded form of the H^1(rho^2 drho) Gram matrix (stiffness plus mass)."""
    n = st.mass.size
    ab = np.zeros((3, n))
    diag = st.kin.copy()
    diag[1:] += st.kin[:-1]
    ab[1] = diag + st.mass
    ab[0, 1:] = -st.kin[:-1]
    ab[2, :-1] = -st.kin[:-1]
    return ab


def minimize_J(init: RadialField, max_iter: int = 2000, tol: float = 1e-9) -> MinimizeResult:
    """Descent on J with Armijo backtracking.

    Steps follow the Sobolev (H^1) gradient, i.e. the L^2 gradient
    preconditioned by the stiffness-plus-mass Gram matrix, which keeps the
    iteration count independent of the grid.  Each trial step starts at 1
    and is halved until the Armijo condition with constant 1e-4 holds.
    """
    st = _stencil(init.grid)
    ab = _preconditioner(st)
    v = np.array(init.values, dtype=float)
    J = evaluate_J(init)
    history: list[tuple[int, float, float]] = []

    message = "max_iter reached"
    converged = False
    it = 0
    for it in range(max_iter + 1):
        g = _euclidean_gradient(st, v)
        gnorm = math.sqrt(float(np.dot(g * g, 1.0 / st.mass)))
        history.append((it, J, gnorm))
        if gnorm <= tol:
            converged = True
            message = "converged"
            break
        if it == max_iter:
            break
        d = -solve_banded((1, 1), ab, g)
        slope = float(np.dot(g, d))
        alpha = 1.0
        for _ in range(MAX_HALVINGS):
            trial = v + alpha * d
            dJ = _energy_change(st, v, trial)
            if dJ <= ARMIJO * alpha * slope:
                break
            alpha *= 0.5
        else:
            message = "line search failed"
            break
        v, J = trial, J + dJ

    psi = RadialField(init.grid, v)
    return MinimizeResult(
        psi=psi, J_value=evaluate_J(psi), iterations=it,
        grad_norm=history[-1][2], converged=converged, history=history, message=message,
    )


# ------------------------------------------------------------ monotonization


def _is_nondecreasing(v: np.ndarray) -> bool:
    return bool(np.all(np.diff(v) >= 0))


def monotonize(psi: RadialField, max_rounds: int = 100) -> RadialField:
    """Apply the flatten / reflect-flatten / clamp correctors until monotone.

    The field is oriented so that it starts near -1 (negating first if it
    starts positive) and must rise to 0 at rho = 1:

    * a positive excursion on [a, b] with peak y(d) < 1 is handled by
      reflecting [0, c) and flattening [c, d] at y(d), where c < d is the
      last point with y(c) <= -y(d);
    * a positive excursion with peak y(d) >= 1 is clamped to 1 on [0, c],
      c the last point of the excursion with y(c) >= 1;
    * once no positive excursion remains, every dip below an earlier level
      is flattened at that level (a running maximum).

    The first two correctors move the field to the other branch; since J is
    even in psi, the result is returned with the input's orientation.
    """
    v = np.array(psi.values, dtype=float)
    sign = -1.0 if v[0] > 0 else 1.0
    v *= sign
    for _ in range(max_rounds):
        positive = v > 0
        if positive.any():
            a = int(np.argmax(positive))
            b = a + int(np.argmin(positive[a:])) if not positive[a:].all() else v.size
            d = a + int(np.argmax(v[a:b]))
            peak = v[d]
            if peak < 1.0:
                below = np.nonzero(v[:d] <= -peak)[0]
                c = int(below[-1]) if below.size else 0
                v[:c] = -v[:c]
                v[c : d + 1] = peak
            else:
                c = d + int(np.nonzero(v[d:b] >= 1.0)[0][-1])
                v[: c + 1] = 1.0
            v = -v
            continue
        flattened = np.maximum.accumulate(v)
        if np.array_equal(flattened, v):
            break
        v = flattened
    return RadialField(psi.grid, sign * v)


# ------------------------------------------------------------ Lipschitz probe


def h1_distance(u: RadialField, v: RadialField) -> float:
    diff = u.with_values(u.values - v.values)
    return math.sqrt(kinetic_energy(diff) + weighted_l2(diff))


def lipschitz_probe(u: RadialField, v: RadialField) -> float:
    """|J(u) - J(v)| / ||u - v||_{H^1(rho^2 drho)}."""
    if u.grid is not v.grid:
        raise ValueError("fields must share a grid")
    dist = h1_distance(u, v)
    if dist == 0.0:
        raise ValueError("identical inputs give 0/0")
    return abs(evaluate_J(u) - evaluate_J(v)) / dist


def random_smooth_field(grid: RadialGrid, rng: np.random.Generator, modes: int = 6,
                        bound: float = SQRT2) -> RadialField:
    """Random even-in-rho field vanishing at rho = 1 with values in [-bound, bound]."""
    rho = grid.nodes
    k = np.arange(modes)
    amps = rng.normal(size=modes) / (1.0 + k)
    basis = np.cos(np.outer(rho, (k + 0.5) * np.pi))
    raw = basis @ amps
    scale = bound * rng.uniform(0.2, 1.0) / max(np.max(np.abs(raw)), 1e-300)
    return RadialField(grid, raw * scale)


def lipschitz_corpus(n: int = 256, pairs: int = 1000, seed: int = 42) -> np.ndarray:
    """Lipschitz ratios over random field pairs; deterministic for a seed."""
    grid = variational_grid(n)
    rng = np.random.default_rng(seed)
    ratios = np.empty(pairs)
    for i in range(pairs):
        u = random_smooth_field(grid, rng)
        v = random_smooth_field(grid, rng)
        ratios[i] = lipschitz_probe(u, v)
    return ratios
