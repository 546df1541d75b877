"""Self-similar profile: the reduced ODE on [0, 1] and its shooting solution.

With rho = -r/t and y = cos w, a self-similar solution satisfies

    y'' + (2/rho) y' + 3 y (1 - y^2) / (rho^2 (1 - rho^2)) = 0,

with y(0) = +-1 and y(1) = 0.  The smooth solution leaves rho = 0 along the
rho^2 mode, so it is fixed by one number ``c`` (the coefficient of rho^2).
We integrate from a small ``eps`` with a Taylor series, in the shifted
variable z = y - y(0) to avoid cancellation in 1 - y^2, and root-find ``c``
so that the trajectory reaches zero along the regular linear branch at
rho = 1.

The rational function 5 (1 - rho^2) / (5 + 3 rho^2) solves the problem
exactly; ``closed_form`` exposes it as an independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from skyrmelab.radial_core import GridKind, RadialField, RadialGrid

DEFAULT_EPS = 1e-4
DEFAULT_STEP = 1e-4
SERIES_ORDER = 6
BRACKET = (-4.0, -0.1)
DIVERGENCE_BOUND = 10.0
# substeps resolve the singular points: at most this fraction of the distance to them
ORIGIN_SUBSTEP = 0.002
EDGE_SUBSTEP = 0.01

# closed-form reference quantities
ORACLE_C = -8.0 / 5.0
ORACLE_SLOPE_AT_ONE = -1.25
ORACLE_MAX_SLOPE = 3.0 * math.sqrt(5.0) / 5.0
ORACLE_MAX_SLOPE_AT = math.sqrt(5.0) / 3.0


class BracketingError(RuntimeError):
    """No sign change of the shooting miss over the search interval."""


def closed_form(rho):
    """5 (1 - rho^2) / (5 + 3 rho^2), the + branch profile."""
    r = np.asarray(rho, dtype=float)
    if np.any((r < 0) | (r > 1)):
        raise ValueError("closed_form is defined for rho in [0, 1]")
    out = 5.0 * (1.0 - r) * (1.0 + r) / (5.0 + 3.0 * r * r)
    return float(out) if out.ndim == 0 else out


def closed_form_ext(r):
    """The same rational function without the [0, 1] restriction."""
    r = np.asarray(r, dtype=float)
    return 5.0 * (1.0 - r) * (1.0 + r) / (5.0 + 3.0 * r * r)


def closed_form_d1(r):
    r = np.asarray(r, dtype=float)
    return -80.0 * r / (5.0 + 3.0 * r * r) ** 2


def closed_form_d2(r):
    r = np.asarray(r, dtype=float)
    return -80.0 * (5.0 - 9.0 * r * r) / (5.0 + 3.0 * r * r) ** 3


def closed_form_angle(rho):
    """w = arccos Y with its first two derivatives, written without cancellation.

    1 - Y^2 = 16 rho^2 (5 - rho^2) / (5 + 3 rho^2)^2, so w, w' and w'' have
    closed forms that stay accurate at the pole rho -> 0.
    """
    rho = np.asarray(rho, dtype=float)
    d = 5.0 + 3.0 * rho * rho
    s = np.sqrt(5.0 - rho * rho)
    w = 2.0 * np.arcsin(2.0 * rho / np.sqrt(d))
    dw = 20.0 / (d * s)
    d2w = -20.0 * rho * (25.0 - 9.0 * rho * rho) / (d * d * s**3)
    return w, dw, d2w


def _check_open_interval(rho) -> np.ndarray:
    r = np.asarray(rho, dtype=float)
    if np.any((r <= 0) | (r >= 1)):
        raise ValueError("the profile ODE is singular at rho = 0 and rho = 1")
    return r


def closed_form_offset(rho):
    """Y - 1 = -8 rho^2 / (5 + 3 rho^2), free of cancellation near the pole."""
    rho = np.asarray(rho, dtype=float)
    return -8.0 * rho * rho / (5.0 + 3.0 * rho * rho)


def nonlinearity(y, rho, offset=None, branch: int = 1):
    """3 y (1 - y^2) / (rho^2 (1 - rho^2)) with factored denominators.

    If the offset z = y - branch is supplied, 1 - y^2 is formed as
    -z (2 branch + z), which keeps full relative precision where y -> branch.
    """
    y = np.asarray(y, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if offset is None:
        one_minus_y2 = (1.0 - y) * (1.0 + y)
    else:
        z = np.asarray(offset, dtype=float)
        one_minus_y2 = -z * (2.0 * branch + z)
    return 3.0 * y * one_minus_y2 / (rho * rho * (1.0 - rho) * (1.0 + rho))


def ode_residual(y, dy, d2y, rho, offset=None, branch: int = 1):
    """Residual of y'' + (2/rho) y' + 3 y (1 - y^2) / (rho^2 (1 - rho^2))."""
    r = _check_open_interval(rho)
    out = (np.asarray(d2y, dtype=float) + 2.0 * np.asarray(dy, dtype=float) / r
           + nonlinearity(y, r, offset, branch))
    return float(out) if np.ndim(out) == 0 else out


def closed_form_residual(rho):
    """Residual of the profile ODE at the closed form, evaluated via its offset."""
    return ode_residual(closed_form(rho), closed_form_d1(rho), closed_form_d2(rho), rho,
                        offset=closed_form_offset(rho))


def angle_residual(w, dw, d2w, rho):
    """Residual of w'' + (2/rho) w' - [3 sin^2 w / (rho^2 (1 - rho^2)) - w'^2] cot w.

    The bracket times cot w is expanded as 3 sin w cos w / (...) - w'^2 cot w
    so the first term stays finite where sin w vanishes.
    """
    r = _check_open_interval(rho)
    w = np.asarray(w, dtype=float)
    dw = np.asarray(dw, dtype=float)
    singular = r * r * (1.0 - r) * (1.0 + r)
    potential = 3.0 * np.sin(w) * np.cos(w) / singular
    kinetic = dw * dw * np.cos(w) / np.sin(w)
    out = np.asarray(d2w, dtype=float) + 2.0 * dw / r - potential + kinetic
    return float(out) if np.ndim(out) == 0 else out


def series_at_zero(c: float, order: int = SERIES_ORDER, branch: int = 1) -> np.ndarray:
    """Taylor coefficients of the smooth solution with y(0) = branch.

    Returns ``a`` with y(rho) = sum_k a[k] rho^k for k <= order; odd entries
    are zero.  The ODE is odd in y, so the branch -1 series is the negated
    branch +1 series (its rho^2 coefficient is -c).  Writing y = b + z, b = +-1, the ODE multiplied through by
    rho^2 (1 - rho^2) reads

        (1 - rho^2) L[z] = 3 (2 z + 3 b z^2 + z^3),   L[rho^k] = k (k + 1) rho^k,

    so the rho^2 coefficient is free (k(k+1) = 6 resonates with the linear
    term) and each higher even coefficient follows from the lower ones.
    """
    if not 2 <= order <= 8:
        raise ValueError("series order must be between 2 and 8")
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    z = np.zeros(order + 1)
    z[2] = c
    for k in range(4, order + 1, 2):
        zz = P.polymul(z, z)[: k + 1]
        zzz = P.polymul(zz, z)[: k + 1]
        nonlin = 3.0 * (3.0 * _coef(zz, k) + _coef(zzz, k))
        z[k] = ((k - 2) * (k - 1) * z[k - 2] + nonlin) / (k * (k + 1) - 6.0)
    out = z.copy()
    out[0] = 1.0
    return out if branch == 1 else -out


def _coef(a: np.ndarray, k: int) -> float:
    return float(a[k]) if k < a.size else 0.0


def _offset_rhs(rho: float, z: float, dz: float, b: float) -> float:
    # 3 y (1 - y^2) with y = b + z and b^2 = 1 is -3 (b + z) z (2 b + z)
    y = b + z
    nonlin = -3.0 * y * z * (2.0 * b + z) / (rho * rho * (1.0 - rho) * (1.0 + rho))
    return -2.0 * dz / rho - nonlin


def _rk4_step(rho: float, z: float, dz: float, step: float, b: float) -> tuple[float, float]:
    r_mid = rho + 0.5 * step
    k1z, k1v = dz, _offset_rhs(rho, z, dz, b)
    k2z = dz + 0.5 * step * k1v
    k2v = _offset_rhs(r_mid, z + 0.5 * step * k1z, k2z, b)
    k3z = dz + 0.5 * step * k2v
    k3v = _offset_rhs(r_mid, z + 0.5 * step * k2z, k3z, b)
    k4z = dz + step * k3v
    k4v = _offset_rhs(rho + step, z + step * k3z, k4z, b)
    return (z + step * (k1z + 2.0 * k2z + 2.0 * k3z + k4z) / 6.0,
            dz + step * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0)


@dataclass(frozen=True)
class Shot:
    """One shooting trajectory from rho = eps to 1 - eps."""

    c: float
    y: RadialField
    dy: RadialField
    offset: np.ndarray
    miss: float
    diverged: bool
    miss_quadratic: float


def _shot_grid(eps: float, h: float) -> tuple[RadialGrid, int, float]:
    steps = max(int(round((1.0 - 2.0 * eps) / h)), 4)
    step = (1.0 - 2.0 * eps) / steps
    nodes = eps + step * np.arange(steps + 1)
    nodes[-1] = 1.0 - eps
    weights = np.full(steps + 1, step)
    # trapezoid on [eps, 1 - eps], end cells stretched to cover [0, 1]
    weights[0] = weights[-1] = 0.5 * step + eps
    grid = RadialGrid(nodes=nodes, spacing=step, weights=weights,
                      kind=GridKind.INTERIOR_OFFSET, R=1.0)
    return grid, steps, step


def shoot(c: float, eps: float = DEFAULT_EPS, h: float = DEFAULT_STEP, branch: int = 1) -> Shot:
    """Integrate the profile ODE from the series at rho = eps to rho = 1 - eps.

    ``miss`` is the linear extrapolation y(1 - eps) + eps y'(1 - eps) of the
    trajectory to rho = 1; it vanishes for profiles reaching zero along the
    regular branch, up to an O(eps^2) bias.  ``miss_quadratic`` adds the
    eps^2 y''/2 term (y'' from the ODE), removing that bias; it is the
    function ``solve_profile`` drives to zero.  A trajectory with |y| > 10
    stops early and reports the signed value of y as its miss.
    """
    if not 0 < eps <= 1e-3:
        raise ValueError("eps must lie in (0, 1e-3]")
    if not 0 < h <= 1e-3:
        raise ValueError("h must lie in (0, 1e-3]")
    b = float(branch)
    coeffs = series_at_zero(c, SERIES_ORDER, branch)
    zc = coeffs.copy()
    zc[0] = 0.0
    z = float(P.polyval(eps, zc))
    dz = float(P.polyval(eps, P.polyder(zc)))

    grid, steps, step = _shot_grid(eps, h)
    zs = np.empty(steps + 1)
    dzs = np.empty(steps + 1)
    zs[0], dzs[0] = z, dz
    rho = eps
    diverged = False
    last = steps
    for k in range(steps):
        r_end = grid.nodes[k + 1]
        scale = min(ORIGIN_SUBSTEP * rho, EDGE_SUBSTEP * (1.0 - r_end))
        m = max(1, math.ceil((r_end - rho) / scale))
        sub = (r_end - rho) / m
        for _ in range(m):
            z, dz = _rk4_step(rho, z, dz, sub, b)
            rho += sub
        rho = r_end
        zs[k + 1], dzs[k + 1] = z, dz
        if not (abs(b + z) <= DIVERGENCE_BOUND and math.isfinite(dz)):
            diverged = True
            last = k + 1
            break

    if diverged:
        y_last = b + zs[last]
        if not math.isfinite(y_last):
            y_last = math.copysign(DIVERGENCE_BOUND, dzs[last - 1])
        miss = miss_q = y_last
        zs[last:] = y_last - b
        dzs[last:] = 0.0
    else:
        miss = (b + z) + eps * dz
        d2z = _offset_rhs(1.0 - eps, z, dz, b)
        miss_q = miss + 0.5 * eps * eps * d2z
    y = RadialField(grid, b + zs)
    dy = RadialField(grid, dzs)
    return Shot(c=float(c), y=y, dy=dy, offset=zs, miss=float(miss), diverged=diverged,
                miss_quadratic=float(miss_q))


@dataclass(frozen=True)
class ProfileSolution:
    """Shooting solution of the profile problem with its residual certificate."""

    y: RadialField
    dy: RadialField
    c_shoot: float
    branch: int
    residual_sup: float
    offset: np.ndarray | None = None

    @property
    def grid(self) -> RadialGrid:
        return self.y.grid

    @property
    def rho(self) -> np.ndarray:
        return self.y.grid.nodes

    def d2y(self) -> np.ndarray:
        return _second_derivative(self.dy)

    def residual(self) -> np.ndarray:
        return ode_residual(self.y.values, self.dy.values, self.d2y(), self.rho,
                            offset=self.offset_values(), branch=self.branch)

    def offset_values(self) -> np.ndarray:
        if self.offset is not None:
            return self.offset
        return self.y.values - self.branch

    def y_at_zero(self) -> float:
        return float(self.branch)

    def y_at_one(self) -> float:
        eps = 1.0 - self.rho[-1]
        return float(self.y.values[-1] + eps * self.dy.values[-1])

    def negate(self) -> "ProfileSolution":
        return ProfileSolution(
            y=-self.y, dy=-self.dy, c_shoot=-self.c_shoot, branch=-self.branch,
            residual_sup=self.residual_sup,
            offset=None if self.offset is None else -self.offset,
        )

    def is_monotone(self) -> bool:
        steps = np.diff(self.y.values)
        return bool(np.all(steps <= 0)) if self.branch == 1 else bool(np.all(steps >= 0))


def _second_derivative(dy: RadialField) -> np.ndarray:
    v = dy.values
    h = dy.grid.spacing
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    out[0] = (4 * (v[1] - v[0]) - (v[2] - v[0])) / (2 * h)
    out[-1] = (4 * (v[-1] - v[-2]) - (v[-1] - v[-3])) / (2 * h)
    return out


def profile_from_shot(shot: Shot, branch: int = 1) -> ProfileSolution:
    y, dy = shot.y, shot.dy
    d2y = _second_derivative(dy)
    res = ode_residual(y.values[1:-1], dy.values[1:-1], d2y[1:-1], y.grid.nodes[1:-1],
                       offset=shot.offset[1:-1], branch=branch)
    return ProfileSolution(
        y=y, dy=dy, c_shoot=shot.c, branch=branch,
        residual_sup=float(np.max(np.abs(res))), offset=shot.offset,
    )


def scan_miss(cs, eps: float = DEFAULT_EPS, h: float = DEFAULT_STEP) -> np.ndarray:
    return np.array([shoot(c, eps, h).miss for c in cs])


def solve_profile(
    tol: float = 1e-10,
    eps: float = DEFAULT_EPS,
    h: float = DEFAULT_STEP,
    branch: int = 1,
    scan_points: int = 14,
) -> ProfileSolution:
    """Root-find the rho^2 coefficient so the shot lands on y(1) = 0."""
    if tol < 1e-12:
        raise ValueError("tol must be at least 1e-12")
    cs = np.linspace(BRACKET[0], BRACKET[1], scan_points)
    misses = np.array([shoot(c, eps, h).miss_quadratic for c in cs])
    lo = hi = None
    # the smooth branch is the sign change closest to c = 0 (nodal profiles sit further out)
    for k in range(len(cs) - 1, 0, -1):
        if misses[k - 1] * misses[k] < 0:
            lo, hi = cs[k - 1], cs[k]
            break
    if lo is None:
        raise BracketingError(
            f"no sign change of the shooting miss for c in [{BRACKET[0]}, {BRACKET[1]}]"
        )
    c_root = brentq(lambda c: shoot(c, eps, h).miss_quadratic, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
    sol = profile_from_shot(shoot(c_root, eps, h))
    return sol if branch == 1 else sol.negate()


def oracle_profile(grid: RadialGrid, branch: int = 1) -> ProfileSolution:
    """Closed-form profile sampled on ``grid`` (interior nodes only)."""
    rho = grid.nodes
    y = branch * closed_form(rho)
    dy = branch * closed_form_d1(rho)
    res = ode_residual(y, dy, branch * closed_form_d2(rho), rho,
                       offset=branch * closed_form_offset(rho), branch=branch)
    return ProfileSolution(
        y=RadialField(grid, y), dy=RadialField(grid, dy), c_shoot=branch * ORACLE_C,
        branch=branch, residual_sup=float(np.max(np.abs(res))),
    )


@dataclass(frozen=True)
class AngleProfile:
    w: RadialField
    dw: RadialField

    def d2w(self) -> np.ndarray:
        return _second_derivative(self.dw)

    def residual(self) -> np.ndarray:
        return angle_residual(self.w.values, self.dw.values, self.d2w(), self.w.grid.nodes)


def to_angle(p: ProfileSolution) -> AngleProfile:
    """w = arccos y with w' = -y' / sqrt(1 - y^2).

    1 - y^2 is formed from the offset z = y - y(0) as -z (2 y(0) + z), which
    keeps full relative precision near the centre; where it still drops
    below 1e-12 the series of the profile supplies w' instead.
    """
    y = p.y.values
    if np.any(np.abs(y) > 1 + 1e-10):
        raise ValueError("|y| exceeds 1; arccos is undefined")
    z = p.offset_values()
    b = float(p.branch)
    one_minus_y2 = -z * (2.0 * b + z)
    w = np.where(np.abs(z) < 0.5, _arccos_near_pole(z, b), np.arccos(np.clip(y, -1.0, 1.0)))
    dw = np.empty_like(y)
    small = one_minus_y2 < 1e-12
    dw[~small] = -p.dy.values[~small] / np.sqrt(one_minus_y2[~small])
    if np.any(small):
        # y = b + c rho^2 + ...  =>  w' -> -b sqrt(-2 b c)
        dw[small] = -b * math.sqrt(max(-2.0 * b * p.c_shoot, 0.0))
    return AngleProfile(w=RadialField(p.grid, w), dw=RadialField(p.grid, dw))


def _arccos_near_pole(z: np.ndarray, b: float) -> np.ndarray:
    # arccos(1 - s) = 2 arcsin(sqrt(s / 2)); for b = -1, arccos(-1 + s) = pi - arccos(1 - s)
    s = np.clip(-b * z, 0.0, 2.0)
    base = 2.0 * np.arcsin(np.sqrt(0.5 * s))
    return base if b > 0 else np.pi - base
