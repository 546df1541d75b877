"""The profile ODE as an autonomous system in (y, q, rho), q = rho y'.

With a new time tau defined by d rho / d tau = rho (1 - rho^2), the profile
equation becomes

    y'   = (1 - rho^2) q
    q'   = (rho^2 - 1) q - 3 y (1 - y^2)
    rho' = rho (1 - rho^2)

The rho equation does not involve (y, q), so every Jacobian is block upper
triangular and its spectrum is that of the 2x2 (y, q) block plus the
scalar d rho'/d rho.  Eigenpairs are computed from this structure in closed
form.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from skyrmelab.profile import ProfileSolution

EQUILIBRIUM_TOL = 1e-12
BLOWUP_NORM = 1e3


@dataclass(frozen=True)
class PhasePoint:
    y: float
    q: float
    rho: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.y, self.q, self.rho)):
            raise ValueError("phase point must be finite")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho={self.rho} outside [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.y, self.q, self.rho])


def _field(y: float, q: float, rho: float) -> tuple[float, float, float]:
    s = 1.0 - rho * rho
    return s * q, -s * q - 3.0 * y * (1.0 - y) * (1.0 + y), rho * s


def vector_field(p: PhasePoint) -> np.ndarray:
    return np.array(_field(p.y, p.q, p.rho))


@dataclass(frozen=True)
class EquilibriumSet:
    """An isolated equilibrium, or a one-parameter family indexed by q."""

    name: str
    y: float
    rho: float
    family: bool

    def point(self, q: float = 0.0) -> PhasePoint:
        return PhasePoint(self.y, q if self.family else 0.0, self.rho)


def equilibria() -> list[EquilibriumSet]:
    return [
        EquilibriumSet("origin", 0.0, 0.0, False),
        EquilibriumSet("north", 1.0, 0.0, False),
        EquilibriumSet("south", -1.0, 0.0, False),
        EquilibriumSet("north-edge", 1.0, 1.0, True),
        EquilibriumSet("south-edge", -1.0, 1.0, True),
        EquilibriumSet("equator-edge", 0.0, 1.0, True),
    ]


def jacobian(p: PhasePoint) -> np.ndarray:
    y, q, rho = p.y, p.q, p.rho
    s = 1.0 - rho * rho
    return np.array([
        [0.0, s, -2.0 * rho * q],
        [-3.0 + 9.0 * y * y, -s, 2.0 * rho * q],
        [0.0, 0.0, 1.0 - 3.0 * rho * rho],
    ])


@dataclass(frozen=True)
class SpectralReport:
    point: PhasePoint
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns

    def block_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[:2]

    def to_dict(self) -> dict:
        return {
            "point": {"y": self.point.y, "q": self.point.q, "rho": self.point.rho},
            "jacobian": self.jacobian.tolist(),
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "eigenvectors": [
                [[float(z.real), float(z.imag)] for z in self.eigenvectors[:, k]]
                for k in range(3)
            ],
        }


def _block_eigenvector(B: np.ndarray, lam: complex) -> np.ndarray:
    """Null vector of B - lam I, taken orthogonal to its first nonzero row."""
    rows = B - lam * np.eye(2)
    k = 0 if np.any(rows[0] != 0) else 1
    u, w = rows[k]
    if u == 0 and w == 0:
        vec = np.array([1.0, 0.0], dtype=complex)
    else:
        vec = np.array([w, -u], dtype=complex)
    # normalized to unit q-component when it has one
    vec = vec / vec[1] if vec[1] != 0 else vec / vec[0]
    return np.array([vec[0], vec[1], 0.0], dtype=complex)


def eigen(p: PhasePoint) -> SpectralReport:
    """Closed-form eigenpairs at an equilibrium."""
    if np.max(np.abs(vector_field(p))) > EQUILIBRIUM_TOL:
        raise ValueError(f"{p} is not an equilibrium")
    J = jacobian(p)
    B = J[:2, :2]
    tr = B[0, 0] + B[1, 1]
    det = B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0]
    root = cmath.sqrt(tr * tr / 4.0 - det)
    lam1 = tr / 2.0 + root
    lam2 = tr / 2.0 - root
    lam3 = complex(J[2, 2])
    vecs = np.zeros((3, 3), dtype=complex)
    vecs[:, 0] = _block_eigenvector(B, lam1)
    vecs[:, 1] = _block_eigenvector(B, lam2)
    shifted = B - lam3 * np.eye(2)
    rhs = -J[:2, 2]
    if abs(np.linalg.det(shifted)) > 1e-14:
        u = np.linalg.solve(shifted, rhs)
    else:
        u = np.linalg.lstsq(shifted, rhs, rcond=None)[0]
    vecs[:, 2] = [u[0], u[1], 1.0]
    return SpectralReport(point=p, jacobian=J, eigenvalues=np.array([lam1, lam2, lam3]),
                          eigenvectors=vecs)


@dataclass
class Trajectory:
    tau: np.ndarray
    states: np.ndarray  # rows (y, q, rho)
    truncated: bool = False

    @property
    def y(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def q(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def rho(self) -> np.ndarray:
        return self.states[:, 2]

    def end(self) -> PhasePoint:
        y, q, rho = self.states[-1]
        return PhasePoint(float(y), float(q), float(min(max(rho, 0.0), 1.0)))

    def y_at_rho(self, rho: float) -> float:
        """Interpolate y at a given rho (rho is monotone along an orbit)."""
        r = self.rho
        order = np.argsort(r)
        return float(np.interp(rho, r[order], self.y[order]))


def flow(start: PhasePoint, tau_end: float, h: float = 1e-3) -> Trajectory:
    """Classical RK4 in tau; a negative ``tau_end`` integrates backwards."""
    if not h > 0:
        raise ValueError("h must be positive")
    steps = max(1, int(math.ceil(abs(tau_end) / h)))
    dt = tau_end / steps
    out = np.empty((steps + 1, 3))
    y, q, rho = start.y, start.q, start.rho
    out[0] = y, q, rho
    truncated = False
    last = steps
    for k in range(steps):
        a1 = _field(y, q, rho)
        a2 = _field(y + 0.5 * dt * a1[0], q + 0.5 * dt * a1[1], rho + 0.5 * dt * a1[2])
        a3 = _field(y + 0.5 * dt * a2[0], q + 0.5 * dt * a2[1], rho + 0.5 * dt * a2[2])
        a4 = _field(y + dt * a3[0], q + dt * a3[1], rho + dt * a3[2])
        y += dt * (a1[0] + 2 * a2[0] + 2 * a3[0] + a4[0]) / 6.0
        q += dt * (a1[1] + 2 * a2[1] + 2 * a3[1] + a4[1]) / 6.0
        rho += dt * (a1[2] + 2 * a2[2] + 2 * a3[2] + a4[2]) / 6.0
        out[k + 1] = y, q, rho
        if not (abs(y) + abs(q) + abs(rho) <= BLOWUP_NORM):
            truncated = True
            last = k + 1
            break
    return Trajectory(tau=dt * np.arange(last + 1), states=out[: last + 1], truncated=truncated)


def unstable_start(branch: int = 1, eps: float = 1e-3, c: float = -8.0 / 5.0) -> PhasePoint:
    """Point on the rho^2 mode leaving (branch, 0, 0): y = b + c eps^2, q = 2 c eps^2."""
    return PhasePoint(branch + branch * c * eps * eps, branch * 2.0 * c * eps * eps, eps)


@dataclass
class HeteroclinicReport:
    tangent_residual_sup: float
    tolerance: float
    start: PhasePoint
    end: PhasePoint
    q_tilde: float
    start_distance: float
    verified: bool
    residuals: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))

    def to_dict(self) -> dict:
        return {
            "tangent_residual_sup": self.tangent_residual_sup,
            "tolerance": self.tolerance,
            "start": [self.start.y, self.start.q, self.start.rho],
            "end": [self.end.y, self.end.q, self.end.rho],
            "q_tilde": self.q_tilde,
            "start_distance": self.start_distance,
            "verified": self.verified,
        }


def phase_path(p: ProfileSolution) -> np.ndarray:
    rho = p.rho
    return np.column_stack([p.y.values, rho * p.dy.values, rho])


def heteroclinic_check(p: ProfileSolution, tol: float | None = None) -> HeteroclinicReport:
    """Check that (y, rho y', rho) traced along the profile is an orbit.

    The tangent rho (1 - rho^2) d/drho of the phase path is formed by
    centered differences of the sampled path alone, then compared with the
    vector field at interior nodes.
    """
    path = phase_path(p)
    rho = p.rho
    h = p.grid.spacing
    tol = 100.0 * h * h if tol is None else tol
    d = (path[2:] - path[:-2]) / (rho[2:] - rho[:-2])[:, None]
    r = rho[1:-1]
    tangent = (r * (1.0 - r * r))[:, None] * d
    fields = np.array([_field(*row) for row in path[1:-1]])
    residual = np.max(np.abs(tangent - fields), axis=1)
    sup = float(np.max(residual))

    eps_end = 1.0 - rho[-1]
    q_end = path[-1, 1] + eps_end * (path[-1, 1] - path[-2, 1]) / (rho[-1] - rho[-2])
    y_end = p.y_at_one()
    start = PhasePoint(*map(float, path[0]))
    start_distance = float(np.linalg.norm(path[0] - np.array([p.branch, 0.0, 0.0])))
    end = PhasePoint(float(y_end), float(q_end), 1.0)
    verified = sup <= tol and abs(y_end) <= 1e-6 and start_distance <= 10.0 * rho[0]
    return HeteroclinicReport(
        tangent_residual_sup=sup, tolerance=tol, start=start, end=end, q_tilde=float(q_end),
        start_distance=start_distance, verified=bool(verified), residuals=residual,
    )


def nonisolated_equilibrium_scan(n: int = 201) -> float:
    """Minimum of |vector field| over (y, q, rho) with rho in (0, 1) on a grid.

    Positive means no equilibrium exists off the rho = 0, 1 planes.
    """
    ys = np.linspace(-2.0, 2.0, n)
    qs = np.linspace(-2.0, 2.0, n)
    rhos = np.linspace(0.0, 1.0, n)[1:-1]
    Y, Q, R = np.meshgrid(ys, qs, rhos, indexing="ij")
    s = 1.0 - R * R
    norm = np.sqrt((s * Q) ** 2 + (s * Q + 3.0 * Y * (1 - Y * Y)) ** 2 + (R * s) ** 2)
    return float(norm.min())
