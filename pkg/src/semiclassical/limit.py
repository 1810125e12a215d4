"""Radial ground states of ``-Lap w + a w = b f(w)`` in R^d, d in {1, 2, 3}.

Two independent routes are provided: shooting on ``w(0)`` (the ground state
is the separatrix between trajectories that cross zero and trajectories that
turn back up) and Sobolev-preconditioned descent on the discrete Nehari set.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_banded
from scipy.optimize import brentq
from scipy.special import k0e, k1e

from .nonlinearity import Nonlinearity, NumericalError, radial_stiffness, sphere_area

__all__ = [
    "LimitProblem",
    "GroundState",
    "SolverError",
    "ConsistencyError",
    "solve_limit",
    "ground_energy",
    "nehari_project",
    "check_energy_monotonicity",
    "discrete_energy",
    "discrete_gradient",
]


class SolverError(RuntimeError):
    pass


class ConsistencyError(RuntimeError):
    pass


@dataclass(frozen=True)
class LimitProblem:
    d: int
    a: float
    b: float
    f: Nonlinearity

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("reduced dimension must be 1, 2 or 3")
        if not (self.a > 0 and self.b > 0):
            raise ValueError("a and b must be positive")
        self.f.check_subcritical(self.d)

    @property
    def omega(self) -> float:
        """Measure of the unit sphere of R^d (2 for d = 1)."""
        return sphere_area(self.d - 1)

    def default_rho_max(self) -> float:
        return 30.0 / np.sqrt(self.a)


@dataclass
class GroundState:
    problem: LimitProblem
    rho: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    energy: float
    method: str
    info: dict = field(default_factory=dict)

    @property
    def w0(self) -> float:
        return float(self.w[0])

    def nehari_residual(self) -> float:
        """Relative defect of ``int |grad w|^2 + a w^2 = b int f(w) w``."""
        P = self.problem
        lhs = _radial_integral(self.rho, P.d, self.dw ** 2 + P.a * self.w ** 2)
        rhs = P.b * _radial_integral(self.rho, P.d, P.f.f(np.maximum(self.w, 0)) * self.w)
        return float(abs(lhs - rhs) / lhs)

    def __call__(self, rho):
        """Profile at radii ``rho`` (absolute value taken), zero beyond the grid."""
        return np.interp(np.abs(rho), self.rho, self.w, right=0.0)

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.rho, self.w]), delimiter=",",
                   header="rho,w", comments="", fmt="%.17g")


# ---------------------------------------------------------------------------
# shooting
# ---------------------------------------------------------------------------
def _rhs(problem: LimitProblem):
    a, b, d, f = problem.a, problem.b, problem.d, problem.f

    def fext(s):
        return np.sign(s) * f.f(np.abs(s))

    def rhs(rho, y):
        return [y[1], a * y[0] - b * fext(y[0]) - (d - 1) / rho * y[1]]

    return rhs


def _start(problem: LimitProblem, w0: float, rho0: float):
    c = (problem.a * w0 - problem.b * float(problem.f.f(w0))) / problem.d
    return [w0 + 0.5 * c * rho0 ** 2, c * rho0]


def _shoot(problem, w0, rho_max, rho0, dense=False, rtol=1e-12):
    """Integrate from w(0) = w0; returns (+1 overshoot, -1 undershoot, solution)."""
    rhs = _rhs(problem)

    def cross(rho, y):
        return y[0]

    cross.terminal = True
    cross.direction = -1

    def turn(rho, y):
        return y[1]

    turn.terminal = True
    turn.direction = 1
    sol = solve_ivp(rhs, (rho0, rho_max), _start(problem, w0, rho0), method="DOP853",
                    rtol=rtol, atol=1e-16 * max(w0, 1.0), events=(cross, turn),
                    dense_output=dense)
    if sol.t_events[0].size:
        return 1, sol
    if sol.t_events[1].size:
        return -1, sol
    # ran to rho_max: classify by the sign of the last slope
    return (1 if sol.y[1, -1] < 0 else -1), sol


def _linear_tail(problem: LimitProblem, rho):
    """Decaying solution of ``w'' + (d-1)/rho w' = a w`` and its derivative (up to scale)."""
    k = np.sqrt(problem.a)
    if problem.d == 1:
        return np.exp(-k * rho), -k * np.exp(-k * rho)
    if problem.d == 3:
        e = np.exp(-k * rho)
        return e / rho, -e * (k * rho + 1) / rho ** 2
    # modified Bessel K0, scaled to avoid underflow relative to the matching point
    e = np.exp(-k * rho)
    return k0e(k * rho) * e, -k * k1e(k * rho) * e


def _shooting(problem: LimitProblem, n: int, rho_max: float, sep_tol: float = 1e-6):
    f = problem.f
    w_eq = float(f.switch_point(problem.a, problem.b))
    rho0 = 1e-8 if problem.d > 1 else 1e-300
    lo, hi = w_eq, 2.0 * w_eq
    for _ in range(60):
        if _shoot(problem, hi, rho_max, rho0, rtol=1e-8)[0] > 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise SolverError("no overshooting initial value found for the bisection bracket")
    iters = 0
    while hi - lo > 1e-12 * hi:
        mid = 0.5 * (lo + hi)
        rtol = 1e-12 if hi - lo < 1e-5 * hi else 1e-9
        if _shoot(problem, mid, rho_max, rho0, rtol=rtol)[0] > 0:
            hi = mid
        else:
            lo = mid
        iters += 1
        if iters > 200:
            raise SolverError("bisection on w(0) did not terminate")

    rho = np.linspace(0.0, rho_max, n)
    _, s_lo = _shoot(problem, lo, rho_max, rho0, dense=True)
    _, s_hi = _shoot(problem, hi, rho_max, rho0, dense=True)
    end = min(s_lo.t[-1], s_hi.t[-1])
    keep = rho <= end
    r_k = np.maximum(rho[keep], rho0)
    y_lo = s_lo.sol(r_k)
    y_hi = s_hi.sol(r_k)
    y = 0.5 * (y_lo + y_hi)
    sep = np.abs(y_hi[0] - y_lo[0]) / np.maximum(np.abs(y[0]), 1e-300)
    bad = np.flatnonzero((sep > sep_tol) | (y[0] <= 0) | (y[1] > 0))
    m = bad[0] - 1 if bad.size else keep.sum() - 1
    if m < 2:
        raise SolverError("shooting trajectories separate immediately")
    w = np.zeros(n)
    dw = np.zeros(n)
    w[:m + 1] = y[0, :m + 1]
    dw[:m + 1] = y[1, :m + 1]
    # linear tail matched in value at the last trusted node
    t_m, dt_m = _linear_tail(problem, rho[m])
    t, dt = _linear_tail(problem, rho[m + 1:])
    C = w[m] / t_m
    w[m + 1:] = C * t
    dw[m + 1:] = C * dt
    if problem.d == 1:
        dw[0] = 0.0
    return rho, w, dw, {"bisection_iterations": iters, "w0_bracket": (lo, hi),
                        "rho_match": float(rho[m])}


def _radial_integral(rho, d, dens):
    """``int_{R^d} dens`` for a radial density sampled on a uniform grid from 0.

    Trapezoid rule; for d = 2 the integrand ``rho * dens`` is odd at the origin
    and the leading Euler-Maclaurin end term is added back.
    """
    h = rho[1] - rho[0]
    total = np.trapezoid(dens * rho ** (d - 1), rho)
    if d == 2:
        total += h ** 2 / 12 * dens[0]
    return float(sphere_area(d - 1) * total)


def _energy_from_profile(problem, rho, w, dw):
    dens = 0.5 * dw ** 2 + 0.5 * problem.a * w ** 2 - problem.b * problem.f.F(np.maximum(w, 0))
    return _radial_integral(rho, problem.d, dens)


# ---------------------------------------------------------------------------
# discrete energy on a radial grid (node 0 at rho = 0, Dirichlet at rho_max)
# ---------------------------------------------------------------------------
@dataclass
class _Discrete:
    problem: LimitProblem
    rho: np.ndarray
    diag: np.ndarray
    off: np.ndarray
    mass: np.ndarray

    @classmethod
    def build(cls, problem: LimitProblem, rho):
        rho = np.asarray(rho, float)
        diag, off, mass = radial_stiffness(rho, problem.d)
        return cls(problem, rho, diag[:-1], off[:-1], mass[:-1])

    def stiff(self, u):
        out = self.diag * u
        out[:-1] += self.off * u[1:]
        out[1:] += self.off * u[:-1]
        return out

    def quad(self, u):
        """``int |u'|^2 + a u^2`` (without the sphere factor)."""
        return float(u @ self.stiff(u) + self.problem.a * np.sum(self.mass * u ** 2))

    def energy(self, u):
        P = self.problem
        return P.omega * (0.5 * self.quad(u) - P.b * np.sum(self.mass * P.f.F(np.maximum(u, 0))))

    def gradient(self, u):
        P = self.problem
        return P.omega * (self.stiff(u) + P.a * self.mass * u
                          - P.b * self.mass * P.f.f(np.maximum(u, 0)))

    def precond_bands(self):
        ab = np.zeros((3, self.diag.size))
        ab[0, 1:] = self.off
        ab[1] = self.diag + self.problem.a * self.mass
        ab[2, :-1] = self.off
        return ab * self.problem.omega

    def nonlinear_pairing(self, u, t):
        P = self.problem
        return P.b * np.sum(self.mass * P.f.f(t * np.maximum(u, 0)) * u)


def discrete_energy(problem: LimitProblem, rho, u) -> float:
    """Discrete ``I_{a,b}`` on a radial grid starting at rho = 0; last node is pinned to 0."""
    return _Discrete.build(problem, rho).energy(np.asarray(u, float)[:-1])


def discrete_gradient(problem: LimitProblem, rho, u) -> np.ndarray:
    """Exact gradient of :func:`discrete_energy` with respect to the free nodes."""
    return _Discrete.build(problem, rho).gradient(np.asarray(u, float)[:-1])


def _project(disc: _Discrete, u):
    P = disc.problem
    Q = disc.quad(u)
    if Q <= 0:
        raise ValueError("cannot project the zero function")
    if P.f.is_pure_power:
        nl = P.b * np.sum(disc.mass * np.maximum(u, 0) ** (P.f.p + 1))
        return (Q / nl) ** (1.0 / (P.f.p - 1))

    def phi(logt):
        t = np.exp(logt)
        return Q - disc.nonlinear_pairing(u, t) / t

    lo, hi = -1.0, 1.0
    while phi(lo) <= 0:
        lo -= 2.0
    while phi(hi) >= 0:
        hi += 2.0
    return float(np.exp(brentq(phi, lo, hi, xtol=1e-15, rtol=1e-15)))


def nehari_project(u, problem: LimitProblem, rho):
    """Scale ``u`` onto the discrete Nehari set; returns ``(t_star, t_star * u)``.

    ``t_star`` maximizes ``t -> I_{a,b}(t u)``.  ``rho`` is the grid with node 0
    at the origin and the last node pinned to zero.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("trial profile must be nonnegative")
    if not np.any(u[:-1] > 0):
        raise ValueError("cannot project the zero function")
    disc = _Discrete.build(problem, rho)
    t = _project(disc, u[:-1])
    return t, t * u


def _nehari_descent(problem: LimitProblem, n: int, rho_max: float, tol: float = 1e-10,
                    max_iter: int = 2000, seed=None):
    rho = np.linspace(0.0, rho_max, n)
    disc = _Discrete.build(problem, rho)
    ab = disc.precond_bands()
    if seed is None:
        u = np.exp(-problem.a * rho[:-1] ** 2 / 2)
    else:
        u = np.asarray(seed, float)[:-1].copy()
    u = _project(disc, u) * u
    J = disc.energy(u)
    step = 1.0
    trace = []
    for it in range(max_iter):
        g = disc.gradient(u)
        pg = solve_banded((1, 1), ab, g)
        unorm = np.sqrt(u @ (disc.stiff(u) + problem.a * disc.mass * u) * problem.omega)
        gn = float(np.sqrt(max(g @ pg, 0.0)) / unorm)
        trace.append((it, J, gn))
        if gn < tol:
            break
        step = min(1.0, 2 * step)
        while True:
            v = np.maximum(u - step * pg, 0.0)
            v = _project(disc, v) * v
            Jv = disc.energy(v)
            if Jv <= J - 1e-4 * step * (g @ pg) or step < 1e-12:
                break
            step *= 0.5
        if Jv > J:
            break
        u, J = v, Jv
    else:
        raise SolverError(f"Nehari descent did not converge in {max_iter} iterations "
                          f"(gradient norm {trace[-1][2]:.3e})")
    w = np.append(u, 0.0)
    dw = np.gradient(w, rho)
    return rho, w, dw, J, {"iterations": len(trace), "trace": trace}


def solve_limit(problem: LimitProblem, method: str = "shooting", n: int = 4096,
                rho_max: float | None = None, cross_check: bool = False,
                rel_tol: float = 1e-4) -> GroundState:
    """Positive radial ground state of the limit equation.

    ``method`` is ``"shooting"`` or ``"nehari-descent"``.  With
    ``cross_check`` the other method is run as well and a
    :class:`ConsistencyError` is raised if the energies differ by more than
    ``rel_tol``.
    """
    rho_max = problem.default_rho_max() if rho_max is None else float(rho_max)
    if method == "shooting":
        rho, w, dw, info = _shooting(problem, n, rho_max)
        E = _energy_from_profile(problem, rho, w, dw)
    elif method == "nehari-descent":
        rho, w, dw, E, info = _nehari_descent(problem, n, rho_max)
    else:
        raise ValueError(f"unknown method {method!r}")
    gs = GroundState(problem, rho, w, dw, E, method, info)
    if cross_check:
        other = "nehari-descent" if method == "shooting" else "shooting"
        alt = solve_limit(problem, other, n, rho_max)
        gap = abs(alt.energy - E) / abs(E)
        gs.info["cross_check_gap"] = gap
        if gap > rel_tol:
            raise ConsistencyError(f"{method} and {other} energies differ by {gap:.3e}")
    return gs


@functools.lru_cache(maxsize=256)
def _cached_energy(d, a, b, f, method, n):
    return solve_limit(LimitProblem(d, a, b, f), method, n).energy


def ground_energy(a: float, b: float, f: Nonlinearity, d: int, method: str = "shooting",
                  n: int = 4096) -> float:
    """Ground energy ``E(a, b)`` of the limit equation in R^d (cached)."""
    return _cached_energy(int(d), float(a), float(b), f, method, int(n))


def check_energy_monotonicity(f: Nonlinearity, d: int, a_grid, b_grid, energy=None) -> dict:
    """Strict monotonicity of sampled ``E``: increasing in ``a``, decreasing in ``b``.

    ``energy`` may be a precomputed table of shape ``(len(a_grid), len(b_grid))``.
    """
    a_grid = np.asarray(a_grid, float)
    b_grid = np.asarray(b_grid, float)
    if a_grid.size < 5 or b_grid.size < 5:
        raise ValueError("monotonicity check needs at least 5 values per axis")
    if np.any(np.diff(a_grid) <= 0) or np.any(np.diff(b_grid) <= 0):
        raise ValueError("grids must be strictly increasing")
    if energy is None:
        energy = np.array([[ground_energy(a, b, f, d) for b in b_grid] for a in a_grid])
    E = np.asarray(energy, float)
    violations = []
    for i in range(E.shape[0] - 1):
        for j in range(E.shape[1]):
            if not E[i + 1, j] > E[i, j]:
                violations.append({"axis": "a", "pair": [[a_grid[i], b_grid[j]],
                                                         [a_grid[i + 1], b_grid[j]]]})
    for i in range(E.shape[0]):
        for j in range(E.shape[1] - 1):
            if not E[i, j + 1] < E[i, j]:
                violations.append({"axis": "b", "pair": [[a_grid[i], b_grid[j]],
                                                         [a_grid[i], b_grid[j + 1]]]})
    return {"pass": not violations, "violations": violations, "energy": E.tolist()}
