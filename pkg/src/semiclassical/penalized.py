"""Radial penalized problem ``-eps^2 Lap u + V u = g_eps(r, u)`` for concentration on spheres of
dimension ``k = N - 1``.

The energy ``J_eps`` is discretized with weighted P1 stiffness and trapezoid
mass on a truncated radial grid (Dirichlet at both ends) and its positive
critical point is found by Nehari-constrained, preconditioned nonlinear
conjugate gradients.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from .auxiliary import AnnulusLambda
from .potentials import kelvin_transform_field, kelvin_transform_potentials
from .limit import LimitProblem, SolverError, solve_limit
from .nonlinearity import (
    NodeNonlinearity,
    Nonlinearity,
    PenalizationParams,
    PenalizedNonlinearity,
    radial_stiffness,
    sphere_area,
)

__all__ = [
    "RadialGrid",
    "PenalizedProblem",
    "SolverOptions",
    "DiscreteSolution",
    "DegenerateSolutionError",
    "assemble_energy",
    "assemble_gradient",
    "nehari_scale",
    "nehari_scan",
    "limit_seed",
    "solve",
    "certify_original",
    "residual",
    "fd_operator",
    "original_residual",
    "kelvin_residual",
]


class DegenerateSolutionError(SolverError):
    """The iteration collapsed to the zero function."""


@dataclass(frozen=True)
class RadialGrid:
    r_min: float
    r_max: float
    n: int = 8192
    spacing: str = "uniform"

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")
        if self.n < 8:
            raise ValueError("need at least 8 nodes")
        if self.spacing not in ("uniform", "log"):
            raise ValueError("spacing must be 'uniform' or 'log'")

    @property
    def nodes(self) -> np.ndarray:
        if self.spacing == "uniform":
            return np.linspace(self.r_min, self.r_max, self.n)
        return np.geomspace(self.r_min, self.r_max, self.n)

    def to_spec(self) -> dict:
        return {"r_min": self.r_min, "r_max": self.r_max, "n": self.n, "spacing": self.spacing}

    @classmethod
    def default_for(cls, lam: AnnulusLambda, n: int = 8192) -> "RadialGrid":
        """Working grid reaching a tenth of ``r_lo`` inward and two widths past ``r_hi``."""
        return cls(min(0.02, lam.r_lo / 10), lam.r_hi + 2 * (lam.r_hi - lam.r_lo), n)


class PenalizedProblem:
    """Discrete ``J_eps`` on a radial grid; unknowns are the interior nodes.

    Parameters
    ----------
    N : int
        Space dimension; the sphere dimension is ``k = N - 1``.
    eps : float
    pen : PenalizedNonlinearity
        Carries ``f, V, K``, the annulus and ``(kappa, beta, mu)``; its ``eps``
        must match.
    grid : RadialGrid
    """

    def __init__(self, N: int, eps: float, pen: PenalizedNonlinearity, grid: RadialGrid,
                 k: int | None = None):
        if k is not None and k != N - 1:
            raise ValueError("the penalized solver handles k = N - 1 only")
        if pen.params.N != N:
            raise ValueError("penalization parameters were built for a different N")
        if abs(pen.eps - eps) > 1e-15 * eps:
            raise ValueError("pen.eps does not match eps")
        if not grid.r_min < pen.r_lo < pen.r_hi < grid.r_max:
            raise ValueError("the annulus must lie strictly inside the grid")
        self.N, self.k, self.eps, self.pen, self.grid = N, N - 1, float(eps), pen, grid
        r = grid.nodes
        self.r = r
        diag, off, mass = radial_stiffness(r, N)
        self.diag, self.off, self.mass = diag[1:-1], off[1:-1], mass[1:-1]
        self.edge = -off    # r_{i+1/2}^(N-1) / h_i on every grid edge
        self.ri = r[1:-1]
        self.V = np.asarray(pen.V(self.ri), float) * np.ones_like(self.ri)
        self.nl: NodeNonlinearity = pen.at(self.ri)
        self.omega = sphere_area(N - 1)

    @classmethod
    def build(cls, N: int, eps: float, f: Nonlinearity, V, K, lam: AnnulusLambda,
              params: PenalizationParams | None = None, grid: RadialGrid | None = None):
        params = params or PenalizationParams(N=N)
        grid = grid or RadialGrid.default_for(lam)
        pen = PenalizedNonlinearity(f, V, K, lam.r_lo, lam.r_hi, params, eps)
        return cls(N, eps, pen, grid)

    @property
    def lam(self) -> AnnulusLambda:
        return AnnulusLambda(self.pen.r_lo, self.pen.r_hi)

    def with_eps(self, eps: float) -> "PenalizedProblem":
        p = self.pen
        pen = PenalizedNonlinearity(p.f, p.V, p.K, p.r_lo, p.r_hi, p.params, eps)
        return PenalizedProblem(self.N, eps, pen, self.grid)

    # -- discrete operators on interior nodes ---------------------------------
    # edge differences keep the stiffness terms free of cancellation
    def _flux(self, u):
        return self.edge * np.diff(np.concatenate([[0.0], u, [0.0]]))

    def stiff(self, u):
        q = self._flux(u)
        return q[:-1] - q[1:]

    def quad(self, u):
        """``||u||_eps^2`` without the sphere factor."""
        du = np.diff(np.concatenate([[0.0], u, [0.0]]))
        return float(self.eps ** 2 * np.sum(self.edge * du * du) + np.sum(self.mass * self.V * u * u))

    def energy(self, u):
        return self.omega * (0.5 * self.quad(u) - float(np.sum(self.mass * self.nl.G(u))))

    def gradient(self, u):
        return self.omega * (self.eps ** 2 * self.stiff(u) + self.mass * (self.V * u - self.nl.g(u)))

    def precond_bands(self):
        ab = np.zeros((3, self.diag.size))
        ab[0, 1:] = self.eps ** 2 * self.off
        ab[1] = self.eps ** 2 * self.diag + self.mass * self.V
        ab[2, :-1] = self.eps ** 2 * self.off
        return ab * self.omega

    def interior(self, u) -> np.ndarray:
        u = np.asarray(u, float)
        if u.shape == self.r.shape:
            return u[1:-1].copy()
        if u.shape == self.ri.shape:
            return u.copy()
        raise ValueError("field does not match the grid")

    def full(self, ui) -> np.ndarray:
        return np.concatenate([[0.0], ui, [0.0]])


def assemble_energy(problem: PenalizedProblem, u) -> float:
    """``J_eps(u)`` for nodal values ``u`` (full grid or interior nodes)."""
    return problem.energy(problem.interior(u))


def assemble_gradient(problem: PenalizedProblem, u) -> np.ndarray:
    """Exact gradient of :func:`assemble_energy` with respect to the interior nodes."""
    return problem.gradient(problem.interior(u))


def _nehari_t(problem: PenalizedProblem, u):
    """Maximizer of ``t -> J(t u)`` for interior ``u >= 0``."""
    Q = problem.quad(u)
    if Q <= 0:
        raise DegenerateSolutionError("cannot project the zero function")
    m = problem.mass

    def phi(logt):
        t = np.exp(logt)
        return Q - float(np.sum(m * problem.nl.g(t * u) * u)) / t

    lo, hi = -0.25, 0.25
    for _ in range(200):
        if phi(lo) > 0:
            break
        lo -= 1.0
    else:
        raise SolverError("Nehari projection: no lower bracket")
    for _ in range(200):
        if phi(hi) < 0:
            break
        hi += 1.0
    else:
        raise DegenerateSolutionError("t -> J(t u) has no maximum (no mass inside the annulus)")
    return float(np.exp(brentq(phi, lo, hi, xtol=1e-15, rtol=1e-15)))


def nehari_scale(problem: PenalizedProblem, u) -> float:
    """``t*`` maximizing ``t -> J_eps(t u)``."""
    u = problem.interior(u)
    if np.any(u < 0):
        raise ValueError("trial profile must be nonnegative")
    return _nehari_t(problem, u)


def nehari_scan(problem: PenalizedProblem, u, t=None) -> dict:
    """Sign changes of ``d/dt J(t u)`` on a log grid of ``t``."""
    u = problem.interior(u)
    t = np.geomspace(1e-3, 1e3, 601) if t is None else np.asarray(t, float)
    dj = np.array([float(problem.gradient(ti * u) @ u) for ti in t])
    s = np.sign(dj)
    s = s[s != 0]
    changes = int(np.sum(s[1:] != s[:-1]))
    return {"t": t, "dJ": dj, "sign_changes": changes, "single_max": changes == 1 and s[0] > 0}


@dataclass
class SolverOptions:
    tol: float = 1e-8
    max_iters: int = 20000
    armijo: float = 1e-4
    method: str = "cg"          # "cg" (Polak-Ribiere) or "sd"
    seed_points: int = 4096

    def __post_init__(self):
        if self.method not in ("cg", "sd"):
            raise ValueError("method must be 'cg' or 'sd'")


@dataclass
class DiscreteSolution:
    problem: PenalizedProblem = field(repr=False)
    u: np.ndarray
    j_eps: float
    grad_norm: float
    norm_eps: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list, repr=False)
    info: dict = field(default_factory=dict)

    @property
    def c_eps(self) -> float:
        return self.j_eps

    @property
    def r(self) -> np.ndarray:
        return self.problem.r

    @property
    def peak(self) -> float:
        return float(np.max(self.u))

    def tail_check(self, rel: float = 1e-8) -> dict:
        """Truncation sanity: values next to the pinned ends relative to the peak."""
        pk = self.peak
        lo, hi = float(self.u[1]) / pk, float(self.u[-2]) / pk
        return {"inner": lo, "outer": hi, "ok": max(lo, hi) < rel}

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.r, self.u]), delimiter=",", header="r,u",
                   comments="", fmt="%.17g")

    def trace_to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for it, J, gn in self.trace:
                fh.write(json.dumps({"iteration": it, "J": J, "grad_norm": gn}) + "\n")


def limit_seed(problem: PenalizedProblem, r0: float, n: int = 4096) -> np.ndarray:
    """``w((r - r0) / eps)`` with ``w`` the one-dimensional ground state at ``(V(r0), K(r0))``."""
    pen = problem.pen
    a, b = float(pen.V(r0)), float(pen.K(r0))
    gs = solve_limit(LimitProblem(1, a, b, pen.f), n=n)
    u = gs((problem.r - r0) / problem.eps)
    u[0] = u[-1] = 0.0
    return u


def solve(problem: PenalizedProblem, options: SolverOptions | None = None, seed=None,
          r0: float | None = None) -> DiscreteSolution:
    """Positive critical point of ``J_eps`` by Nehari-constrained descent.

    Parameters
    ----------
    seed : array, optional
        Initial guess on the grid.  Defaults to the limit profile centred at
        ``r0`` (which is required in that case).

    Notes
    -----
    Each step moves along a preconditioned (Polak-Ribiere) direction in the
    ``||.||_eps`` metric, clips negative values and rescales onto the Nehari
    set.  Steps are accepted by Armijo backtracking on ``J``; once energy
    differences fall below rounding, a step is accepted if it reduces the
    gradient norm instead.
    """
    opt = options or SolverOptions()
    P = problem
    if seed is None:
        if r0 is None:
            raise ValueError("either seed or r0 is needed")
        seed = limit_seed(P, r0, opt.seed_points)
    u = np.maximum(P.interior(seed), 0.0)
    if not np.any(u > 0):
        raise DegenerateSolutionError("seed vanishes on the grid")
    ab = P.precond_bands()
    u = _nehari_t(P, u) * u
    J = P.energy(u)
    g = P.gradient(u)
    z = solve_banded((1, 1), ab, g)
    gz = float(g @ z)

    def norm_P(v):
        return np.sqrt(P.omega * P.quad(v))

    gn = np.sqrt(max(gz, 0.0)) / norm_P(u)
    trace = [(0, J, gn)]
    d = -z
    step = 1.0
    it = 0
    floor = 64 * np.finfo(float).eps
    converged = gn < opt.tol
    while not converged and it < opt.max_iters:
        it += 1
        slope = float(g @ d)
        if slope >= 0:
            d, slope = -z, -gz
        step = min(1.0, 4.0 * step)
        accepted = False
        while step > 1e-14:
            v = np.maximum(u + step * d, 0.0)
            if not np.any(v > 0):
                step *= 0.5
                continue
            v = _nehari_t(P, v) * v
            Jv = P.energy(v)
            if Jv <= J + opt.armijo * step * slope and Jv < J:
                accepted = True
                break
            if abs(Jv - J) <= floor * abs(J):
                gv = P.gradient(v)
                zv = solve_banded((1, 1), ab, gv)
                if np.sqrt(max(float(gv @ zv), 0.0)) / norm_P(v) < gn:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            if np.array_equal(d, -z):
                break
            d = -z
            continue
        un = norm_P(v)
        if un < 1e-12:
            raise DegenerateSolutionError("iterate collapsed to zero")
        g_new = P.gradient(v)
        z_new = solve_banded((1, 1), ab, g_new)
        gz_new = float(g_new @ z_new)
        if opt.method == "cg":
            beta = max(0.0, float(z_new @ (g_new - g)) / gz)
        else:
            beta = 0.0
        d = -z_new + beta * d
        u, J, g, z, gz = v, Jv, g_new, z_new, gz_new
        gn = np.sqrt(max(gz, 0.0)) / un
        trace.append((it, J, gn))
        converged = gn < opt.tol
    if not converged:
        raise SolverError(f"penalized solve did not converge in {it} iterations "
                          f"(gradient norm {gn:.3e}); energy trace tail {trace[-5:]}")
    full = P.full(u)
    return DiscreteSolution(P, full, J, float(gn), float(P.quad(u) * P.omega), it, True, trace,
                            {"t_star": _nehari_t(P, u)})


def certify_original(problem: PenalizedProblem, sol: DiscreteSolution) -> dict:
    """Check ``K f(u) / u <= eps^2 H + mu V`` at every grid node outside the annulus.

    When it holds the penalty is inactive and ``u`` solves the original
    equation on the grid.
    """
    r = problem.ri
    u = problem.interior(sol.u)
    out = ~problem.pen.in_lambda(r)
    A = problem.nl.A[out]
    q = problem.nl.K[out] * problem.pen.f.f_over_s(np.maximum(u[out], 0.0))
    slack = A - q
    i = int(np.argmin(slack))
    margin = float(slack[i])
    return {"certified": margin >= 0, "margin": margin,
            "relative_margin": float(np.min(slack / A)),
            "worst_radius": float(r[out][i]), "nodes_checked": int(out.sum())}


def _stencil_weights(r, width: int):
    """Finite-difference weights for the first and second derivative at interior nodes.

    Uses ``width`` consecutive nodes per stencil, centred where possible and
    shifted inward next to the ends.  Returns ``(idx, w1, w2)`` with ``idx``
    of shape ``(n - 2, width)``.
    """
    n = r.size
    half = width // 2
    centre = np.arange(1, n - 1)
    start = np.clip(centre - half, 0, n - width)
    idx = start[:, None] + np.arange(width)
    h = np.maximum(r[centre + 1] - r[centre], r[centre] - r[centre - 1])
    x = (r[idx] - r[centre][:, None]) / h[:, None]
    # Vandermonde system sum_j w_j x_j^m = m! delta_{m,k}
    A = x[:, None, :] ** np.arange(width)[None, :, None]
    rhs = np.zeros((centre.size, width, 2))
    rhs[:, 1, 0] = 1.0
    rhs[:, 2, 1] = 2.0
    w = np.linalg.solve(A, rhs)
    return idx, w[:, :, 0] / h[:, None], w[:, :, 1] / h[:, None] ** 2


def fd_operator(r, u, N: int, order: int = 2):
    """``u'' + (N-1)/r u'`` at interior nodes by finite differences on any spacing.

    ``order=2`` is the three-point stencil; ``order=4`` uses five points
    (shifted inward at the first and last interior node).
    """
    r = np.asarray(r, float)
    u = np.asarray(u, float)
    if order == 4:
        idx, w1, w2 = _stencil_weights(r, 5)
        uu = u[idx]
        return np.sum(w2 * uu, axis=1) + (N - 1) / r[1:-1] * np.sum(w1 * uu, axis=1)
    if order != 2:
        raise ValueError("order must be 2 or 4")
    h0 = r[1:-1] - r[:-2]
    h1 = r[2:] - r[1:-1]
    um, uc, up = u[:-2], u[1:-1], u[2:]
    d2 = 2 * (h0 * up - (h0 + h1) * uc + h1 * um) / (h0 * h1 * (h0 + h1))
    d1 = (h0 ** 2 * up + (h1 ** 2 - h0 ** 2) * uc - h1 ** 2 * um) / (h0 * h1 * (h0 + h1))
    return d2 + (N - 1) / r[1:-1] * d1


def residual(problem: PenalizedProblem, sol, kind: str = "pde") -> float:
    """Sup-norm of the Euler-Lagrange residual, relative to ``sup(|V u| + |g(u)|)``.

    ``kind="pde"`` uses the three-point stencil of the radial Laplacian;
    ``kind="discrete"`` uses the gradient of the discrete energy divided by
    the lumped mass (zero at an exact discrete critical point).
    """
    u_full = sol.u if isinstance(sol, DiscreteSolution) else np.asarray(sol, float)
    ui = problem.interior(u_full)
    g = problem.nl.g(ui)
    scale = float(np.max(np.abs(problem.V * ui) + np.abs(g)))
    if scale == 0:
        return 0.0
    if kind == "pde":
        res = -problem.eps ** 2 * fd_operator(problem.r, u_full, problem.N) + problem.V * ui - g
    elif kind == "discrete":
        res = problem.gradient(ui) / (problem.omega * problem.mass)
    else:
        raise ValueError(f"unknown residual kind {kind!r}")
    return float(np.max(np.abs(res)) / scale)


def _pde_residual(r, u, N, eps, V, Kf, order=2):
    ui = u[1:-1]
    res = -eps ** 2 * fd_operator(r, u, N, order) + V * ui - Kf
    scale = float(np.max(np.abs(V * ui) + np.abs(Kf)))
    return 0.0 if scale == 0 else float(np.max(np.abs(res)) / scale)


def original_residual(problem: PenalizedProblem, sol, order: int = 2) -> float:
    """Relative stencil residual of the unpenalized equation ``-eps^2 Lap u + V u = K f(u)``."""
    u = sol.u if isinstance(sol, DiscreteSolution) else np.asarray(sol, float)
    ri = problem.ri
    Kf = np.asarray(problem.pen.K(ri), float) * problem.pen.f.f(np.maximum(u[1:-1], 0.0))
    return _pde_residual(problem.r, u, problem.N, problem.eps, problem.V, Kf, order)


def kelvin_residual(problem: PenalizedProblem, sol, order: int = 4) -> dict:
    """Residual of the Kelvin-transformed field against the transformed equation.

    ``u_hat(rho) = rho^(2-N) u(1/rho)`` is tested on the image grid
    ``rho = 1/r`` against ``-eps^2 Lap u_hat + V_hat u_hat = K_hat u_hat^p``;
    ``f`` must be a pure power.  Source and image use the same stencil.  With
    ``order=4`` the stencil truncation is negligible next to the O(h^2)
    discretization error carried by ``u``, so the ratio compares that error in
    the two frames; with ``order=2`` it also picks up the larger three-point
    truncation on the stretched image grid.
    """
    f = problem.pen.f
    if not f.is_pure_power:
        raise ValueError("the transformed equation is only closed for f(s) = s^p")
    N = problem.N
    u = sol.u if isinstance(sol, DiscreteSolution) else np.asarray(sol, float)
    pair = kelvin_transform_potentials(problem.pen.V, problem.pen.K, f.p, N)
    rho, uh = kelvin_transform_field(problem.r, u, N)
    rhoi = rho[1:-1]
    Vh = np.asarray(pair.v_hat(rhoi), float)
    Kf = np.asarray(pair.k_hat(rhoi), float) * f.f(np.maximum(uh[1:-1], 0.0))
    image = _pde_residual(rho, uh, N, problem.eps, Vh, Kf, order)
    source = original_residual(problem, u, order)
    return {"image": image, "source": source, "ratio": image / source if source else np.inf}
