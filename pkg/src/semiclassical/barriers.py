"""Comparison functions for the radial penalized problem and decay envelopes.

``Phi`` is the cosh barrier around a point of the annulus, ``Psi`` the
solution of the exterior linear problem with ``Psi = 1`` on the annulus
boundary, and ``W`` their normalized gluing.  All checks are node-wise.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .nonlinearity import NumericalError, hardy_weight, radial_stiffness
from .penalized import DiscreteSolution, PenalizedProblem, fd_operator
from .potentials import GrowthClass

__all__ = [
    "DomainError",
    "EnvelopeConfigError",
    "d_H",
    "PeakBarrier",
    "peak_barrier_eval",
    "peak_barrier_check",
    "OuterBarrier",
    "solve_outer_barrier",
    "fit_lambda",
    "power_tail_slope",
    "DecayEnvelope",
    "envelope_eval",
    "envelope_from_growth",
    "glued_barrier",
    "barrier_comparison",
]

REGIMES = ("base", "quadratic-infinity", "stretched-infinity", "quadratic-origin",
           "stretched-origin")


class DomainError(ValueError):
    pass


class EnvelopeConfigError(ValueError):
    pass


def d_H(x_r, y_r):
    """Distance between the spheres of radii ``x_r`` and ``y_r`` (both with ``x' = 0``)."""
    out = np.abs(np.asarray(x_r, float) - np.asarray(y_r, float))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# peak barrier
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PeakBarrier:
    """``Phi(r) = cosh(lam (R - |r - r_bar|) / eps)``.

    ``v_floor`` is ``inf V`` over the annulus; the rate must satisfy
    ``lam^2 < (1 - mu) v_floor``.
    """

    r_bar: float
    R: float
    lam: float
    eps: float
    v_floor: float
    mu: float = 0.5

    def __post_init__(self):
        if not (self.R > 0 and self.eps > 0 and self.lam > 0):
            raise DomainError("R, eps and lam must be positive")
        bound = (1 - self.mu) * self.v_floor
        if not self.lam ** 2 < bound:
            raise DomainError(f"lam^2 = {self.lam ** 2:.6g} must be below (1 - mu) inf V = {bound:.6g}")

    @property
    def lam_max(self) -> float:
        return float(np.sqrt((1 - self.mu) * self.v_floor))

    def __call__(self, r):
        return peak_barrier_eval(self, r)


def peak_barrier_eval(b: PeakBarrier, r):
    out = np.cosh(b.lam * (b.R - d_H(r, b.r_bar)) / b.eps)
    return float(out) if np.ndim(out) == 0 else out


def peak_barrier_check(b: PeakBarrier, V, mu: float, grid, N: int, lam_set=None) -> dict:
    """Supersolution margin of ``-eps^2 Lap Phi + (1 - mu) V Phi`` on the grid nodes in the ball.

    Returns the minimum (absolute and relative to ``Phi``) and the largest
    ``eps`` for which the analytic expression is guaranteed nonnegative.
    """
    r = np.asarray(grid.nodes if hasattr(grid, "nodes") else grid, float)
    if lam_set is not None and not (lam_set.r_lo < b.r_bar - b.R and b.r_bar + b.R < lam_set.r_hi):
        raise ValueError("the barrier ball must lie inside the annulus")
    phi = peak_barrier_eval(b, r)
    lap = fd_operator(r, phi, N)
    ri = r[1:-1]
    ball = d_H(ri, b.r_bar) < b.R
    if not np.any(ball):
        raise ValueError("no grid node inside the barrier ball")
    v = np.asarray(V(ri), float) * np.ones_like(ri)
    val = (-b.eps ** 2 * lap + (1 - mu) * v * phi[1:-1])[ball]
    rel = val / phi[1:-1][ball]
    # the sinh term is negative on the inner side r < r_bar only
    inner = ball & (ri < b.r_bar)
    if N > 1 and np.any(inner):
        eps0 = float(np.min(((1 - mu) * v[inner] - b.lam ** 2) * ri[inner] / (b.lam * (N - 1))))
    else:
        eps0 = np.inf
    return {"min_margin": float(np.min(val)), "min_relative_margin": float(np.min(rel)),
            "ok": bool(np.min(val) >= 0), "eps_threshold": eps0, "nodes": int(ball.sum())}


# ---------------------------------------------------------------------------
# outer barrier
# ---------------------------------------------------------------------------
@dataclass
class OuterBarrier:
    """``Psi_eps`` on the two exterior pieces; ``Psi = 1`` on the annulus boundary."""

    r_in: np.ndarray
    psi_in: np.ndarray
    r_out: np.ndarray
    psi_out: np.ndarray
    eps: float
    r_lo: float
    r_hi: float
    checks: dict = field(default_factory=dict)

    def __call__(self, r):
        """``Psi`` outside the annulus, extended by 1 inside (the function ``Psi~``)."""
        r = np.asarray(r, float)
        out = np.ones_like(r)
        lo, hi = r <= self.r_lo, r >= self.r_hi
        out[lo] = np.interp(r[lo], self.r_in, self.psi_in, left=0.0)
        out[hi] = np.interp(r[hi], self.r_out, self.psi_out, right=0.0)
        return out

    def distance(self, piece: str):
        return self.r_lo - self.r_in if piece == "inner" else self.r_out - self.r_hi


def _piece_solve(r, bc_left, bc_right, eps, V, params, mu):
    N = params.N
    diag, off, mass = radial_stiffness(r, N)
    pot = -eps ** 2 * hardy_weight(r, params) + (1 - mu) * np.asarray(V(r), float)
    d = eps ** 2 * diag + mass * pot
    e = eps ** 2 * off
    rhs = np.zeros(r.size - 2)
    rhs[0] -= e[0] * bc_left
    rhs[-1] -= e[-1] * bc_right
    ab = np.zeros((3, r.size - 2))
    ab[0, 1:] = e[1:-1]
    ab[1] = d[1:-1]
    ab[2, :-1] = e[1:-1]
    try:
        x = solve_banded((1, 1), ab, rhs)
    except LinAlgError as exc:
        raise NumericalError(f"exterior barrier system is singular: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise NumericalError("exterior barrier solve produced non-finite values")
    return np.concatenate([[bc_left], x, [bc_right]])


def solve_outer_barrier(problem: PenalizedProblem, r=None, mu: float | None = None,
                        tol: float = 1e-10) -> OuterBarrier:
    """Solve ``-eps^2 (Lap + H) Psi + (1 - mu) V Psi = 0`` outside the annulus.

    ``Psi = 1`` at ``r_lo`` and ``r_hi``, ``Psi = 0`` at the truncation radii.
    The nodes are those of ``r`` (default: the problem grid) outside the
    annulus, with the two boundary radii added.
    """
    pen = problem.pen
    mu = pen.params.mu if mu is None else mu
    r = problem.r if r is None else np.asarray(r, float)
    r_lo, r_hi = pen.r_lo, pen.r_hi
    r_in = np.concatenate([r[r < r_lo], [r_lo]])
    r_out = np.concatenate([[r_hi], r[r > r_hi]])
    if r_in.size < 3 or r_out.size < 3:
        raise ValueError("exterior pieces need at least three nodes")
    psi_in = _piece_solve(r_in, 0.0, 1.0, problem.eps, pen.V, pen.params, mu)
    psi_out = _piece_solve(r_out, 1.0, 0.0, problem.eps, pen.V, pen.params, mu)
    checks = {}
    for name, psi, sgn in (("inner", psi_in, 1), ("outer", psi_out, -1)):
        inner_vals = psi[1:-1]
        checks[name] = {
            "positive": bool(np.all(inner_vals > 0) or np.all(inner_vals[inner_vals != 0] > 0)),
            "min": float(np.min(inner_vals)),
            "bounded_by_one": bool(np.max(psi) <= 1 + tol),
            "max": float(np.max(psi)),
            "monotone": bool(np.all(sgn * np.diff(psi) >= -tol)),
        }
    checks["ok"] = all(c["positive"] and c["bounded_by_one"] and c["monotone"]
                       for c in (checks["inner"], checks["outer"]))
    return OuterBarrier(r_in, psi_in, r_out, psi_out, problem.eps, r_lo, r_hi, checks)


def fit_lambda(outer: OuterBarrier, width: float = 5.0, v_floor: float | None = None,
               mu: float = 0.5) -> dict:
    """Decay rate of ``Psi`` in the boundary layer of thickness ``width * eps``.

    ``log Psi`` is fitted by least squares against ``-(lam / eps) * dist`` with
    a free intercept on each exterior piece; the smaller rate is returned.
    With ``v_floor = inf V`` on the annulus the constructor bound
    ``lam^2 < (1 - mu) v_floor`` is reported as well.
    """
    rates = {}
    for piece, psi in (("inner", outer.psi_in), ("outer", outer.psi_out)):
        dist = outer.distance(piece)
        sel = (dist > 0) & (dist <= width * outer.eps) & (psi > 0)
        if sel.sum() < 3:
            raise ValueError(f"boundary layer of the {piece} piece has fewer than 3 nodes")
        slope = np.polyfit(dist[sel], np.log(psi[sel]), 1)[0]
        rates[piece] = float(-slope * outer.eps)
    lam = min(rates.values())
    out = {"lambda_fit": lam, "lambda_inner": rates["inner"], "lambda_outer": rates["outer"]}
    if v_floor is not None:
        lam_max = float(np.sqrt((1 - mu) * v_floor))
        out["lambda_max"] = lam_max
        out["within_bound"] = bool(lam < lam_max)
    return out


def power_tail_slope(outer: OuterBarrier, r_range) -> float:
    """Least-squares slope of ``log Psi`` against ``log r`` on ``r_range``."""
    lo, hi = r_range
    sel = (outer.r_out >= lo) & (outer.r_out <= hi) & (outer.psi_out > 0)
    if sel.sum() < 3:
        raise ValueError("too few nodes in the fit range")
    return float(np.polyfit(np.log(outer.r_out[sel]), np.log(outer.psi_out[sel]), 1)[0])


# ---------------------------------------------------------------------------
# envelopes
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class DecayEnvelope:
    """``C exp(-(lam/eps) d/(1+d)) (1 + r^2)^(-(N-2)/2)`` times optional regime factors.

    ``regimes`` lists any of ``quadratic-infinity`` (factor
    ``(1+r)^(-nu/eps)``), ``stretched-infinity`` (exponent scaled by
    ``(1+r)^((2-alpha)/2)``), ``quadratic-origin`` (factor
    ``(r/(1+r))^(nu/eps)``) and ``stretched-origin`` (exponent scaled by
    ``(r/(1+r))^((gamma-2)/2)``).
    """

    C: float
    lam: float
    eps: float
    N: int
    regimes: tuple = ("base",)
    nu: float | None = None
    alpha: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        regs = tuple(self.regimes) or ("base",)
        object.__setattr__(self, "regimes", regs)
        for reg in regs:
            if reg not in REGIMES:
                raise EnvelopeConfigError(f"unknown regime {reg!r}")
        if not (self.C > 0 and self.eps > 0 and self.lam >= 0):
            raise EnvelopeConfigError("need C > 0, eps > 0, lam >= 0")
        ends = [reg.split("-")[1] for reg in regs if reg != "base"]
        if len(ends) != len(set(ends)):
            raise EnvelopeConfigError("at most one regime per end")
        if any(reg.startswith("quadratic") for reg in regs) and not (self.nu and self.nu > 0):
            raise EnvelopeConfigError("quadratic regimes need nu > 0")
        if "stretched-infinity" in regs and (self.alpha is None or not self.alpha < 2):
            raise EnvelopeConfigError("stretched-infinity needs alpha < 2")
        if "stretched-origin" in regs and (self.gamma is None or not self.gamma > 2):
            raise EnvelopeConfigError("stretched-origin needs gamma > 2")

    @property
    def vacuous(self) -> bool:
        """No exponential decay at all (``lam = 0``)."""
        return self.lam == 0

    def check_growth(self, cls: GrowthClass) -> None:
        """Raise :class:`EnvelopeConfigError` if a regime is not backed by ``cls``."""
        need = {"quadratic-infinity": ("infinity", 2), "stretched-infinity": ("infinity", 3),
                "quadratic-origin": ("origin", 2), "stretched-origin": ("origin", 3)}
        for reg in self.regimes:
            if reg == "base":
                continue
            end, idx = need[reg]
            cond = getattr(cls, end)
            if cond is None or cond.index != idx:
                have = None if cond is None else cond.name
                raise EnvelopeConfigError(f"regime {reg} needs class {'G0' if end == 'origin' else 'Ginf'}"
                                          f"_{idx}, declared {have}")
            if reg == "stretched-infinity" and cond.rate != self.alpha:
                raise EnvelopeConfigError("alpha does not match the declared class")
            if reg == "stretched-origin" and cond.rate != self.gamma:
                raise EnvelopeConfigError("gamma does not match the declared class")


def envelope_eval(env: DecayEnvelope, r, r_eps: float):
    """Pointwise envelope at radii ``r`` for a peak on the sphere of radius ``r_eps``."""
    r = np.asarray(r, float)
    d = d_H(r, r_eps)
    s = d / (1 + d)
    expo = s * np.ones_like(r)
    log_fac = np.zeros_like(r)
    for reg in env.regimes:
        if reg == "quadratic-infinity":
            log_fac -= env.nu / env.eps * np.log1p(r)
        elif reg == "quadratic-origin":
            with np.errstate(divide="ignore"):
                log_fac += env.nu / env.eps * np.log(r / (1 + r))
        elif reg == "stretched-infinity":
            log_fac -= env.lam / env.eps * s * (1 + r) ** ((2 - env.alpha) / 2)
        elif reg == "stretched-origin":
            log_fac -= env.lam / env.eps * s * (r / (1 + r)) ** ((env.gamma - 2) / 2)
    out = env.C * np.exp(-env.lam / env.eps * expo + log_fac) * (1 + r ** 2) ** (-(env.N - 2) / 2)
    return float(out) if out.ndim == 0 else out


def envelope_from_growth(cls: GrowthClass, C: float, lam: float, eps: float, N: int,
                         nu: float | None = None) -> DecayEnvelope:
    """Envelope with the improved regimes implied by the declared growth class."""
    regimes = ["base"]
    alpha = gamma = None
    if cls.infinity is not None:
        if cls.infinity.index == 2 and nu:
            regimes.append("quadratic-infinity")
        elif cls.infinity.index == 3:
            regimes.append("stretched-infinity")
            alpha = cls.infinity.rate
    if cls.origin is not None:
        if cls.origin.index == 2 and nu:
            regimes.append("quadratic-origin")
        elif cls.origin.index == 3:
            regimes.append("stretched-origin")
            gamma = cls.origin.rate
    env = DecayEnvelope(C, lam, eps, N, tuple(regimes), nu, alpha, gamma)
    env.check_growth(cls)
    return env


# ---------------------------------------------------------------------------
# glued barrier and comparison
# ---------------------------------------------------------------------------
def glued_barrier(problem: PenalizedProblem, outer: OuterBarrier, r_eps: float, lam: float,
                  R: float, rho: float, r=None):
    """``W = w / cosh(lam (R/eps - rho))`` with ``w = Phi`` in the ball of radius ``R``
    around ``r_eps``, 1 on the rest of the annulus and ``Psi`` outside."""
    r = problem.r if r is None else np.asarray(r, float)
    eps = problem.eps
    d = d_H(r, r_eps)
    w = outer(r)
    ball = d < R
    w[ball] = np.cosh(lam * (R - d[ball]) / eps)
    return w / np.cosh(lam * (R / eps - rho))


def barrier_comparison(problem: PenalizedProblem, sol: DiscreteSolution, outer: OuterBarrier,
                       r_eps: float, lam: float, R: float) -> dict:
    """Node-wise check of ``u <= ||u||_{L^inf(B(r_eps, eps rho))} W``.

    ``rho`` is the smallest radius (in units of ``eps``) beyond which
    ``K f(u)/u <= mu V`` holds throughout the annulus, so that ``u`` is a
    subsolution of the barrier operator there.
    """
    pen = problem.pen
    r, u, eps = problem.r, sol.u, problem.eps
    d = d_H(r, r_eps)
    ri = problem.ri
    ui = u[1:-1]
    q = np.asarray(pen.K(ri), float) * pen.f.f_over_s(np.maximum(ui, 0.0))
    bad = pen.in_lambda(ri) & (q > pen.params.mu * problem.V)
    rho = float(np.max(d[1:-1][bad]) / eps) if np.any(bad) else 0.0
    rho += 2 * np.max(np.diff(r)) / eps
    if not eps * rho < R:
        return {"applicable": False, "rho": rho, "R": R, "lambda": lam}
    W = glued_barrier(problem, outer, r_eps, lam, R, rho)
    small = d <= eps * rho
    scale = float(np.max(u[small]))
    check = ~small
    check[[0, -1]] = False      # pinned truncation nodes, u = W = 0
    bound = scale * W[check]
    slack = bound - u[check]
    ext = ~pen.in_lambda(r[check])
    rel = slack / np.maximum(bound, np.finfo(float).tiny)
    return {"applicable": True, "rho": rho, "R": R, "lambda": lam, "scale": scale,
            "holds": bool(np.all(slack >= 0)), "min_relative_slack": float(np.min(rel)),
            "holds_exterior": bool(np.all(slack[ext] >= 0)),
            "min_relative_slack_exterior": float(np.min(rel[ext]))}
