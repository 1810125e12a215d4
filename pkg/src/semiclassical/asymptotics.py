"""epsilon sweeps of the penalized problem and the concentration diagnostics built on them."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .auxiliary import AnnulusLambda, AuxPotential, find_min
from .barriers import DecayEnvelope, envelope_eval, fit_lambda, solve_outer_barrier
from .limit import SolverError
from .nonlinearity import Nonlinearity, PenalizationParams, sphere_area
from .penalized import (
    DegenerateSolutionError,
    DiscreteSolution,
    PenalizedProblem,
    RadialGrid,
    SolverOptions,
    certify_original,
    residual,
    solve,
)
from .potentials import TAIL_DRIFT, tail_grid

__all__ = [
    "SweepConfig",
    "ConcentrationReport",
    "Peak",
    "DEFAULT_TOLERANCES",
    "run_sweep",
    "peak_extract",
    "concentration_check",
    "energy_scaling_check",
    "decay_fit",
    "localization",
    "peak_persistence",
]

DEFAULT_TOLERANCES = {
    "m_gap": 0.02,
    "r_gap": 0.05,
    "energy_ratio": (0.9, 1.15),
    "lambda_stability": 0.2,
    "boundary_fraction": 0.5,
}


@dataclass
class SweepConfig:
    """A decreasing list of epsilons and the problem they are applied to."""

    eps_list: tuple
    N: int
    f: Nonlinearity
    V: object
    K: object
    lam: AnnulusLambda
    params: PenalizationParams | None = None
    grid: RadialGrid | None = None
    growth: object = None
    warm_start: bool = True
    threads: int = 1
    options: SolverOptions = field(default_factory=SolverOptions)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_list)
        if not eps:
            raise ValueError("eps_list is empty")
        if any(e <= 0 for e in eps):
            raise ValueError("eps values must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps_list must be strictly decreasing")
        self.eps_list = eps
        self.params = self.params or PenalizationParams(N=self.N)
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(self.tolerances or {})
        self.tolerances = tol

    @classmethod
    def geometric(cls, eps0: float = 0.2, count: int = 5, **kw) -> "SweepConfig":
        return cls(tuple(eps0 * 2.0 ** -j for j in range(count)), **kw)

    def problem(self, eps: float) -> PenalizedProblem:
        return PenalizedProblem.build(self.N, eps, self.f, self.V, self.K, self.lam,
                                      self.params, self.grid)

    def aux(self) -> AuxPotential:
        return AuxPotential(self.N, self.N - 1, self.f, self.V, self.K)


@dataclass
class ConcentrationReport:
    eps: float
    r_eps: float = float("nan")
    peak: float = float("nan")
    m_at_peak: float = float("nan")
    scaled_energy: float = float("nan")
    lambda_fit: float = float("nan")
    certified: bool = False
    l2_norm: float = float("nan")
    margin: float = float("nan")
    grad_norm: float = float("nan")
    iterations: int = 0
    residual: float = float("nan")
    runtime: float = 0.0
    decay: dict = field(default_factory=dict)
    localization: dict = field(default_factory=dict)
    tail: dict = field(default_factory=dict)
    peak_at_boundary: bool = False
    error: str | None = None
    solution: DiscreteSolution | None = field(default=None, repr=False, compare=False)

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "solution"}


@dataclass
class Peak:
    r: float
    value: float
    index: int
    at_boundary: bool

    def __iter__(self):
        yield self.r
        yield self.value


def peak_extract(sol) -> Peak:
    """Maximum of the nodal profile with three-point parabolic refinement.

    ``sol`` is a :class:`DiscreteSolution` or a pair ``(r, u)``.
    """
    r, u = (sol.r, sol.u) if isinstance(sol, DiscreteSolution) else map(np.asarray, sol)
    r, u = np.asarray(r, float), np.asarray(u, float)
    i = int(np.argmax(u))
    if not u[i] > 0:
        raise DegenerateSolutionError("profile vanishes identically")
    if i == 0 or i == u.size - 1:
        return Peak(float(r[i]), float(u[i]), i, True)
    x0, x1, x2 = r[i - 1:i + 2]
    y0, y1, y2 = u[i - 1:i + 2]
    # vertex of the interpolating parabola (divided differences)
    d01 = (y1 - y0) / (x1 - x0)
    d12 = (y2 - y1) / (x2 - x1)
    c2 = (d12 - d01) / (x2 - x0)
    if c2 >= 0:
        rs, us = float(r[i]), float(u[i])
    else:
        rs = 0.5 * (x0 + x1) - d01 / (2 * c2)
        rs = float(min(max(rs, x0), x2))
        us = float(y0 + d01 * (rs - x0) + c2 * (rs - x0) * (rs - x1))
    return Peak(rs, us, i, i == 1 or i == u.size - 2)


def _corollary_applies(V, N: int) -> bool:
    """``N >= 5`` or ``liminf r^2 V > 0`` (sampled on the tail grid)."""
    if N >= 5:
        return True
    r = tail_grid("infinity")
    with np.errstate(divide="ignore"):
        lg = np.log(np.asarray(V(r), float) * r ** 2)
    inner, outer = np.min(lg[:65]), np.min(lg[-65:])
    return bool(np.isfinite(outer) and outer >= inner - np.log(TAIL_DRIFT))


def _l2_tails(P: PenalizedProblem, env: DecayEnvelope, r_eps: float, applies: bool):
    """Squared L2 mass of the envelope beyond the truncation radii (closed-form bounds).

    Below ``r_min`` the envelope is bounded by its value at ``r_min``.  Beyond
    ``r_max`` it is continued by the power law ``(r_max / r)^e`` with
    ``e = (N-2)/2 + sqrt(((N-2)/2)^2 - kappa + lam_inf^2 / eps^2)`` and
    ``lam_inf^2 = (1 - mu) inf_{r > r_max} r^2 V``; without quadratic control
    of ``V`` the tail is reported as infinite.
    """
    N, eps, pen = P.N, P.eps, P.pen
    omega = sphere_area(N - 1)
    r0, r1 = P.r[0], P.r[-1]
    inner = omega * envelope_eval(env, r0, r_eps) ** 2 * r0 ** N / N
    if not applies:
        return inner, np.inf, np.nan
    rr = r1 * tail_grid("infinity") / 10
    lam_inf2 = (1 - pen.params.mu) * float(np.min(rr ** 2 * np.asarray(pen.V(rr), float)))
    h = (N - 2) / 2
    e = h + np.sqrt(max(h * h - pen.params.kappa + lam_inf2 / eps ** 2, 0.0))
    if not 2 * e > N:
        return inner, np.inf, e
    outer = omega * envelope_eval(env, r1, r_eps) ** 2 * r1 ** N / (2 * e - N)
    return inner, outer, e


def decay_fit(sol: DiscreteSolution, peak: Peak, outer=None, width: float = 5.0) -> dict:
    """Decay rate, envelope verdict and L2 norm for a converged solution.

    ``lambda_fit`` is the boundary-layer rate of the exterior barrier ``Psi``;
    ``lambda_u`` is the least-squares rate of ``u`` itself against the
    envelope exponent ``-(1/eps) d/(1+d)`` on the exterior nodes.  The
    envelope uses ``lambda_fit`` and ``C = u(r_eps) (1 + r_eps^2)^((N-2)/2)``.
    """
    P = sol.problem
    N, eps, r, u = P.N, P.eps, P.r, sol.u
    outer = outer or solve_outer_barrier(P)
    v_floor = float(np.min(P.pen.V(np.linspace(P.pen.r_lo, P.pen.r_hi, 2001))))
    fl = fit_lambda(outer, width, v_floor, P.pen.params.mu)
    lam = fl["lambda_fit"]
    ext = ~P.pen.in_lambda(r)
    ext[[0, -1]] = False
    live = ext & (u > 1e-280)
    if live.sum() < 3:
        raise ValueError("fit region is empty (peak too close to truncation)")
    d = np.abs(r - peak.r)
    x = -d[live] / (1 + d[live]) / eps
    y = np.log(u[live]) + (N - 2) / 2 * np.log1p(r[live] ** 2)
    lam_u = float(np.polyfit(x, y, 1)[0])
    C = peak.value * (1 + peak.r ** 2) ** ((N - 2) / 2)
    env = DecayEnvelope(C, lam, eps, N)
    e = envelope_eval(env, r, peak.r)
    slack = e[ext] - u[ext]
    applies = _corollary_applies(P.pen.V, N)
    grid_part = sphere_area(N - 1) * float(np.sum(P.mass * P.interior(u) ** 2))
    t_in, t_out, expo = _l2_tails(P, env, peak.r, applies)
    return {**fl, "lambda_u": lam_u, "C": C, "envelope_holds": bool(np.all(slack >= 0)),
            "envelope_min_slack": float(np.min(slack)), "vacuous": env.vacuous,
            "l2_grid": float(np.sqrt(grid_part)), "l2_tail_bound": float(np.sqrt(t_in + t_out)),
            "tail_exponent": float(expo), "l2_norm": float(np.sqrt(grid_part + t_in + t_out)),
            "corollary_applies": applies}


def localization(sol: DiscreteSolution, peak: Peak, deltas=(1e-2, 1e-3)) -> dict:
    """Half-width of ``{r in Lambda : u > delta}`` around the peak, absolute and in units of eps."""
    P = sol.problem
    inside = P.pen.in_lambda(P.r)
    out = {}
    for dl in deltas:
        sel = inside & (sol.u > dl)
        w = float(np.max(np.abs(P.r[sel] - peak.r))) if np.any(sel) else 0.0
        out[f"{dl:g}"] = {"radius": w, "radius_over_eps": w / P.eps}
    return out


def _rescaled_seed(prev: DiscreteSolution, prev_peak: Peak, problem: PenalizedProblem):
    s = problem.eps / prev.problem.eps
    x = prev_peak.r + (problem.r - prev_peak.r) / s
    seed = np.interp(x, prev.r, prev.u, left=0.0, right=0.0)
    seed[[0, -1]] = 0.0
    return seed


def _one(cfg: SweepConfig, eps: float, r_star: float, inf_m: float, aux, seed_from=None):
    rep = ConcentrationReport(eps=eps)
    t0 = time.perf_counter()
    try:
        P = cfg.problem(eps)
        seed = _rescaled_seed(*seed_from, P) if seed_from else None
        sol = solve(P, cfg.options, seed=seed, r0=r_star)
        pk = peak_extract(sol)
        cert = certify_original(P, sol)
        rep.solution = sol
        rep.r_eps, rep.peak, rep.peak_at_boundary = pk.r, pk.value, pk.at_boundary
        rep.m_at_peak = float(aux(pk.r))
        k = cfg.N - 1
        rep.scaled_energy = sol.c_eps / eps ** (cfg.N - k)
        rep.certified, rep.margin = bool(cert["certified"]), cert["margin"]
        rep.grad_norm, rep.iterations = sol.grad_norm, sol.iterations
        rep.residual = residual(P, sol)
        rep.tail = sol.tail_check()
        try:
            rep.decay = decay_fit(sol, pk)
            rep.lambda_fit = rep.decay["lambda_fit"]
            rep.l2_norm = rep.decay["l2_norm"]
        except ValueError as exc:
            rep.decay = {"error": str(exc)}
        rep.localization = localization(sol, pk)
    except (SolverError, ValueError, FloatingPointError) as exc:
        rep.error = f"{type(exc).__name__}: {exc}"
    rep.runtime = time.perf_counter() - t0
    return rep


def run_sweep(cfg: SweepConfig, keep_solutions: bool = True) -> list:
    """Solve every epsilon of the sweep and collect the diagnostics.

    With ``warm_start`` each solve is seeded by the previous solution,
    rescaled about its peak; otherwise every solve starts from the limit
    profile at the minimizer of ``M`` and the solves may run on
    ``cfg.threads`` threads.  Failures are recorded per epsilon.
    """
    aux = cfg.aux()
    r_star, inf_m = find_min(aux, cfg.lam)
    reports = []
    if cfg.warm_start:
        prev = None
        for eps in cfg.eps_list:
            rep = _one(cfg, eps, r_star, inf_m, aux, prev)
            reports.append(rep)
            if rep.ok:
                prev = (rep.solution, peak_extract(rep.solution))
    else:
        with ThreadPoolExecutor(max_workers=max(1, int(cfg.threads))) as ex:
            reports = list(ex.map(lambda e: _one(cfg, e, r_star, inf_m, aux), cfg.eps_list))
    if not keep_solutions:
        for rep in reports:
            rep.solution = None
    return reports


def _decreasing(x) -> bool:
    x = np.asarray(x, float)
    return bool(np.all(np.diff(x) < 0))


def concentration_check(reports, aux, lam: AnnulusLambda, tolerances: dict | None = None,
                        resolution: int = 20001) -> dict:
    """``M(r_eps) -> inf M`` along the sweep and ``r_eps`` staying away from the boundary."""
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    good = [r for r in reports if r.ok]
    if len(good) < 3:
        return {"verdict": "insufficient data", "pass": False, "count": len(good)}
    r_star, inf_m = find_min(aux, lam, resolution)
    m_gap = [abs(r.m_at_peak - inf_m) / inf_m for r in good]
    r_gap = [abs(r.r_eps - r_star) for r in good]
    dist = [float(lam.distance_to_boundary(r.r_eps)) for r in good]
    d_star = float(lam.distance_to_boundary(r_star))
    checks = {
        "m_gap_decreasing": _decreasing(m_gap),
        "final_m_gap": m_gap[-1] < tol["m_gap"],
        "r_gap_decreasing": _decreasing(r_gap),
        "final_r_gap": r_gap[-1] < tol["r_gap"],
        "away_from_boundary": min(dist) >= tol["boundary_fraction"] * d_star,
    }
    ok = all(checks.values())
    return {"verdict": "pass" if ok else "fail", "pass": ok, "checks": checks,
            "eps": [r.eps for r in good], "m_gap": m_gap, "r_gap": r_gap,
            "boundary_distance": dist, "r_star": r_star, "inf_M": inf_m}


def energy_scaling_check(reports, aux, k: int, lam: AnnulusLambda | None = None,
                         tolerances: dict | None = None, inf_m: float | None = None) -> dict:
    """Ratio ``eps^-(N-k) c_eps / (omega_k inf M)`` per epsilon and its final window."""
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    good = [r for r in reports if r.ok]
    if len(good) < 3:
        return {"verdict": "insufficient data", "pass": False, "count": len(good)}
    if inf_m is None:
        inf_m = find_min(aux, lam, 20001).m_star
    omega = sphere_area(k)
    ratio = [r.scaled_energy / (omega * inf_m) for r in good]
    lo, hi = tol["energy_ratio"]
    dev = np.abs(np.asarray(ratio) - 1)
    final_ok = lo <= ratio[-1] <= hi
    suspect = bool(1.8 <= ratio[-1] <= 2.3 or 0.43 <= ratio[-1] <= 0.58)
    return {"verdict": "pass" if final_ok else "fail", "pass": final_ok, "ratio": ratio,
            "eps": [r.eps for r in good], "omega_k": omega, "inf_M": inf_m,
            "trending": bool(np.all(np.diff(dev) <= 0)), "convention_suspect": suspect}


def peak_persistence(reports) -> dict:
    """Smallest peak value over the sweep (recorded, not prescribed)."""
    peaks = [r.peak for r in reports if r.ok]
    if not peaks:
        return {"delta": float("nan"), "pass": False}
    d = float(min(peaks))
    return {"delta": d, "pass": d > 0}
