"""Auxiliary potential ``M(r) = r^k E(V(r), K(r))`` and its minimization on an annulus.

For a pure power ``f(s) = s^p`` the ground energy factorizes and

    M(r) = E(1, 1) r^k V^((p+1)/(p-1) - d/2) K^(-2/(p-1)),   d = N - k,

otherwise every evaluation goes through a limit ground-state solve.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .limit import ground_energy
from .nonlinearity import Nonlinearity

__all__ = [
    "AdmissibilityError",
    "AnnulusLambda",
    "AuxPotential",
    "MinResult",
    "aux_closed_form",
    "aux_general",
    "find_min",
    "validate_lambda",
    "max_neighbor_jump",
    "unit_energy",
]


class AdmissibilityError(ValueError):
    """Raised when the concentration set fails an admissibility condition."""

    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


@functools.lru_cache(maxsize=None)
def unit_energy(d: int, p: float) -> float:
    """``E(1, 1)`` for ``f(s) = s^p`` in dimension ``d`` (computed once per pair)."""
    return ground_energy(1.0, 1.0, Nonlinearity.power(p), d)


def _evaluate(pot, r):
    return np.asarray(pot(r) if callable(pot) else pot, dtype=float)


def aux_closed_form(r, N: int, k: int, p: float, V, K):
    """Closed form of ``M`` for ``f(s) = s^p``; ``+inf`` where ``K = 0``.

    Raises ``ValueError`` where ``V <= 0``.
    """
    d = N - k
    r_arr = np.asarray(r, dtype=float)
    v = np.broadcast_to(_evaluate(V, r_arr), r_arr.shape)
    kk = np.broadcast_to(_evaluate(K, r_arr), r_arr.shape)
    if np.any(v <= 0):
        raise ValueError("closed-form M needs V > 0")
    if np.any(kk < 0):
        raise ValueError("K must be nonnegative")
    a_exp = (p + 1) / (p - 1) - d / 2
    b_exp = -2 / (p - 1)
    with np.errstate(divide="ignore"):
        out = unit_energy(d, p) * r_arr ** k * v ** a_exp * np.where(kk > 0, kk, 1.0) ** b_exp
    out = np.where(kk > 0, out, np.inf)
    return float(out) if np.ndim(r) == 0 else out


def aux_general(r, N: int, k: int, f: Nonlinearity, V, K):
    """``M(r) = r^k E(V(r), K(r))`` through the limit ground-state solver."""
    d = N - k
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    v = np.broadcast_to(_evaluate(V, r_arr), r_arr.shape)
    kk = np.broadcast_to(_evaluate(K, r_arr), r_arr.shape)
    if np.any(v <= 0):
        raise ValueError("M needs V > 0")
    out = np.empty_like(r_arr)
    for i, (ri, vi, ki) in enumerate(zip(r_arr, v, kk)):
        out[i] = np.inf if ki == 0 else ri ** k * ground_energy(vi, ki, f, d)
    return float(out[0]) if np.ndim(r) == 0 else out


@dataclass(frozen=True)
class AuxPotential:
    """``M`` for given ``(N, k, f, V, K)``.

    ``mode`` is ``"closed-form"`` (pure powers only) or ``"general"``; the
    default picks the closed form whenever it applies.
    """

    N: int
    k: int
    f: Nonlinearity
    V: object
    K: object
    mode: str | None = None

    def __post_init__(self):
        if not 1 <= self.k <= self.N - 1:
            raise ValueError("need 1 <= k <= N - 1")
        if self.N - self.k not in (1, 2, 3):
            raise ValueError("reduced dimension N - k must be 1, 2 or 3")
        self.f.check_subcritical(self.N - self.k)
        mode = self.mode or ("closed-form" if self.f.is_pure_power else "general")
        if mode not in ("closed-form", "general"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode == "closed-form" and not self.f.is_pure_power:
            raise ValueError("closed form requires a pure-power nonlinearity")
        object.__setattr__(self, "mode", mode)

    @property
    def d(self) -> int:
        return self.N - self.k

    def __call__(self, r):
        if self.mode == "closed-form":
            return aux_closed_form(r, self.N, self.k, self.f.p, self.V, self.K)
        return aux_general(r, self.N, self.k, self.f, self.V, self.K)

    def off_axis(self, t, s):
        """``M`` at ``|x'| = t``, ``|x''| = s`` for potentials radial in ``|x|``."""
        t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
        rho = np.hypot(t, s)
        v, kk = _evaluate(self.V, rho), _evaluate(self.K, rho)
        if self.mode == "closed-form":
            return aux_closed_form(s, self.N, self.k, self.f.p, v, kk)
        out = np.empty(s.shape)
        for idx in np.ndindex(s.shape):
            out[idx] = aux_general(s[idx], self.N, self.k, self.f, v[idx], kk[idx])
        return out

    def scaled(self, c: float) -> "AuxPotential":
        """Same problem with ``K`` multiplied by ``c > 0``."""
        K = self.K
        return AuxPotential(self.N, self.k, self.f, self.V,
                            lambda r: c * _evaluate(K, r), self.mode)


@dataclass
class AnnulusLambda:
    """Concentration set ``r_lo < |x''| < r_hi``.

    For ``k < N - 1`` the set is the tube of radius ``(r_hi - r_lo) / 2``
    around the sphere ``|x''| = (r_lo + r_hi) / 2``, so its closure avoids
    ``x'' = 0`` and its trace on ``x' = 0`` is the annulus.
    """

    r_lo: float
    r_hi: float
    admissibility: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        self.r_lo, self.r_hi = float(self.r_lo), float(self.r_hi)
        if not (0 < self.r_lo < self.r_hi < np.inf):
            raise ValueError("need 0 < r_lo < r_hi < inf")

    def contains(self, r):
        r = np.asarray(r, dtype=float)
        return (r > self.r_lo) & (r < self.r_hi)

    @property
    def center(self) -> float:
        return 0.5 * (self.r_lo + self.r_hi)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.r_hi - self.r_lo)

    def distance_to_boundary(self, r):
        r = np.asarray(r, dtype=float)
        return np.minimum(r - self.r_lo, self.r_hi - r)

    def to_spec(self) -> dict:
        return {"r_lo": self.r_lo, "r_hi": self.r_hi}


@dataclass
class MinResult:
    r_star: float
    m_star: float
    boundary: bool
    ties: int
    resolution: int

    def __iter__(self):
        yield self.r_star
        yield self.m_star

    def to_dict(self) -> dict:
        return {"r_star": self.r_star, "m_star": self.m_star, "boundary": self.boundary,
                "ties": self.ties, "resolution": self.resolution}


def find_min(aux, lam: AnnulusLambda, resolution: int = 2001, xtol: float = 1e-8,
             strict: bool = True) -> MinResult:
    """Global minimizer of ``aux`` over ``[r_lo, r_hi]``.

    A scan on ``resolution`` equispaced radii locates the basin, golden-section
    search refines it to ``xtol``.  Equal scan values are resolved toward the
    smaller radius and counted in ``ties``.  A minimum on the scan boundary
    sets ``boundary``; with ``strict`` it raises :class:`AdmissibilityError`.
    """
    if resolution < 3:
        raise ValueError("resolution must be at least 3")
    r = np.linspace(lam.r_lo, lam.r_hi, resolution)
    m = np.asarray(aux(r), dtype=float)
    i = int(np.argmin(m))
    ties = int(np.sum(m <= m[i] * (1 + 1e-12))) - 1
    if i == 0 or i == resolution - 1:
        res = MinResult(float(r[i]), float(m[i]), True, ties, resolution)
        if strict:
            raise AdmissibilityError(f"minimum of M on the boundary r = {r[i]:.6g}", res)
        return res

    if not (m[i] < m[i - 1] and m[i] < m[i + 1]):
        return MinResult(float(r[i]), float(m[i]), False, ties, resolution)   # plateau

    def fun(x):
        return float(aux(x))

    opt = minimize_scalar(fun, bracket=(r[i - 1], r[i], r[i + 1]), method="golden",
                          tol=xtol / r[i])
    rs, ms = float(opt.x), float(opt.fun)
    if not (r[i - 1] <= rs <= r[i + 1]) or ms > m[i]:
        rs, ms = float(r[i]), float(m[i])
    return MinResult(rs, ms, False, ties, resolution)


def validate_lambda(aux: AuxPotential, lam: AnnulusLambda, N: int | None = None,
                    k: int | None = None, resolution: int = 2001) -> dict:
    """Admissibility report for the concentration set.

    Checks ``V > 0`` on the closure, ``inf M > 0``, the interior infimum
    strictly below the boundary values and, for ``k = N - 2``, the tube
    condition ``inf_{x'=0} M < 2 inf M``.  Every check carries a margin
    (positive means pass).
    """
    N = aux.N if N is None else N
    k = aux.k if k is None else k
    r = np.linspace(lam.r_lo, lam.r_hi, resolution)
    checks = {}
    v = _evaluate(aux.V, r)
    vmin = float(np.min(v))
    checks["V > 0 on closure"] = {"pass": vmin > 0, "margin": vmin}
    if vmin <= 0:
        report = {"pass": False, "checks": checks, "lambda": lam.to_spec()}
        lam.admissibility = report
        return report
    m = np.asarray(aux(r), dtype=float)
    inf_int = float(np.min(m[1:-1]))
    inf_bd = float(min(m[0], m[-1]))
    checks["inf M > 0"] = {"pass": inf_int > 0, "margin": inf_int}
    gap = (inf_bd - inf_int) / inf_bd if np.isfinite(inf_bd) else 1.0
    checks["interior below boundary"] = {"pass": bool(gap > 0), "margin": float(gap),
                                         "inf_interior": inf_int, "inf_boundary": inf_bd}
    if k == N - 2:
        n2 = 41 if aux.mode == "closed-form" else 9
        s = np.linspace(lam.r_lo, lam.r_hi, n2)
        t = np.linspace(0, lam.half_width, n2)
        S, T = np.meshgrid(s, t)
        inside = np.hypot(T, S - lam.center) <= lam.half_width
        mt = np.where(inside, aux.off_axis(T, S), np.inf)
        inf_tube = float(min(np.min(mt), inf_int))
        margin = (2 * inf_tube - inf_int) / (2 * inf_tube)
        checks["factor two (k = N - 2)"] = {"pass": bool(margin > 0), "margin": float(margin),
                                            "inf_tube": inf_tube}
    report = {"pass": all(c["pass"] for c in checks.values()), "checks": checks,
              "lambda": lam.to_spec(), "inf_M": inf_int}
    lam.admissibility = report
    return report


def max_neighbor_jump(aux, lam: AnnulusLambda, resolution: int) -> float:
    """Largest relative jump of ``M`` between neighbouring scan radii."""
    m = np.asarray(aux(np.linspace(lam.r_lo, lam.r_hi, resolution)), dtype=float)
    return float(np.max(np.abs(np.diff(m))) / np.max(np.abs(m)))
