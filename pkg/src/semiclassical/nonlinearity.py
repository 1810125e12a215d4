"""Power-type nonlinearities, the Hardy penalization weight and the penalized
nonlinearity used outside the concentration annulus."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from .potentials import RadialPotential

__all__ = [
    "Nonlinearity",
    "PenalizationParams",
    "PenalizedNonlinearity",
    "NodeNonlinearity",
    "PositivityResult",
    "NumericalError",
    "validate_f",
    "hardy_weight",
    "quadratic_form_positivity",
    "sphere_area",
]


class NumericalError(RuntimeError):
    """An iterative numerical method failed to converge."""


def sphere_area(k: int) -> float:
    """Surface measure of the unit sphere S^k in R^(k+1); S^0 counts two points."""
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


@dataclass(frozen=True)
class Nonlinearity:
    """``f(s) = sum_i c_i s**p_i`` on ``s >= 0``.

    ``q`` and ``p`` are the smallest and largest exponents, ``theta`` the
    Ambrosetti-Rabinowitz exponent in ``(2, p + 1]``.
    """

    coeffs: tuple[float, ...]
    powers: tuple[float, ...]
    theta: float | None = None

    def __post_init__(self):
        c = tuple(float(v) for v in self.coeffs)
        pw = tuple(float(v) for v in self.powers)
        if len(c) != len(pw) or not c:
            raise ValueError("coeffs and powers must be nonempty and of equal length")
        if min(pw) <= 1:
            raise ValueError("every exponent must exceed 1")
        order = np.argsort(pw)
        c = tuple(c[i] for i in order)
        pw = tuple(pw[i] for i in order)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "powers", pw)
        theta = self.theta
        if theta is None:
            theta = min(pi for ci, pi in zip(c, pw) if ci > 0) + 1 if any(ci > 0 for ci in c) else pw[-1] + 1
        theta = float(theta)
        if not 2 < theta <= pw[-1] + 1:
            raise ValueError(f"theta must lie in (2, p+1] = (2, {pw[-1] + 1}], got {theta}")
        object.__setattr__(self, "theta", theta)

    @classmethod
    def power(cls, p: float) -> "Nonlinearity":
        return cls((1.0,), (p,))

    @classmethod
    def sum_of_powers(cls, coeffs: Sequence[float], powers: Sequence[float],
                      theta: float | None = None) -> "Nonlinearity":
        return cls(tuple(coeffs), tuple(powers), theta)

    @classmethod
    def from_spec(cls, spec) -> "Nonlinearity":
        if spec["kind"] == "pure-power":
            return cls.power(spec["p"])
        return cls.sum_of_powers(spec["coeffs"], spec["powers"], spec.get("theta"))

    def to_spec(self) -> dict:
        if self.is_pure_power:
            return {"kind": "pure-power", "p": self.p}
        return {"kind": "sum-of-powers", "coeffs": list(self.coeffs),
                "powers": list(self.powers), "theta": self.theta}

    @property
    def is_pure_power(self) -> bool:
        return len(self.coeffs) == 1 and self.coeffs[0] == 1.0

    @property
    def p(self) -> float:
        return self.powers[-1]

    @property
    def q(self) -> float:
        return self.powers[0]

    def is_subcritical(self, d: int) -> bool:
        return 1.0 / (self.p + 1) > 0.5 - 1.0 / d

    def check_subcritical(self, d: int) -> None:
        if not self.is_subcritical(d):
            raise ValueError(f"p = {self.p} is not subcritical in dimension {d}")

    def _s(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise ValueError("f is defined on s >= 0")
        return s

    def f(self, s):
        s = self._s(s)
        return sum(c * s ** p for c, p in zip(self.coeffs, self.powers))

    def F(self, s):
        s = self._s(s)
        return sum(c * s ** (p + 1) / (p + 1) for c, p in zip(self.coeffs, self.powers))

    def df(self, s):
        s = self._s(s)
        return sum(c * p * s ** (p - 1) for c, p in zip(self.coeffs, self.powers))

    def f_over_s(self, s):
        s = self._s(s)
        return sum(c * s ** (p - 1) for c, p in zip(self.coeffs, self.powers))

    def switch_point(self, A, B):
        """Solve ``B f(s) / s = A`` for ``s > 0`` (elementwise).

        Returns ``inf`` where ``B <= 0`` and 0 where ``A <= 0``.
        """
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        A, B = np.broadcast_arrays(A, B)
        out = np.full(A.shape, np.inf)
        ok = (B > 0) & np.isfinite(A)
        out[ok & (A <= 0)] = 0.0
        live = ok & (A > 0)
        if self.is_pure_power:
            out[live] = (A[live] / B[live]) ** (1.0 / (self.p - 1))
            return out
        a, b = A[live], B[live]
        lo = np.full(a.shape, -60.0)
        hi = np.full(a.shape, 60.0)
        # f(s)/s is nondecreasing, so bisection on log s
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            big = b * self.f_over_s(np.exp(mid)) >= a
            hi = np.where(big, mid, hi)
            lo = np.where(big, lo, mid)
        out[live] = np.exp(0.5 * (lo + hi))
        return out


def validate_f(f: Nonlinearity, grid=None) -> dict:
    """Sampled certificate for the structural assumptions on ``f``."""
    s = np.logspace(-6, 3, 1001) if grid is None else np.asarray(grid, dtype=float)
    fs, Fs = f.f(s), f.F(s)
    report = {}

    def first(mask):
        idx = np.flatnonzero(~mask)
        return None if idx.size == 0 else float(s[idx[0]])

    decade = max(1, int(np.sum(s <= s[0] * 10)))
    ratio0 = np.abs(fs) / s ** f.q
    ok0 = bool(np.max(ratio0[:decade]) <= 2 * np.max(ratio0[decade:2 * decade]))
    report["f1"] = {"pass": ok0, "violation": None if ok0 else float(s[0])}
    ratio_inf = np.abs(fs) / s ** f.p
    ok_inf = bool(np.max(ratio_inf[-decade:]) <= 2 * np.max(ratio_inf[-2 * decade:-decade]))
    report["f2"] = {"pass": ok_inf, "violation": None if ok_inf else float(s[-1])}
    m3 = (fs >= 0) & (Fs > 0) & (f.theta * Fs <= fs * s * (1 + 1e-12))
    report["f3"] = {"pass": bool(m3.all()), "violation": first(m3)}
    q = fs / s
    m4 = np.ones_like(s, dtype=bool)
    m4[1:] = q[1:] >= q[:-1] * (1 - 1e-12)
    report["f4"] = {"pass": bool(m4.all()), "violation": first(m4)}
    report["pass"] = all(v["pass"] for v in report.values())
    return report


@dataclass(frozen=True)
class PenalizationParams:
    """Hardy fraction ``kappa``, log exponent ``beta`` and linear fraction ``mu``."""

    N: int = 3
    kappa: float | None = None
    beta: float = 1.0
    mu: float = 0.5

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be at least 2")
        kappa = self.kappa
        if kappa is None:
            kappa = 0.5 * self.hardy_constant if self.N >= 3 else 0.1
        kappa = float(kappa)
        object.__setattr__(self, "kappa", kappa)
        if self.N >= 3 and not 0 < kappa < self.hardy_constant:
            raise ValueError(f"kappa must lie in (0, {self.hardy_constant}) for N = {self.N}")
        if self.N == 2 and not kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not 0 < self.mu < 1:
            raise ValueError("mu must lie in (0, 1)")

    @property
    def hardy_constant(self) -> float:
        return ((self.N - 2) / 2) ** 2


def hardy_weight(r, params: PenalizationParams):
    """Penalization potential H at radius ``r``."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise ValueError("H is defined for r > 0 only")
    L = np.log(r_arr) ** 2 + 1
    if params.N >= 3:
        out = params.kappa / (r_arr ** 2 * L ** ((1 + params.beta) / 2))
    else:
        out = params.kappa / (r_arr ** 2 * L ** ((2 + params.beta) / 2))
    return float(out) if np.ndim(r) == 0 else out


@dataclass(frozen=True)
class NodeNonlinearity:
    """g and G frozen at a fixed set of radii (one value per node)."""

    f: Nonlinearity
    K: np.ndarray
    A: np.ndarray          # eps^2 H + mu V
    inside: np.ndarray     # node lies in the annulus
    s_switch: np.ndarray   # inf inside the annulus

    def g(self, s):
        s = np.maximum(s, 0.0)
        kf = self.K * self.f.f(s)
        return np.where(s <= self.s_switch, kf, self.A * s)

    def G(self, s):
        s = np.maximum(s, 0.0)
        low = self.K * self.f.F(s)
        ss = np.where(np.isfinite(self.s_switch), self.s_switch, 0.0)
        high = self.K * self.f.F(ss) + 0.5 * self.A * (s ** 2 - ss ** 2)
        return np.where(s <= self.s_switch, low, high)

    def dg(self, s):
        s = np.maximum(s, 0.0)
        return np.where(s <= self.s_switch, self.K * self.f.df(s), self.A)


@dataclass(frozen=True)
class PenalizedNonlinearity:
    """``g_eps(r, s)``: K f(s) in the annulus, min{(eps^2 H + mu V) s, K f(s)} outside."""

    f: Nonlinearity
    V: RadialPotential
    K: RadialPotential
    r_lo: float
    r_hi: float
    params: PenalizationParams
    eps: float

    def __post_init__(self):
        if not 0 < self.r_lo < self.r_hi:
            raise ValueError("annulus needs 0 < r_lo < r_hi")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def in_lambda(self, r):
        r = np.asarray(r, dtype=float)
        return (r > self.r_lo) & (r < self.r_hi)

    def linear_bound(self, r):
        """``eps^2 H(r) + mu V(r)``."""
        return self.eps ** 2 * hardy_weight(r, self.params) + self.params.mu * self.V(r)

    def at(self, r) -> NodeNonlinearity:
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise ValueError("g_eps is defined for r > 0 only")
        K = self.K(r)
        A = self.linear_bound(r)
        inside = self.in_lambda(r)
        s_sw = np.where(inside, np.inf, self.f.switch_point(A, K))
        return NodeNonlinearity(self.f, K, A, inside, s_sw)

    def g(self, r, s):
        r, s = np.broadcast_arrays(np.asarray(r, float), np.asarray(s, float))
        if np.any(s < 0):
            raise ValueError("g_eps is defined for s >= 0")
        return self.at(r).g(s)

    def G(self, r, s):
        r, s = np.broadcast_arrays(np.asarray(r, float), np.asarray(s, float))
        if np.any(s < 0):
            raise ValueError("G_eps is defined for s >= 0")
        return self.at(r).G(s)


# ---------------------------------------------------------------------------
# positivity of -eps^2 (Laplacian + H) + V on a radial grid
# ---------------------------------------------------------------------------
def radial_stiffness(r: np.ndarray, N: int):
    """Weighted P1 stiffness and lumped mass for ``int u'^2 r^(N-1) dr``.

    Returns ``(diag, off, mass)`` of the full nodal system (no boundary rows
    removed); ``off[i]`` couples nodes ``i`` and ``i + 1``.
    """
    h = np.diff(r)
    mid = 0.5 * (r[1:] + r[:-1])
    kappa = mid ** (N - 1) / h
    diag = np.zeros_like(r)
    diag[:-1] += kappa
    diag[1:] += kappa
    off = -kappa
    w = np.zeros_like(r)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    mass = w * r ** (N - 1)
    return diag, off, mass


@dataclass
class PositivityResult:
    eigenvalue: float
    eigenvector: np.ndarray
    iterations: int
    rayleigh_history: list

    @property
    def positive(self) -> bool:
        return self.eigenvalue >= -1e-8


def quadratic_form_positivity(params: PenalizationParams, r, V=None, eps: float = 1.0,
                              tol: float = 1e-12, max_iter: int = 200) -> PositivityResult:
    """Smallest eigenvalue of the radial operator ``-eps^2 (Laplacian + H) + V``.

    Dirichlet conditions at both ends of the grid ``r``; ``V`` defaults to 0,
    which gives ``-Laplacian - H`` for ``eps = 1``.  The spectrum of the
    symmetrized tridiagonal matrix is bracketed by bisection and the bottom
    eigenpair is polished by shifted inverse iteration.
    """
    r = np.asarray(r, dtype=float)
    if r.size < 4 or np.any(np.diff(r) <= 0) or r[0] <= 0:
        raise ValueError("need an increasing grid of at least 4 positive radii")
    N = params.N
    diag, off, mass = radial_stiffness(r, N)
    pot = -eps ** 2 * hardy_weight(r, params)
    if V is not None:
        pot = pot + (V(r) if callable(V) else np.asarray(V, float))
    d = eps ** 2 * diag[1:-1] + mass[1:-1] * pot[1:-1]
    e = eps ** 2 * off[1:-1]
    s = 1.0 / np.sqrt(mass[1:-1])
    d = d * s * s
    e = e * s[:-1] * s[1:]

    lam0 = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, 0))[0]
    # inverse iteration just below the bracketed eigenvalue
    shift = lam0 - 1e-6 * max(1.0, abs(lam0))
    ab = np.zeros((3, d.size))
    ab[0, 1:] = e
    ab[1] = d - shift
    ab[2, :-1] = e
    rng = np.random.default_rng(0)
    x = rng.random(d.size) + 1.0
    x /= np.linalg.norm(x)
    hist = []
    rq = np.inf
    for it in range(1, max_iter + 1):
        y = solve_banded((1, 1), ab, x)
        x = y / np.linalg.norm(y)
        Tx = d * x
        Tx[:-1] += e * x[1:]
        Tx[1:] += e * x[:-1]
        rq_new = float(x @ Tx)
        hist.append(rq_new)
        step = abs(rq_new - rq)
        scale = max(1.0, abs(rq_new))
        # rounding floor: changes stop shrinking once below ~1e-9 relative
        stalled = (len(hist) > 5 and step <= 1e-9 * scale
                   and step >= 0.5 * abs(hist[-2] - hist[-3]))
        if step <= tol * scale or stalled:
            vec = np.zeros_like(r)
            vec[1:-1] = x * s
            return PositivityResult(rq_new, vec, it, hist)
        rq = rq_new
    raise NumericalError(f"inverse iteration did not converge in {max_iter} steps; "
                         f"last Rayleigh quotients {hist[-3:]}")
