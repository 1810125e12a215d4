"""Closed-form radial potentials, growth-class checks and Kelvin inversion.

A :class:`RadialPotential` is a small expression tree over a handful of
closed-form kinds.  Every node evaluates exactly, so the Kelvin transform
``r**(-w) * P(1/r)`` is itself a closed-form potential and applying it twice
with the same weight gives back the very same object.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

__all__ = [
    "RadialPotential",
    "GrowthCondition",
    "GrowthClass",
    "KelvinPair",
    "eval_potential",
    "validate_growth",
    "kelvin_transform_potentials",
    "kelvin_transform_field",
    "kelvin_weight_K",
    "mirror_growth_class",
    "tail_grid",
    "G0_1", "G0_2", "G0_3", "Ginf_1", "Ginf_2", "Ginf_3",
]

KINDS = (
    "constant",
    "power",
    "shifted-polynomial",
    "gaussian-bump",
    "exponential",
    "rational",
    "product",
    "kelvin",
)

# tail grid used as a surrogate for liminf / limsup
PER_DECADE = 64
DECADES = 6
# allowed drift of the extreme value between the innermost and the outermost
# decade of a tail grid before a bound is declared violated
TAIL_DRIFT = 2.0


@dataclass(frozen=True)
class RadialPotential:
    """Closed-form nonnegative function of the radius ``r > 0``.

    Parameters by kind (all coefficients real):

    ``constant``            ``(c,)``                 c
    ``power``               ``(c, s)``               c r^s
    ``shifted-polynomial``  ``(a0, r0, c[, m])``     a0 + c |r - r0|^m  (m = 2)
    ``gaussian-bump``       ``(a0, A, r0, w)``       a0 + A exp(-((r - r0)/w)^2)
    ``exponential``         ``(c, a[, b])``          c exp(-a r^b)  (b = 1)
    ``rational``            ``(n, p0..p_{n-1}, q0..)`` sum p_i r^i / sum q_j r^j
    ``product``             factors                  product of the factors
    ``kelvin``              inner, weight w          r^(-w) inner(1/r)
    """

    kind: str
    params: tuple[float, ...] = ()
    factors: tuple["RadialPotential", ...] = ()
    inner: "RadialPotential | None" = field(default=None, compare=True)
    weight: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        n = len(self.params)
        need = {"constant": (1,), "power": (2,), "shifted-polynomial": (3, 4),
                "gaussian-bump": (4,), "exponential": (2, 3)}
        if self.kind in need and n not in need[self.kind]:
            raise ValueError(f"{self.kind} expects {need[self.kind]} params, got {n}")
        if self.kind == "rational":
            if n < 3 or int(self.params[0]) != self.params[0] or not 1 <= self.params[0] < n - 1:
                raise ValueError("rational expects (n_num, numerator..., denominator...)")
        if self.kind == "product" and not self.factors:
            raise ValueError("product needs at least one factor")
        if self.kind == "kelvin" and self.inner is None:
            raise ValueError("kelvin node needs an inner potential")
        with np.errstate(all="ignore"):
            probe = self(np.logspace(-4, 4, 81))
        if np.any(probe < 0) or np.any(np.isnan(probe)):
            raise ValueError(f"potential {self.to_spec()} is negative or undefined on (0, inf)")

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, c: float) -> "RadialPotential":
        return cls("constant", (c,))

    @classmethod
    def power(cls, c: float, s: float) -> "RadialPotential":
        return cls("power", (c, s))

    @classmethod
    def shifted_polynomial(cls, a0, r0, c=1.0, m=2.0) -> "RadialPotential":
        return cls("shifted-polynomial", (a0, r0, c, m))

    @classmethod
    def product(cls, *factors: "RadialPotential") -> "RadialPotential":
        return cls("product", factors=tuple(factors))

    @classmethod
    def from_spec(cls, spec: Mapping[str, Any]) -> "RadialPotential":
        """Build from the JSON form ``{"kind": ..., "params": [...]}``."""
        kind = spec["kind"]
        if kind == "product":
            return cls("product", factors=tuple(cls.from_spec(s) for s in spec["factors"]))
        if kind == "kelvin":
            return cls("kelvin", inner=cls.from_spec(spec["of"]), weight=float(spec["weight"]))
        return cls(kind, tuple(spec.get("params", ())))

    def to_spec(self) -> dict:
        if self.kind == "product":
            return {"kind": "product", "factors": [f.to_spec() for f in self.factors]}
        if self.kind == "kelvin":
            return {"kind": "kelvin", "weight": self.weight, "of": self.inner.to_spec()}
        return {"kind": self.kind, "params": list(self.params)}

    # -- evaluation -------------------------------------------------------
    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        p = self.params
        k = self.kind
        if k == "constant":
            return np.full_like(r, p[0])
        if k == "power":
            return p[0] * r ** p[1]
        if k == "shifted-polynomial":
            m = p[3] if len(p) == 4 else 2.0
            return p[0] + p[2] * np.abs(r - p[1]) ** m
        if k == "gaussian-bump":
            return p[0] + p[1] * np.exp(-(((r - p[2]) / p[3]) ** 2))
        if k == "exponential":
            b = p[2] if len(p) == 3 else 1.0
            return p[0] * np.exp(-p[1] * r ** b)
        if k == "rational":
            n = int(p[0])
            num = np.polynomial.polynomial.polyval(r, p[1:1 + n])
            den = np.polynomial.polynomial.polyval(r, p[1 + n:])
            return num / den
        if k == "product":
            out = np.ones_like(r)
            for f in self.factors:
                out = out * f(r)
            return out
        # kelvin
        return r ** (-self.weight) * self.inner(1.0 / r)

    def kelvin(self, weight: float) -> "RadialPotential":
        """``r**(-weight) * self(1/r)``; the inverse of a Kelvin node of equal weight."""
        if self.kind == "kelvin" and self.weight == weight:
            return self.inner
        return RadialPotential("kelvin", inner=self, weight=float(weight))


def eval_potential(pot: RadialPotential, r):
    """Evaluate ``pot`` at radii ``r > 0``."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise ValueError("potentials are defined for r > 0 only")
    out = pot(r_arr)
    return float(out) if np.ndim(r) == 0 else out


# ---------------------------------------------------------------------------
# growth classes
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class GrowthCondition:
    """One growth condition, at the origin or at infinity.

    ``exponent`` is the K-exponent (tau at the origin, sigma at infinity);
    ``rate`` is the V-exponent of class 3 (gamma at the origin, alpha at infinity).
    """

    end: str
    index: int
    exponent: float
    rate: float | None = None

    def __post_init__(self):
        if self.end not in ("origin", "infinity"):
            raise ValueError("end must be 'origin' or 'infinity'")
        if self.index not in (1, 2, 3):
            raise ValueError("growth class index must be 1, 2 or 3")
        if self.index == 3 and self.rate is None:
            raise ValueError("class 3 needs a rate exponent")
        if self.end == "origin" and self.index == 1 and not self.exponent > -2:
            raise ValueError("G0_1 requires tau > -2")
        if self.end == "origin" and self.index == 3 and not self.rate > 2:
            raise ValueError("G0_3 requires gamma > 2")
        if self.end == "infinity" and self.index == 3 and not self.rate < 2:
            raise ValueError("Ginf_3 requires alpha < 2")

    @property
    def name(self) -> str:
        return f"{'G0' if self.end == 'origin' else 'Ginf'}_{self.index}"

    def to_spec(self) -> dict:
        d = {"class": self.name, ("tau" if self.end == "origin" else "sigma"): self.exponent}
        if self.index == 3:
            d["gamma" if self.end == "origin" else "alpha"] = self.rate
        return d

    @classmethod
    def from_spec(cls, spec: Mapping[str, Any]) -> "GrowthCondition":
        name = spec["class"]
        end = "origin" if name.startswith("G0") else "infinity"
        idx = int(name.rsplit("_", 1)[1])
        exp_key, rate_key = ("tau", "gamma") if end == "origin" else ("sigma", "alpha")
        return cls(end, idx, float(spec.get(exp_key, 0.0)),
                   None if idx != 3 else float(spec[rate_key]))


def G0_1(tau):
    return GrowthCondition("origin", 1, tau)


def G0_2(tau):
    return GrowthCondition("origin", 2, tau)


def G0_3(gamma, tau):
    return GrowthCondition("origin", 3, tau, gamma)


def Ginf_1(sigma):
    return GrowthCondition("infinity", 1, sigma)


def Ginf_2(sigma):
    return GrowthCondition("infinity", 2, sigma)


def Ginf_3(alpha, sigma):
    return GrowthCondition("infinity", 3, sigma, alpha)


@dataclass(frozen=True)
class GrowthClass:
    """A declared pair of conditions; either end may be left undeclared."""

    origin: GrowthCondition | None = None
    infinity: GrowthCondition | None = None

    def __post_init__(self):
        if self.origin is not None and self.origin.end != "origin":
            raise ValueError("origin slot holds a condition at infinity")
        if self.infinity is not None and self.infinity.end != "infinity":
            raise ValueError("infinity slot holds a condition at the origin")


def tail_grid(end: str, decades: int = DECADES, per_decade: int = PER_DECADE) -> np.ndarray:
    """Log-spaced surrogate grid ordered from the inner edge towards the limit.

    The two ends are exact reciprocals of each other, so a Kelvin-transformed
    pair is checked at exactly the mirrored radii.
    """
    if decades <= 0 or per_decade <= 0:
        raise ValueError("empty sample grid")
    far = np.logspace(1, 1 + decades, decades * per_decade + 1)
    return far if end == "infinity" else 1.0 / far


def _bounded_above(logx: np.ndarray, per_decade: int) -> tuple[float, bool]:
    inner = np.max(logx[:per_decade + 1])
    outer = np.max(logx[-(per_decade + 1):])
    sup = float(np.exp(np.max(logx)))
    ok = bool(np.isfinite(outer) and outer <= inner + np.log(TAIL_DRIFT))
    return sup, ok


def _bounded_below(logx: np.ndarray, per_decade: int) -> tuple[float, bool]:
    inner = np.min(logx[:per_decade + 1])
    outer = np.min(logx[-(per_decade + 1):])
    inf = float(np.exp(np.min(logx)))
    ok = bool(np.isfinite(outer) and outer >= inner - np.log(TAIL_DRIFT) and inf > 0)
    return inf, ok


def _check_condition(V, K, cond: GrowthCondition, N: int, q: float,
                     decades: int, per_decade: int) -> dict:
    r = tail_grid(cond.end, decades, per_decade)
    logr = np.log(r)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        logV = np.log(V(r))
        logK = np.log(K(r))
    checks = []
    at = "0" if cond.end == "origin" else "inf"
    if cond.index == 1:
        if cond.end == "infinity":
            bound = (N - 2) * q - N
            checks.append({"name": "sigma < (N-2)q - N", "value": cond.exponent,
                           "bound": bound, "pass": bool(cond.exponent < bound)})
    elif cond.index == 2:
        val, ok = _bounded_below(logV + 2 * logr, per_decade)
        checks.append({"name": f"liminf_{at} V r^2 > 0", "value": val, "pass": ok})
    else:
        val, ok = _bounded_below(logV + cond.rate * logr, per_decade)
        sym = "gamma" if cond.end == "origin" else "alpha"
        checks.append({"name": f"liminf_{at} V r^{sym} > 0", "value": val, "pass": ok})
    if cond.index in (1, 2):
        val, ok = _bounded_above(logK - cond.exponent * logr, per_decade)
        sym = "tau" if cond.end == "origin" else "sigma"
        checks.append({"name": f"limsup_{at} K / r^{sym} < inf", "value": val, "pass": ok})
    else:
        if cond.end == "infinity":
            stretch = r ** ((2 - cond.rate) / 2)
        else:
            stretch = r ** (-(cond.rate - 2) / 2)
        val, ok = _bounded_above(logK - cond.exponent * stretch, per_decade)
        checks.append({"name": f"limsup_{at} K / exp(.) < inf", "value": val, "pass": ok})
    return {"condition": cond.name, "params": cond.to_spec(), "checks": checks,
            "pass": all(c["pass"] for c in checks)}


def validate_growth(V: RadialPotential, K: RadialPotential, cls: GrowthClass, N: int,
                    q: float, decades: int = DECADES, per_decade: int = PER_DECADE) -> dict:
    """Spot-check the declared growth conditions on log-spaced tail grids.

    liminf / limsup are replaced by the min / max over the tail grid, with a
    bounded drift between the innermost and outermost decade.  This is a
    numerical surrogate, not a proof.
    """
    if decades <= 0 or per_decade <= 0:
        raise ValueError("empty sample grid")
    report = {"N": N, "q": q, "conditions": []}
    for cond in (cls.origin, cls.infinity):
        if cond is not None:
            report["conditions"].append(_check_condition(V, K, cond, N, q, decades, per_decade))
    report["pass"] = all(c["pass"] for c in report["conditions"])
    return report


# ---------------------------------------------------------------------------
# Kelvin transform
# ---------------------------------------------------------------------------
def kelvin_weight_K(p: float, N: int) -> float:
    return N + 2 - p * (N - 2)


@dataclass(frozen=True)
class KelvinPair:
    v_hat: RadialPotential
    k_hat: RadialPotential
    p: float
    N: int

    def inverse(self) -> "KelvinPair":
        return kelvin_transform_potentials(self.v_hat, self.k_hat, self.p, self.N)

    def to_spec(self) -> dict:
        return {"V": self.v_hat.to_spec(), "K": self.k_hat.to_spec(), "p": self.p, "N": self.N}


def kelvin_transform_potentials(V: RadialPotential, K: RadialPotential, p: float,
                                N: int) -> KelvinPair:
    if N < 3:
        raise ValueError("Kelvin transform needs N >= 3")
    return KelvinPair(V.kelvin(4.0), K.kelvin(kelvin_weight_K(p, N)), p, N)


def mirror_growth_class(cls: GrowthClass, p: float, N: int) -> GrowthClass:
    """Growth class of the Kelvin-transformed pair.

    A K-exponent tau at the origin becomes sigma = -(N + 2 - p(N-2)) - tau at
    infinity, and a V-rate gamma becomes alpha = 4 - gamma (and conversely).
    """
    w = kelvin_weight_K(p, N)

    def flip(c: GrowthCondition | None) -> GrowthCondition | None:
        if c is None:
            return None
        end = "infinity" if c.end == "origin" else "origin"
        exponent = c.exponent if c.index == 3 else -w - c.exponent
        rate = None if c.rate is None else 4.0 - c.rate
        return GrowthCondition(end, c.index, exponent, rate)

    return GrowthClass(origin=flip(cls.infinity), infinity=flip(cls.origin))


def kelvin_transform_field(r, u, N: int):
    """Kelvin transform of a radial profile sampled at radii ``r``.

    Returns ``(rho, u_hat)`` on the image grid ``rho = 1/r`` sorted ascending,
    with ``u_hat(rho) = rho**(2 - N) * u(1/rho)``.
    """
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(r <= 0):
        raise ValueError("Kelvin transform of a field needs a grid avoiding r = 0")
    rho = 1.0 / r[::-1]
    return rho, r[::-1] ** (N - 2) * u[::-1]
