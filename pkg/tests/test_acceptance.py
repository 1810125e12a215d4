"""Acceptance suite: one check per criterion, each returning ``(ok, detail)``.

Run under pytest (one pass/fail line per criterion in the terminal summary) or
standalone with ``python3 tests/test_acceptance.py``.
"""
import functools
import time

import numpy as np
import pytest
from scipy.integrate import quad

from semiclassical import (
    AnnulusLambda,
    AuxPotential,
    G0_1,
    Ginf_2,
    Ginf_3,
    GrowthClass,
    LimitProblem,
    Nonlinearity,
    PenalizationParams,
    PenalizedProblem,
    RadialGrid,
    RadialPotential as R,
    SweepConfig,
    ground_energy,
    kelvin_transform_potentials,
    mirror_growth_class,
    quadratic_form_positivity,
    run_sweep,
    solve_limit,
    validate_growth,
)
from semiclassical.auxiliary import aux_closed_form, aux_general
from semiclassical.barriers import fit_lambda, solve_outer_barrier
from semiclassical.limit import check_energy_monotonicity, discrete_energy, discrete_gradient
from semiclassical.penalized import kelvin_residual

CUBIC = Nonlinearity.power(3)
EPS = (0.2, 0.1, 0.05, 0.02)
V_STD = R.shifted_polynomial(0.1, 2.0)
K_STD = R.constant(1.0)
LAM = AnnulusLambda(1.2, 2.8)
AUX = AuxPotential(3, 2, CUBIC, V_STD, K_STD)


@functools.lru_cache(maxsize=None)
def sweep():
    t0 = time.perf_counter()
    reports = run_sweep(SweepConfig(EPS, 3, CUBIC, V_STD, K_STD, LAM))
    return reports, time.perf_counter() - t0


@functools.lru_cache(maxsize=None)
def dense_argmin():
    r = np.linspace(LAM.r_lo, LAM.r_hi, 1_000_000)
    m = aux_closed_form(r, 3, 2, 3.0, V_STD, K_STD)
    i = int(np.argmin(m))
    return float(r[i]), float(m[i])


def _rel(x, y):
    return abs(x - y) / abs(y)


def crit_soliton():
    t0 = time.perf_counter()
    gs = solve_limit(LimitProblem(1, 1.0, 1.0, CUBIC), n=4096)
    dt = time.perf_counter() - t0
    sel = gs.rho <= 20
    err = float(np.max(np.abs(gs.w[sel] - np.sqrt(2) / np.cosh(gs.rho[sel]))))
    return err < 1e-6 and dt < 1.0, f"sup error {err:.2e} on [0, 20], n={gs.rho.size}, {dt:.3f} s"


def crit_energy_value():
    def density(x):
        w = np.sqrt(2) * np.exp(-abs(x)) * 2 / (1 + np.exp(-2 * abs(x)))
        dw = -w * np.tanh(x)
        return 0.5 * dw ** 2 + 0.5 * w ** 2 - 0.25 * w ** 4

    oracle = quad(density, -np.inf, np.inf, epsabs=1e-14, epsrel=1e-13)[0]
    E = ground_energy(1.0, 1.0, CUBIC, 1)
    gap = _rel(E, oracle)
    return gap < 1e-5 and _rel(oracle, 4 / 3) < 1e-10, \
        f"E(1,1) = {E:.10f}, integral oracle {oracle:.10f}, rel gap {gap:.1e}"


def crit_scaling():
    grid = (0.5, 1.0, 2.0)
    worst = {"iv": 0.0, "v": 0.0}
    for d in (1, 3):
        E11 = ground_energy(1.0, 1.0, CUBIC, d)
        ea, eb = 2 / (3 - 1) + 1 - d / 2, -2 / (3 - 1)
        for a in grid:
            for b in grid:
                Eab = ground_energy(a, b, CUBIC, d)
                worst["v"] = max(worst["v"], _rel(Eab, E11 * a ** ea * b ** eb))
                for lam in (0.5, 2.0, 5.0):
                    El = ground_energy(lam * a, lam * b, CUBIC, d)
                    worst["iv"] = max(worst["iv"], _rel(El, lam ** (1 - d / 2) * Eab))
    ok = max(worst.values()) < 1e-4
    return ok, f"max rel error scaling {worst['iv']:.1e}, power law {worst['v']:.1e} (d = 1, 3)"


def crit_monotonicity():
    a = np.linspace(0.5, 2.5, 5)
    b = np.linspace(0.5, 2.5, 5)
    nviol = {}
    for d in (1, 2, 3):
        nviol[d] = len(check_energy_monotonicity(CUBIC, d, a, b)["violations"])
    return sum(nviol.values()) == 0, "violations per d: " + \
        ", ".join(f"d={d}: {n}" for d, n in nviol.items())


def crit_aux_consistency():
    r = np.linspace(1.3, 2.7, 10)
    gap = np.abs(aux_general(r, 3, 2, CUBIC, V_STD, K_STD) / aux_closed_form(r, 3, 2, 3.0, V_STD, K_STD) - 1)
    return float(gap.max()) < 1e-3, f"max rel gap {gap.max():.1e} at 10 radii"


def crit_concentration():
    reports, runtime = sweep()
    r_star, _ = dense_argmin()
    gaps = [abs(r.r_eps - r_star) for r in reports]
    ok = (all(r.ok for r in reports) and all(b < a for a, b in zip(gaps, gaps[1:]))
          and gaps[-1] < 0.05 and runtime < 120)
    return ok, ("|r_eps - r*| = " + ", ".join(f"{g:.2e}" for g in gaps)
                + f" (r* = {r_star:.6f}), sweep {runtime:.1f} s")


def crit_energy_asymptotics():
    reports, _ = sweep()
    _, inf_m = dense_argmin()
    rep = reports[-1]
    ratio = rep.scaled_energy / (4 * np.pi * inf_m)
    return 0.9 <= ratio <= 1.15, f"ratio {ratio:.4f} at eps = {rep.eps}"


def crit_certification():
    reports, _ = sweep()
    small = [r for r in reports if r.eps <= 0.05]
    ok = bool(small) and all(r.certified for r in small)
    return ok, ", ".join(f"eps={r.eps}: {r.certified} (margin {r.margin:.2e})" for r in small)


def crit_decay():
    reports, _ = sweep()
    lams = [r.lambda_fit for r in reports]
    positive = all(x > 0 for x in lams)
    drift = abs(lams[-1] - lams[-2]) / lams[-2]
    envelope = all(r.decay["envelope_holds"] for r in reports)
    P = PenalizedProblem.build(3, 0.02, CUBIC, R.constant(1.0), K_STD, LAM)
    lam_c = fit_lambda(solve_outer_barrier(P))["lambda_fit"]
    const_gap = _rel(lam_c, np.sqrt((1 - P.pen.params.mu) * 1.0))
    ok = positive and drift < 0.2 and envelope and const_gap < 0.1
    return ok, (f"lambda_fit {', '.join(f'{x:.3f}' for x in lams)}; drift {drift:.1%}; "
                f"envelope holds {envelope}; constant V gap {const_gap:.1%}")


def crit_positivity():
    r = RadialGrid.default_for(LAM).nodes
    cases = [PenalizationParams(3, 0.9 * ((3 - 2) / 2) ** 2), PenalizationParams(2)]
    eig = [quadratic_form_positivity(p, r).eigenvalue for p in cases]
    return min(eig) >= -1e-8, f"smallest eigenvalue N=3 {eig[0]:.6f}, N=2 {eig[1]:.6f}"


def _mirror_pairs():
    return [
        (R.constant(1.0), R.constant(1.0), GrowthClass(G0_1(0.0), Ginf_2(0.0))),
        (V_STD, R.constant(1.0), GrowthClass(G0_1(0.0), Ginf_3(1.0, 1.0))),
        (R.power(1.0, -1.0), R.power(1.0, -1.0), GrowthClass(G0_1(-1.0), Ginf_2(-1.0))),
    ]


def crit_kelvin():
    inv = True
    for V, K in ((V_STD, K_STD), (R.power(2.0, -1.5), R("exponential", (1.0, 0.1))),
                 (R("gaussian-bump", (1.0, 2.0, 1.0, 0.5)), R.power(1.0, 1.0))):
        back = kelvin_transform_potentials(V, K, 3.0, 3).inverse()
        inv &= back.v_hat == V and back.k_hat == K
    reports, _ = sweep()
    ratios, three_point = [], []
    for rep in reports:
        if rep.eps in (0.05, 0.02):
            sol = rep.solution
            ratios.append(kelvin_residual(sol.problem, sol)["ratio"])
            three_point.append(kelvin_residual(sol.problem, sol, order=2)["ratio"])
    mirrors = []
    for V, K, cls in _mirror_pairs():
        pair = kelvin_transform_potentials(V, K, 3.0, 3)
        src = validate_growth(V, K, cls, 3, CUBIC.q)["pass"]
        img = validate_growth(pair.v_hat, pair.k_hat, mirror_growth_class(cls, 3.0, 3), 3,
                              CUBIC.q)["pass"]
        mirrors.append(bool(src and img))
    ok = inv and all(x < 10 for x in ratios) and all(mirrors)
    return ok, (f"involution exact {inv}; field residual ratio "
                + ", ".join(f"{x:.2f}" for x in ratios) + " (eps 0.05, 0.02; three-point "
                + ", ".join(f"{x:.2f}" for x in three_point) + f"); mirror {mirrors}")


def _fd_worst(energy, gradient, u, rng, ndir=20):
    g = gradient(u)
    worst = 0.0
    for _ in range(ndir):
        d = rng.standard_normal(u.size)
        h = 1e-6 * np.linalg.norm(u) / np.linalg.norm(d)
        fd = (energy(u + h * d) - energy(u - h * d)) / (2 * h)
        worst = max(worst, abs(fd - g @ d) / max(abs(fd), abs(g @ d)))
    return worst


def crit_gradients():
    rng = np.random.default_rng(20260101)
    rho = np.linspace(0, 20, 2048)
    lp = LimitProblem(1, 1.3, 0.7, CUBIC)
    w = 1.5 / np.cosh(rho) + 0.05 * rng.random(rho.size)
    w[-1] = 0.0

    def i_energy(v):
        return discrete_energy(lp, rho, np.append(v, 0.0))

    def i_grad(v):
        return discrete_gradient(lp, rho, np.append(v, 0.0))

    e_lim = _fd_worst(i_energy, i_grad, w[:-1], rng)
    P = PenalizedProblem.build(3, 0.05, CUBIC, V_STD, K_STD, LAM, grid=RadialGrid(0.02, 6.0, 1024))
    u = 0.8 * np.exp(-((P.ri - 2.0) / 0.1) ** 2) + 0.05 * rng.random(P.ri.size)
    e_pen = _fd_worst(P.energy, P.gradient, u, rng)
    return max(e_lim, e_pen) < 1e-6, f"worst rel FD gap I_ab {e_lim:.1e}, J_eps {e_pen:.1e}"


CRITERIA = [
    (1, "soliton oracle", crit_soliton),
    (2, "ground-energy value", crit_energy_value),
    (3, "scaling laws", crit_scaling),
    (4, "monotonicity", crit_monotonicity),
    (5, "auxiliary-potential consistency", crit_aux_consistency),
    (6, "concentration", crit_concentration),
    (7, "energy asymptotics", crit_energy_asymptotics),
    (8, "certification", crit_certification),
    (9, "decay", crit_decay),
    (10, "positivity", crit_positivity),
    (11, "Kelvin duality", crit_kelvin),
    (12, "gradient correctness", crit_gradients),
]


def line(num, name, ok, detail):
    return f"criterion {num:02d} [{name}]: {'PASS' if ok else 'FAIL'} ({detail})"


@pytest.mark.parametrize("num,name,fn", CRITERIA, ids=[f"c{n:02d}" for n, _, _ in CRITERIA])
def test_criterion(num, name, fn, record_property):
    ok, detail = fn()
    record_property("acceptance", line(num, name, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    results = [(n, name, *fn()) for n, name, fn in CRITERIA]
    for r in results:
        print(line(*r))
    raise SystemExit(0 if all(r[2] for r in results) else 1)
