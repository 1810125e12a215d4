import numpy as np
import pytest

from semiclassical.asymptotics import (
    ConcentrationReport,
    SweepConfig,
    concentration_check,
    decay_fit,
    energy_scaling_check,
    peak_extract,
    peak_persistence,
    run_sweep,
)
from semiclassical.barriers import fit_lambda, solve_outer_barrier
from semiclassical.penalized import DegenerateSolutionError, PenalizedProblem
from semiclassical.potentials import RadialPotential as R


def test_sweep_config_validation(standard):
    s = standard
    args = (s["N"], s["f"], s["V"], s["K"], s["lam"])
    with pytest.raises(ValueError):
        SweepConfig((), *args)
    with pytest.raises(ValueError):
        SweepConfig((0.1, 0.2), *args)
    with pytest.raises(ValueError):
        SweepConfig((0.1, -0.05), *args)
    cfg = SweepConfig.geometric(0.2, 3, N=3, f=s["f"], V=s["V"], K=s["K"], lam=s["lam"])
    assert cfg.eps_list == (0.2, 0.1, 0.05)


def test_five_eps_sweep(standard):
    s = standard
    cfg = SweepConfig.geometric(0.2, 5, N=3, f=s["f"], V=s["V"], K=s["K"], lam=s["lam"])
    reps = run_sweep(cfg, keep_solutions=False)
    assert len(reps) == 5
    assert all(r.ok for r in reps)
    assert all(r.certified for r in reps if r.eps <= 0.05)
    assert all(r.solution is None for r in reps)


def test_peak_extract_synthetic():
    r = np.linspace(0, 4, 401)
    h = r[1] - r[0]
    pk = peak_extract((r, np.exp(-((r - 2.0) / 0.3) ** 2)))
    assert pk.r == pytest.approx(2.0, abs=1e-12) and not pk.at_boundary
    c = 2.0 + 0.37 * h
    pk = peak_extract((r, np.exp(-((r - c) / 0.3) ** 2)))
    assert abs(pk.r - c) < h ** 2
    assert peak_extract((r, np.exp(-r))).at_boundary
    with pytest.raises(DegenerateSolutionError):
        peak_extract((r, np.zeros_like(r)))


def test_concentration_standard(sweep_reports, standard):
    chk = concentration_check(sweep_reports, standard["aux"], standard["lam"])
    assert chk["pass"], chk
    assert chk["m_gap"][-1] < 0.02


def test_concentration_detectors(standard, sweep_reports):
    aux, lam = standard["aux"], standard["lam"]
    assert concentration_check(sweep_reports[:1], aux, lam)["verdict"] == "insufficient data"
    spur = []
    for eps, r in ((0.2, 1.3), (0.1, 1.26), (0.05, 1.24)):
        rep = ConcentrationReport(eps=eps, r_eps=r, m_at_peak=float(aux(r)))
        spur.append(rep)
    chk = concentration_check(spur, aux, lam)
    assert chk["verdict"] == "fail"
    assert not chk["checks"]["away_from_boundary"]


def test_energy_scaling(sweep_reports, standard):
    chk = energy_scaling_check(sweep_reports, standard["aux"], 2, standard["lam"])
    assert chk["pass"] and chk["trending"] and not chk["convention_suspect"]
    assert chk["omega_k"] == pytest.approx(4 * np.pi)
    # a doubled surface-measure convention lands near 2
    doubled = [ConcentrationReport(eps=r.eps, scaled_energy=2 * r.scaled_energy)
               for r in sweep_reports]
    chk2 = energy_scaling_check(doubled, standard["aux"], 2, standard["lam"])
    assert not chk2["pass"] and chk2["convention_suspect"]


def test_decay_fit_standard(sweep_reports):
    lams = [r.lambda_fit for r in sweep_reports]
    assert all(x > 0 for x in lams)
    assert abs(lams[-1] - lams[-2]) / lams[-2] < 0.2
    assert all(r.decay["envelope_holds"] for r in sweep_reports)
    for r in sweep_reports:
        d = r.decay
        assert d["corollary_applies"]
        assert np.isfinite(d["l2_norm"]) and d["l2_tail_bound"] < 0.05 * d["l2_grid"]


def test_decay_fit_constant_V(standard):
    # constant V: the boundary-layer rate is sqrt((1 - mu) V)
    for eps in (0.05, 0.02):
        P = PenalizedProblem.build(3, eps, standard["f"], R.constant(1.0), standard["K"],
                                   standard["lam"])
        fl = fit_lambda(solve_outer_barrier(P))
        assert fl["lambda_fit"] == pytest.approx(np.sqrt(0.5), rel=0.1)


def test_decay_fit_no_quadratic_control(standard, solved_005):
    # V with exponential decay at infinity: the corollary gives no L2 bound for the tail
    P0, sol0 = solved_005
    Vexp = R.product(standard["V"], R("exponential", (1.0, 0.01)))
    P = PenalizedProblem.build(3, 0.05, standard["f"], Vexp, standard["K"], standard["lam"])
    sol = type(sol0)(P, sol0.u, sol0.j_eps, sol0.grad_norm, sol0.norm_eps, 0, True)
    d = decay_fit(sol, peak_extract(sol))
    assert not d["corollary_applies"] and d["l2_norm"] == np.inf


def test_localization_shrinks(sweep_reports):
    for key in ("0.01", "0.001"):
        radii = [r.localization[key]["radius"] for r in sweep_reports]
        assert all(b < a for a, b in zip(radii, radii[1:]))


def test_peak_persistence(sweep_reports):
    pp = peak_persistence(sweep_reports)
    assert pp["pass"] and pp["delta"] > 0.4


def test_cold_start_matches_warm(sweep_cfg, sweep_reports):
    from dataclasses import replace
    cold = run_sweep(replace(sweep_cfg, eps_list=(0.1, 0.05), warm_start=False, threads=2))
    warm = {r.eps: r for r in sweep_reports}
    for rep in cold:
        assert rep.r_eps == pytest.approx(warm[rep.eps].r_eps, abs=1e-6)
        assert rep.scaled_energy == pytest.approx(warm[rep.eps].scaled_energy, rel=1e-8)


def test_reports_serialize(sweep_reports):
    d = sweep_reports[0].to_dict()
    assert "solution" not in d and d["eps"] == 0.2
