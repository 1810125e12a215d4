import numpy as np
import pytest

from semiclassical.barriers import (
    DecayEnvelope,
    DomainError,
    EnvelopeConfigError,
    PeakBarrier,
    barrier_comparison,
    d_H,
    envelope_eval,
    envelope_from_growth,
    fit_lambda,
    peak_barrier_check,
    peak_barrier_eval,
    power_tail_slope,
    solve_outer_barrier,
)
from semiclassical.nonlinearity import PenalizationParams, quadratic_form_positivity
from semiclassical.penalized import PenalizedProblem, RadialGrid
from semiclassical.potentials import G0_2, G0_3, GrowthClass, Ginf_2, Ginf_3, RadialPotential as R


def test_d_H():
    assert d_H(2, 2) == 0
    assert d_H(1, 3) == 2


def test_peak_barrier_values():
    b = PeakBarrier(2.0, 0.3, 0.2, 0.05, 0.1)
    assert peak_barrier_eval(b, 2.0) == pytest.approx(np.cosh(0.2 * 0.3 / 0.05))
    assert peak_barrier_eval(b, 2.3) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        PeakBarrier(2.0, 0.3, 0.3, 0.05, 0.1)


def test_peak_barrier_supersolution(standard, r_star):
    lam = standard["lam"]
    R_ball = 0.5 * float(lam.distance_to_boundary(r_star))
    v_floor = 0.1
    b = PeakBarrier(r_star, R_ball, 0.9 * np.sqrt(0.5 * v_floor), 0.02, v_floor)
    chk = peak_barrier_check(b, standard["V"], 0.5, RadialGrid(0.02, 6.0, 8192), 3, lam)
    assert chk["ok"] and chk["min_margin"] >= 0


def _outer(V, eps, **kw):
    from semiclassical.auxiliary import AnnulusLambda
    from semiclassical.nonlinearity import Nonlinearity
    P = PenalizedProblem.build(3, eps, Nonlinearity.power(3), V, R.constant(1.0),
                               AnnulusLambda(1.2, 2.8), **kw)
    return P, solve_outer_barrier(P)


def test_outer_constant_V_rate():
    # constant coefficients: Psi ~ exp(-sqrt((1 - mu) V) dist / eps)
    for Vc in (25.0, 100.0):
        _, ob = _outer(R.constant(Vc), 0.02)
        fl = fit_lambda(ob, v_floor=Vc)
        assert fl["lambda_fit"] == pytest.approx(np.sqrt(0.5 * Vc), rel=0.01)
        assert ob.checks["ok"]


def test_outer_maximum_principle():
    _, ob = _outer(R.constant(1.0), 0.05, params=PenalizationParams(3, 1e-12))
    for psi in (ob.psi_in, ob.psi_out):
        assert np.all(psi >= 0) and np.all(psi <= 1)


def test_outer_power_tail():
    eps = 0.5
    P, ob = _outer(R.power(1.0, -2.0), eps, grid=RadialGrid(0.02, 200.0, 20000))
    slope = power_tail_slope(ob, (10, 50))
    kappa = P.pen.params.kappa
    bound = -0.5 - np.sqrt(0.25 - kappa + 0.5 / eps ** 2)
    assert slope <= bound + 0.01


def test_outer_barrier_values():
    P, ob = _outer(R.shifted_polynomial(0.1, 2.0), 0.05)
    assert ob(2.0) == 1.0
    r = np.array([0.5, 1.0, 3.0, 4.0])
    v = ob(r)
    assert np.all((v > 0) & (v < 1))


def test_exterior_operator_positive():
    r = RadialGrid(0.02, 6.0, 4096).nodes
    V = R.shifted_polynomial(0.1, 2.0)
    for frac in (0.1, 0.5, 0.9):
        params = PenalizationParams(3, frac * 0.25)
        res = quadratic_form_positivity(params, r, V=lambda x: 0.5 * V(x), eps=0.05)
        assert res.eigenvalue >= -1e-8


def test_envelope_on_sphere():
    env = DecayEnvelope(2.0, 0.7, 0.05, 3)
    assert envelope_eval(env, 2.0, 2.0) == pytest.approx(2.0 / 5.0 ** 0.5)


def test_envelope_regimes():
    r = np.linspace(0.1, 8, 200)
    base = envelope_eval(DecayEnvelope(1.0, 0.7, 0.1, 3), r, 2.0)
    quad = envelope_eval(DecayEnvelope(1.0, 0.7, 0.1, 3, ("base", "quadratic-infinity"), nu=0.3), r, 2.0)
    assert np.all(quad < base)
    so = DecayEnvelope(1.0, 0.7, 0.1, 3, ("base", "stretched-origin"), gamma=3.0)
    near = np.array([2.0 - 1e-9, 2.0 + 1e-9])
    np.testing.assert_allclose(envelope_eval(so, near, 2.0),
                               envelope_eval(DecayEnvelope(1.0, 0.7, 0.1, 3), near, 2.0), rtol=1e-7)


def test_envelope_monotone_in_distance():
    env = DecayEnvelope(1.0, 0.5, 0.1, 3, ("base", "stretched-infinity"), alpha=1.0)
    # fixed |x|: compare peaks at increasing distance
    vals = [envelope_eval(env, 4.0, rp) for rp in (4.0, 3.5, 3.0, 2.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_envelope_config_errors():
    with pytest.raises(EnvelopeConfigError):
        DecayEnvelope(1.0, 0.5, 0.1, 3, ("base", "quadratic-infinity"))
    with pytest.raises(EnvelopeConfigError):
        DecayEnvelope(1.0, 0.5, 0.1, 3, ("stretched-infinity",), alpha=3.0)
    env = DecayEnvelope(1.0, 0.5, 0.1, 3, ("base", "quadratic-infinity"), nu=0.2)
    with pytest.raises(EnvelopeConfigError):
        env.check_growth(GrowthClass(infinity=Ginf_3(1.0, 0.0)))
    env.check_growth(GrowthClass(infinity=Ginf_2(0.0)))
    e2 = envelope_from_growth(GrowthClass(G0_3(3.0, 0.0), Ginf_2(0.0)), 1.0, 0.5, 0.1, 3, nu=0.2)
    assert set(e2.regimes) == {"base", "quadratic-infinity", "stretched-origin"}
    e3 = envelope_from_growth(GrowthClass(G0_2(0.0)), 1.0, 0.5, 0.1, 3, nu=0.2)
    assert "quadratic-origin" in e3.regimes


def test_vacuous_envelope():
    env = DecayEnvelope(1.0, 0.0, 0.1, 3)
    assert env.vacuous
    r = np.linspace(0.1, 5, 20)
    np.testing.assert_allclose(envelope_eval(env, r, 2.0), (1 + r ** 2) ** -0.5)


def test_comparison_on_certified_solves(sweep_reports, standard, r_star):
    lam = standard["lam"]
    R_ball = 0.5 * float(lam.distance_to_boundary(r_star))
    for rep in sweep_reports:
        if rep.eps > 0.05:
            continue
        sol = rep.solution
        P = sol.problem
        ob = solve_outer_barrier(P)
        lam_w = min(rep.decay["lambda_fit"], 0.9 * rep.decay["lambda_max"])
        cmp = barrier_comparison(P, sol, ob, rep.r_eps, lam_w, R_ball)
        assert cmp["applicable"] and cmp["holds_exterior"]
