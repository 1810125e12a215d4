import numpy as np
import pytest

from semiclassical.auxiliary import (
    AdmissibilityError,
    AnnulusLambda,
    AuxPotential,
    aux_closed_form,
    aux_general,
    find_min,
    max_neighbor_jump,
    validate_lambda,
)
from semiclassical.nonlinearity import Nonlinearity
from semiclassical.potentials import RadialPotential as R

CUBIC = Nonlinearity.power(3)
V_STD = R.shifted_polynomial(0.1, 2.0)
ONE = R.constant(1.0)
# d/dr [r^2 (0.1 + (r-2)^2)^(3/2)] = 0  <=>  5 r^2 - 14 r + 8.2 = 0
R_STAR = (14 + np.sqrt(32)) / 10


def test_closed_form_examples():
    r = np.linspace(0.5, 3, 6)
    np.testing.assert_allclose(aux_closed_form(r, 3, 2, 3, ONE, ONE), 4 / 3 * r ** 2, rtol=1e-6)
    m = aux_closed_form(r, 3, 2, 3, V_STD, ONE)
    np.testing.assert_allclose(m / (r ** 2 * V_STD(r) ** 1.5), 4 / 3, rtol=1e-6)
    Kz = R.shifted_polynomial(0.0, 2.0)
    assert aux_closed_form(2.0, 3, 2, 3, V_STD, Kz) == np.inf
    with pytest.raises(ValueError):
        aux_closed_form(2.0, 3, 2, 3, R.shifted_polynomial(0.0, 2.0), ONE)


def test_general_matches_closed_form_other_d():
    r = np.array([0.7, 1.3, 2.2])
    for N, k in ((3, 1), (4, 1)):
        g = aux_general(r, N, k, CUBIC, V_STD, ONE)
        c = aux_closed_form(r, N, k, 3, V_STD, ONE)
        np.testing.assert_allclose(g, c, rtol=1e-6)


def test_general_nonpower():
    f = Nonlinearity.sum_of_powers([1.0, 0.3], [3.0, 4.0])
    aux = AuxPotential(3, 2, f, V_STD, ONE)
    assert aux.mode == "general"
    with pytest.raises(ValueError):
        AuxPotential(3, 2, f, V_STD, ONE, mode="closed-form")
    r = np.array([1.5, 2.0, 2.5])
    m = aux(r)
    assert np.all(m > 0) and m[1] < m[0] and m[1] < m[2]


def test_find_min_oracle():
    lam = AnnulusLambda(1.2, 2.8)
    aux = AuxPotential(3, 2, CUBIC, V_STD, ONE)
    res = find_min(aux, lam)
    # brute-force dense grid
    r = np.linspace(1.2, 2.8, 1_000_001)
    dense = r[np.argmin(aux(r))]
    assert abs(res.r_star - dense) < 1e-6
    assert abs(res.r_star - R_STAR) < 1e-7
    assert not res.boundary
    scaled = find_min(aux.scaled(0.25), lam)
    assert abs(scaled.r_star - res.r_star) < 1e-7


def test_find_min_boundary_flag():
    aux = AuxPotential(3, 2, CUBIC, ONE, ONE)       # M = 4/3 r^2 is monotone
    with pytest.raises(AdmissibilityError) as exc:
        find_min(aux, AnnulusLambda(1.0, 2.0))
    assert exc.value.result.boundary
    assert find_min(aux, AnnulusLambda(1.0, 2.0), strict=False).r_star == 1.0


def test_find_min_ties_toward_smaller_radius():
    flat = lambda r: np.where(np.abs(np.asarray(r) - 2.0) < 0.3, 1.0, 2.0)
    res = find_min(flat, AnnulusLambda(1.0, 3.0), resolution=101)
    assert res.ties > 0 and res.r_star < 2.0


def test_validate_lambda_examples():
    aux = AuxPotential(3, 2, CUBIC, V_STD, ONE)
    rep = validate_lambda(aux, AnnulusLambda(1.2, 2.8))
    assert rep["pass"]
    assert all(c["margin"] > 0 for c in rep["checks"].values())
    assert validate_lambda(aux, AnnulusLambda(1.9, 2.1))["pass"]
    bad = AuxPotential(3, 2, CUBIC, R.shifted_polynomial(0.0, 2.0), ONE)
    rep = validate_lambda(bad, AnnulusLambda(1.2, 2.8))
    assert not rep["pass"] and not rep["checks"]["V > 0 on closure"]["pass"]


def test_validate_lambda_codim_two():
    aux = AuxPotential(3, 1, CUBIC, V_STD, ONE)
    rep = validate_lambda(aux, AnnulusLambda(1.5, 2.5))
    assert "factor two (k = N - 2)" in rep["checks"]


def test_annulus():
    lam = AnnulusLambda(1.2, 2.8)
    assert lam.center == 2.0 and lam.half_width == pytest.approx(0.8)
    assert lam.distance_to_boundary(1.5) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        AnnulusLambda(2.0, 1.0)


def test_neighbor_jump_decreases_with_resolution():
    aux = AuxPotential(3, 2, CUBIC, V_STD, ONE)
    lam = AnnulusLambda(1.2, 2.8)
    assert max_neighbor_jump(aux, lam, 4001) < max_neighbor_jump(aux, lam, 1001)
