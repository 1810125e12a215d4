"""Kelvin duality at potential and field level.

The inversion x -> x / |x|^2 maps a solution of -eps^2 Lap u + V u = K u^p to
one of the transformed problem with V_hat = rho^-4 V(1/rho) and
K_hat = rho^(p(N-2) - N - 2) K(1/rho).

    python3 demos/kelvin_duality.py
"""
from semiclassical import (
    G0_1,
    AnnulusLambda,
    AuxPotential,
    Ginf_3,
    GrowthClass,
    Nonlinearity,
    PenalizedProblem,
    RadialGrid,
    RadialPotential,
    find_min,
    kelvin_transform_potentials,
    mirror_growth_class,
    solve,
)
from semiclassical.penalized import kelvin_residual

f = Nonlinearity.power(3)
V = RadialPotential.shifted_polynomial(0.1, 2.0)
K = RadialPotential.constant(1.0)
lam = AnnulusLambda(1.2, 2.8)

pair = kelvin_transform_potentials(V, K, 3.0, 3)
print("transformed V:", pair.v_hat.to_spec())
print("transformed K:", pair.k_hat.to_spec())
back = pair.inverse()
print("involution exact:", back.v_hat == V and back.k_hat == K)

cls = GrowthClass(G0_1(0.0), Ginf_3(1.0, 1.0))
print("growth class", cls, "\nmirrors to", mirror_growth_class(cls, 3.0, 3))

# field level: both frames carry the same O(h^2) discretization error of u
r_star = find_min(AuxPotential(3, 2, f, V, K), lam).r_star
print("\n  n      5-point ratio  3-point ratio  5-point image residual")
for n in (2048, 4096, 8192):
    P = PenalizedProblem.build(3, 0.05, f, V, K, lam, grid=RadialGrid(0.02, 6.0, n))
    sol = solve(P, r0=r_star)
    k4, k2 = kelvin_residual(P, sol), kelvin_residual(P, sol, order=2)
    print(f"  {n:<6} {k4['ratio']:.3f}          {k2['ratio']:.2f}          {k4['image']:.3e}")
