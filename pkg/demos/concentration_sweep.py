"""Concentration on a circle of the standard problem as eps shrinks.

N = 3, k = 2, p = 3, V = 0.1 + (r - 2)^2, K = 1, Lambda = (1.2, 2.8).

    python3 demos/concentration_sweep.py
"""
import numpy as np

from semiclassical import (
    AnnulusLambda,
    AuxPotential,
    Nonlinearity,
    RadialPotential,
    SweepConfig,
    concentration_check,
    energy_scaling_check,
    find_min,
    run_sweep,
)

f = Nonlinearity.power(3)
V = RadialPotential.shifted_polynomial(0.1, 2.0)
K = RadialPotential.constant(1.0)
lam = AnnulusLambda(1.2, 2.8)
aux = AuxPotential(3, 2, f, V, K)
r_star, inf_m = find_min(aux, lam)
print(f"predicted radius r* = {r_star:.8f}, inf M = {inf_m:.10f}")

reports = run_sweep(SweepConfig((0.2, 0.1, 0.05, 0.02), 3, f, V, K, lam))
print("\n eps    r_eps      |r_eps - r*|  c_eps/(eps 4 pi inf M)  lambda_fit  certified")
for rep in reports:
    ratio = rep.scaled_energy / (4 * np.pi * inf_m)
    print(f" {rep.eps:<5}  {rep.r_eps:.6f}   {abs(rep.r_eps - r_star):.3e}     "
          f"{ratio:.4f}                  {rep.lambda_fit:.3f}       {rep.certified}")

conc = concentration_check(reports, aux, lam)
energy = energy_scaling_check(reports, aux, 2, lam)
print(f"\nconcentration verdict: {conc['verdict']}; energy ratio verdict: {energy['verdict']}"
      f" (trending to 1: {energy['trending']})")

# in the stretched variable (r - r_eps) / eps the profile tends to the soliton
# sqrt(2 a) sech(sqrt(a) t) with a = V(r*)
a = float(V(r_star))
print(f"\nlimit soliton: peak {np.sqrt(2 * a):.4f}, half-max width / eps {2 * np.arccosh(2) / np.sqrt(a):.3f}")
for rep in reports:
    u, r = rep.solution.u, rep.solution.r
    above = r[u > 0.5 * u.max()]
    print(f" eps {rep.eps:<5} peak {rep.peak:.4f}  half-max width / eps {(above[-1] - above[0]) / rep.eps:.3f}")
