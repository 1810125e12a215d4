"""Limit ground states: soliton check and the scaling of E(a, b) in d = 1, 2, 3.

    python3 demos/limit_profiles.py
"""
import numpy as np

from semiclassical import LimitProblem, Nonlinearity, ground_energy, solve_limit

cubic = Nonlinearity.power(3)

gs = solve_limit(LimitProblem(1, 1.0, 1.0, cubic))
sel = gs.rho <= 20
err = np.max(np.abs(gs.w[sel] - np.sqrt(2) / np.cosh(gs.rho[sel])))
print(f"d=1 soliton: w(0) = {gs.w0:.10f}, sup |w - sqrt(2) sech| = {err:.2e}, E = {gs.energy:.10f}")

print("\n d   E(1,1)        E(2,3)/E(1,1)  power law")
for d in (1, 2, 3):
    E11 = ground_energy(1.0, 1.0, cubic, d)
    E23 = ground_energy(2.0, 3.0, cubic, d)
    law = 2.0 ** (2 - d / 2) * 3.0 ** -1.0
    print(f" {d}   {E11:.8f}   {E23 / E11:.8f}     {law:.8f}")

# strict monotonicity: heavier mass costs energy, stronger attraction saves it
a = np.linspace(0.5, 2.5, 5)
E = np.array([[ground_energy(ai, bj, cubic, 3) for bj in a] for ai in a])
print("\nd=3 E(a, b) on a 5x5 grid (rows a, columns b):")
print(np.array2string(E, precision=4))
print("increasing in a:", bool(np.all(np.diff(E, axis=0) > 0)),
      " decreasing in b:", bool(np.all(np.diff(E, axis=1) < 0)))
