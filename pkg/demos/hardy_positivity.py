"""Positivity of the penalized quadratic form -Lap - H on the working grid.

For N = 3 the weight kappa / (r^2 ((log r)^2 + 1)) stays below the Hardy
weight r^-2 / 4, so every admissible kappa < 1/4 is safe; in N = 2 Hardy
gives nothing and the logarithm does all the work, so large kappa fails.

    python3 demos/hardy_positivity.py
"""
import numpy as np

from semiclassical import PenalizationParams, RadialGrid, quadratic_form_positivity

r = RadialGrid(0.02, 6.0, 8192).nodes
for N, kappas in ((3, (0.05, 0.125, 0.2, 0.225, 0.249)), (2, (0.1, 0.5, 1.0, 2.0))):
    print(f"N = {N}")
    for kappa in kappas:
        res = quadratic_form_positivity(PenalizationParams(N, kappa), r)
        print(f"  kappa {kappa:<6} smallest eigenvalue {res.eigenvalue: .6f}  positive {res.positive}")

# the eigenvalue as a function of kappa crosses zero between the tabulated values
ks = np.linspace(0.5, 2.0, 16)
ev = [quadratic_form_positivity(PenalizationParams(2, k), r).eigenvalue for k in ks]
i = int(np.argmax(np.asarray(ev) < 0))
print(f"N = 2: sign change for kappa in ({ks[i - 1]:.2f}, {ks[i]:.2f}) on this grid")
