import numpy as np
import pytest

from semiclassical import (
    AnnulusLambda,
    AuxPotential,
    Nonlinearity,
    PenalizedProblem,
    RadialPotential,
    SweepConfig,
    find_min,
    run_sweep,
    solve,
)

# standard test problem: N = 3, k = 2, p = 3, V = 0.1 + (r - 2)^2, K = 1, Lambda = (1.2, 2.8)
STANDARD_EPS = (0.2, 0.1, 0.05, 0.02)


@pytest.fixture(scope="session")
def standard():
    V = RadialPotential.shifted_polynomial(0.1, 2.0)
    K = RadialPotential.constant(1.0)
    f = Nonlinearity.power(3)
    lam = AnnulusLambda(1.2, 2.8)
    aux = AuxPotential(3, 2, f, V, K)
    return {"N": 3, "k": 2, "f": f, "V": V, "K": K, "lam": lam, "aux": aux}


@pytest.fixture(scope="session")
def r_star(standard):
    return find_min(standard["aux"], standard["lam"]).r_star


@pytest.fixture(scope="session")
def sweep_cfg(standard):
    s = standard
    return SweepConfig(STANDARD_EPS, s["N"], s["f"], s["V"], s["K"], s["lam"])


@pytest.fixture(scope="session")
def sweep_reports(sweep_cfg):
    return run_sweep(sweep_cfg)


@pytest.fixture(scope="session")
def solved_005(standard, r_star):
    s = standard
    P = PenalizedProblem.build(3, 0.05, s["f"], s["V"], s["K"], s["lam"])
    return P, solve(P, r0=r_star)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call":
                continue
            lines += [v for k, v in getattr(rep, "user_properties", []) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
