"""Batch command line: load a JSON run config, dispatch a pipeline, write reports.

Exit codes: 0 success, 1 solver error, 2 configuration or usage error,
3 failed verdict.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .asymptotics import (
    DEFAULT_TOLERANCES,
    SweepConfig,
    concentration_check,
    decay_fit,
    energy_scaling_check,
    peak_extract,
    run_sweep,
)
from .auxiliary import AdmissibilityError, AnnulusLambda, AuxPotential, find_min, validate_lambda
from .barriers import (
    DecayEnvelope,
    PeakBarrier,
    envelope_eval,
    barrier_comparison,
    peak_barrier_check,
    solve_outer_barrier,
)
from .limit import LimitProblem, SolverError, solve_limit
from .nonlinearity import (
    Nonlinearity,
    NumericalError,
    PenalizationParams,
    quadratic_form_positivity,
    validate_f,
)
from .penalized import (
    PenalizedProblem,
    RadialGrid,
    SolverOptions,
    certify_original,
    original_residual,
    residual,
    solve,
)
from .potentials import (
    GrowthClass,
    GrowthCondition,
    RadialPotential,
    kelvin_transform_potentials,
    mirror_growth_class,
    validate_growth,
)

log = logging.getLogger("semiclassical")

COMMANDS = ("limit-solve", "aux-pot", "solve", "sweep", "certify", "kelvin", "validate")
SECTIONS = ("problem", "lambda", "penalization", "grid", "sweep", "solve", "solver", "limit",
            "aux", "output", "growth", "tolerances")
FORMATS = ("json", "csv", "dat")

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG, EXIT_VERDICT = 0, 1, 2, 3


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists ``(field, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{k}: {m}" for k, m in self.errors))


@dataclass
class RunConfig:
    """Validated configuration with every default filled in."""

    raw: dict
    N: int
    k: int
    f: Nonlinearity
    V: RadialPotential
    K: RadialPotential
    lam: AnnulusLambda
    params: PenalizationParams
    grid: RadialGrid
    eps_list: tuple
    warm_start: bool
    eps: float
    options: SolverOptions
    growth: GrowthClass | None
    tolerances: dict

    @property
    def resolved(self) -> dict:
        return copy.deepcopy(self.raw)

    @property
    def output_dir(self) -> Path:
        return Path(self.raw["output"]["directory"])

    @property
    def formats(self) -> tuple:
        return tuple(self.raw["output"]["formats"])

    def penalized(self, eps: float) -> PenalizedProblem:
        return PenalizedProblem.build(self.N, eps, self.f, self.V, self.K, self.lam,
                                      self.params, self.grid)

    def aux(self) -> AuxPotential:
        return AuxPotential(self.N, self.k, self.f, self.V, self.K)


# ---------------------------------------------------------------------------
# loading and validation
# ---------------------------------------------------------------------------
def _num(errors, name, value, cond=None, msg="", integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append((name, f"expected a number, got {value!r}"))
        return None
    if integer and int(value) != value:
        errors.append((name, f"expected an integer, got {value!r}"))
        return None
    if cond is not None and not cond(value):
        errors.append((name, msg))
        return None
    return int(value) if integer else float(value)


def _section(errors, cfg, name):
    sec = cfg.get(name, {})
    if sec is None:
        sec = {}
    if not isinstance(sec, dict):
        errors.append((name, "expected an object"))
        return {}
    return sec


def resolve_config(cfg: dict) -> RunConfig:
    """Validate a parsed config, fill defaults and build the model objects.

    Every violated field is collected before raising :class:`ConfigError`.
    """
    errors: list = []
    if not isinstance(cfg, dict):
        raise ConfigError([("<root>", "config must be a JSON object")])
    for key in cfg:
        if key not in SECTIONS:
            errors.append((key, "unknown section"))
    for key in ("problem", "lambda"):
        if key not in cfg:
            errors.append((key, "required section missing"))

    prob = _section(errors, cfg, "problem")
    N = None
    if "N" not in prob:
        errors.append(("problem.N", "required"))
    else:
        N = _num(errors, "problem.N", prob["N"], lambda v: v >= 2, "must be at least 2",
                 integer=True)
    k = None
    if N is not None:
        k = _num(errors, "problem.k", prob.get("k", N - 1), lambda v: 1 <= v <= N - 1,
                 f"must lie in [1, {N - 1}]", integer=True)
        if k is not None and N - k not in (1, 2, 3):
            errors.append(("problem.k", "reduced dimension N - k must be 1, 2 or 3"))
            k = None
    f = None
    if "f" in prob and "p" in prob:
        errors.append(("problem.f", "give either p or f, not both"))
    elif "f" in prob:
        try:
            f = Nonlinearity.from_spec(prob["f"])
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(("problem.f", str(exc)))
    else:
        p = _num(errors, "problem.p", prob.get("p", 3.0), lambda v: v > 1, "must exceed 1")
        f = Nonlinearity.power(p) if p is not None else None
    if f is not None and k is not None and not f.is_subcritical(N - k):
        errors.append(("problem.p" if "f" not in prob else "problem.f",
                       f"p = {f.p} is not subcritical in dimension {N - k}"))
    pots = {}
    for name, default in (("V", None), ("K", {"kind": "constant", "params": [1.0]})):
        spec = prob.get(name, default)
        if spec is None:
            errors.append((f"problem.{name}", "required"))
            continue
        try:
            pots[name] = RadialPotential.from_spec(spec)
        except (KeyError, TypeError, ValueError) as exc:
            errors.append((f"problem.{name}", str(exc)))

    lsec = _section(errors, cfg, "lambda")
    r_lo = _num(errors, "lambda.r_lo", lsec.get("r_lo"), lambda v: v > 0, "must be positive")
    r_hi = _num(errors, "lambda.r_hi", lsec.get("r_hi"), lambda v: math.isfinite(v),
                "must be finite")
    lam = None
    if r_lo is not None and r_hi is not None:
        if r_lo >= r_hi:
            errors.append(("lambda.r_lo", "r_lo must be smaller than r_hi"))
        else:
            lam = AnnulusLambda(r_lo, r_hi)
    if lam is not None and "V" in pots:
        v = pots["V"](np.linspace(lam.r_lo, lam.r_hi, 2001))
        if np.min(v) <= 0:
            errors.append(("problem.V", "V must be positive on the closure of lambda"))

    psec = _section(errors, cfg, "penalization")
    params = None
    if N is not None:
        hardy = ((N - 2) / 2) ** 2
        kappa = psec.get("kappa", 0.5 * hardy if N >= 3 else 0.1)
        if N >= 3:
            kappa = _num(errors, "penalization.kappa", kappa, lambda v: 0 < v < hardy,
                         f"must lie in (0, {hardy}) for N = {N}")
        else:
            kappa = _num(errors, "penalization.kappa", kappa, lambda v: v > 0, "must be positive")
        beta = _num(errors, "penalization.beta", psec.get("beta", 1.0), lambda v: v > 0,
                    "must be positive")
        mu = _num(errors, "penalization.mu", psec.get("mu", 0.5), lambda v: 0 < v < 1,
                  "must lie in (0, 1)")
        if None not in (kappa, beta, mu):
            params = PenalizationParams(N, kappa, beta, mu)

    gsec = _section(errors, cfg, "grid")
    grid = None
    if lam is not None:
        dflt = RadialGrid.default_for(lam)
        g_min = _num(errors, "grid.r_min", gsec.get("r_min", dflt.r_min),
                     lambda v: 0 < v < lam.r_lo, "must lie in (0, lambda.r_lo)")
        g_max = _num(errors, "grid.r_max", gsec.get("r_max", dflt.r_max),
                     lambda v: v > lam.r_hi, "must exceed lambda.r_hi")
        g_n = _num(errors, "grid.n", gsec.get("n", dflt.n), lambda v: v >= 16,
                   "must be at least 16", integer=True)
        spacing = gsec.get("spacing", "uniform")
        if spacing not in ("uniform", "log"):
            errors.append(("grid.spacing", "must be 'uniform' or 'log'"))
        elif None not in (g_min, g_max, g_n):
            grid = RadialGrid(g_min, g_max, g_n, spacing)

    ssec = _section(errors, cfg, "sweep")
    eps_list = ssec.get("eps_list", [0.2, 0.1, 0.05, 0.02])
    if (not isinstance(eps_list, list) or not eps_list
            or any(isinstance(e, bool) or not isinstance(e, (int, float)) for e in eps_list)):
        errors.append(("sweep.eps_list", "must be a nonempty list of numbers"))
        eps_list = ()
    elif any(e <= 0 for e in eps_list):
        errors.append(("sweep.eps_list", "values must be positive"))
    elif any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        errors.append(("sweep.eps_list", "must be strictly decreasing"))
    warm = ssec.get("warm_start", True)
    if not isinstance(warm, bool):
        errors.append(("sweep.warm_start", "must be true or false"))

    eps = _num(errors, "solve.eps", _section(errors, cfg, "solve").get("eps", 0.05),
               lambda v: v > 0, "must be positive")

    osec = _section(errors, cfg, "solver")
    tol = _num(errors, "solver.tol", osec.get("tol", 1e-8), lambda v: v > 0, "must be positive")
    iters = _num(errors, "solver.max_iters", osec.get("max_iters", 20000), lambda v: v > 0,
                 "must be positive", integer=True)
    method = osec.get("method", "cg")
    if method not in ("cg", "sd"):
        errors.append(("solver.method", "must be 'cg' or 'sd'"))
    options = SolverOptions(tol, iters, method=method) if None not in (tol, iters) \
        and method in ("cg", "sd") else None

    lim = _section(errors, cfg, "limit")
    _num(errors, "limit.a", lim.get("a", 1.0), lambda v: v > 0, "must be positive")
    _num(errors, "limit.b", lim.get("b", 1.0), lambda v: v > 0, "must be positive")
    _num(errors, "limit.n", lim.get("n", 4096), lambda v: v >= 64, "must be at least 64",
         integer=True)
    if lim.get("method", "shooting") not in ("shooting", "nehari-descent"):
        errors.append(("limit.method", "must be 'shooting' or 'nehari-descent'"))
    asec = _section(errors, cfg, "aux")
    _num(errors, "aux.resolution", asec.get("resolution", 2001), lambda v: v >= 3,
         "must be at least 3", integer=True)

    out = _section(errors, cfg, "output")
    if not isinstance(out.get("directory", "out"), str):
        errors.append(("output.directory", "must be a string"))
    formats = out.get("formats", ["json", "csv"])
    if not isinstance(formats, list) or any(x not in FORMATS for x in formats):
        errors.append(("output.formats", f"must be a list drawn from {list(FORMATS)}"))

    growth = None
    grsec = _section(errors, cfg, "growth")
    conds = {}
    for end in ("origin", "infinity"):
        if grsec.get(end) is None:
            continue
        try:
            c = GrowthCondition.from_spec(grsec[end])
            if c.end != end:
                raise ValueError(f"{c.name} is not a condition at {end}")
            conds[end] = c
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            errors.append((f"growth.{end}", str(exc)))
    if conds:
        growth = GrowthClass(conds.get("origin"), conds.get("infinity"))

    tsec = _section(errors, cfg, "tolerances")
    tolerances = dict(DEFAULT_TOLERANCES)
    for key, val in tsec.items():
        if key not in DEFAULT_TOLERANCES:
            errors.append((f"tolerances.{key}", "unknown tolerance"))
        elif key == "energy_ratio":
            if (not isinstance(val, list) or len(val) != 2 or not all(
                    isinstance(x, (int, float)) and not isinstance(x, bool) for x in val)
                    or not val[0] < val[1]):
                errors.append(("tolerances.energy_ratio", "must be [lo, hi] with lo < hi"))
            else:
                tolerances[key] = (float(val[0]), float(val[1]))
        else:
            v = _num(errors, f"tolerances.{key}", val, lambda x: x > 0, "must be positive")
            if v is not None:
                tolerances[key] = v

    if errors:
        raise ConfigError(errors)

    raw = {
        "problem": {"N": N, "k": k, "f": f.to_spec(), "V": pots["V"].to_spec(),
                    "K": pots["K"].to_spec()},
        "lambda": lam.to_spec(),
        "penalization": {"kappa": params.kappa, "beta": params.beta, "mu": params.mu},
        "grid": grid.to_spec(),
        "sweep": {"eps_list": [float(e) for e in eps_list], "warm_start": warm},
        "solve": {"eps": eps},
        "solver": {"tol": options.tol, "max_iters": options.max_iters, "method": options.method},
        "limit": {"a": float(lim.get("a", 1.0)), "b": float(lim.get("b", 1.0)),
                  "n": int(lim.get("n", 4096)), "method": lim.get("method", "shooting")},
        "aux": {"resolution": int(asec.get("resolution", 2001))},
        "output": {"directory": out.get("directory", "out"), "formats": list(formats)},
        "growth": {e: c.to_spec() for e, c in conds.items()},
        "tolerances": {k2: list(v) if isinstance(v, tuple) else v
                       for k2, v in tolerances.items()},
    }
    return RunConfig(raw, N, k, f, pots["V"], pots["K"], lam, params, grid,
                     tuple(float(e) for e in eps_list), warm, eps, options, growth, tolerances)


def load_config(path, out_dir=None, echo: bool = True) -> RunConfig:
    """Read, validate and (optionally) echo the resolved config to the output directory."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError([("--config", f"no such file: {path}")])
    text = path.read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([("<parse>", f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")]) from None
    if isinstance(cfg, dict) and out_dir is not None:
        cfg.setdefault("output", {})
        if isinstance(cfg["output"], dict):
            cfg["output"]["directory"] = str(out_dir)
    rc = resolve_config(cfg)
    if echo:
        rc.output_dir.mkdir(parents=True, exist_ok=True)
        write_json(rc.output_dir / "config.resolved.json", rc.resolved)
    return rc


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------
def _plain(obj: Any):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps(obj) -> str:
    # json writes floats with repr, the shortest round-trip form
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def report(rc: RunConfig, command: str, result: dict, verdict: str | None = None) -> dict:
    return {"artifact": {"name": "artifact", "package": "semiclassical", "version": __version__},
            "command": command, "config": rc.resolved, "verdict": verdict, "result": result}


def _write_columns(path, header, cols, sep=","):
    arr = np.column_stack(cols)
    np.savetxt(path, arr, delimiter=sep, header=header, comments="" if sep == "," else "# ",
               fmt="%.17g")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------
def cmd_limit_solve(rc: RunConfig, args) -> int:
    lim = rc.raw["limit"]
    d = rc.N - rc.k
    gs = solve_limit(LimitProblem(d, lim["a"], lim["b"], rc.f), lim["method"], lim["n"],
                     cross_check=True)
    result = {"d": d, "a": lim["a"], "b": lim["b"], "w0": gs.w0, "energy": gs.energy,
              "method": gs.method, "nehari_residual": gs.nehari_residual(),
              "cross_check_gap": gs.info.get("cross_check_gap"), "nodes": int(gs.rho.size)}
    out = rc.output_dir
    if "csv" in rc.formats:
        gs.to_csv(out / "limit_profile.csv")
    if "json" in rc.formats:
        write_json(out / "limit.json", report(rc, "limit-solve", result, "pass"))
    return EXIT_OK


def cmd_aux_pot(rc: RunConfig, args) -> int:
    aux = rc.aux()
    res = rc.raw["aux"]["resolution"]
    r = np.linspace(rc.lam.r_lo, rc.lam.r_hi, res)
    m = np.asarray(aux(r), float)
    mn = find_min(aux, rc.lam, res, strict=False)
    adm = validate_lambda(aux, rc.lam, rc.N, rc.k, res)
    ok = adm["pass"] and not mn.boundary
    out = rc.output_dir
    if "csv" in rc.formats:
        _write_columns(out / "aux_potential.csv", "r,M", [r, m])
    if "dat" in rc.formats:
        _write_columns(out / "aux_potential.dat", "r M", [r, m], sep=" ")
    if "json" in rc.formats:
        write_json(out / "aux.json", report(rc, "aux-pot", {"minimum": mn.to_dict(),
                                                            "admissibility": adm,
                                                            "mode": aux.mode},
                                            "pass" if ok else "fail"))
    return EXIT_OK if ok else EXIT_VERDICT


def _require_radial(rc: RunConfig):
    if rc.k != rc.N - 1:
        raise ConfigError([("problem.k", "the penalized solver handles k = N - 1 only")])


def _solve_one(rc: RunConfig, eps: float):
    P = rc.penalized(eps)
    r_star = find_min(rc.aux(), rc.lam).r_star
    return P, solve(P, rc.options, r0=r_star)


def _solution_result(P, sol) -> dict:
    pk = peak_extract(sol)
    cert = certify_original(P, sol)
    return {"eps": P.eps, "r_eps": pk.r, "peak": pk.value, "peak_at_boundary": pk.at_boundary,
            "j_eps": sol.j_eps, "scaled_energy": sol.j_eps / P.eps, "grad_norm": sol.grad_norm,
            "iterations": sol.iterations, "residual": residual(P, sol),
            "original_residual": original_residual(P, sol), "tail": sol.tail_check(),
            "certification": cert}


def cmd_solve(rc: RunConfig, args) -> int:
    _require_radial(rc)
    P, sol = _solve_one(rc, rc.eps)
    result = _solution_result(P, sol)
    cert = result["certification"]["certified"]
    out = rc.output_dir
    if "csv" in rc.formats:
        sol.to_csv(out / "profile.csv")
    if "json" in rc.formats:
        write_json(out / "solve.json", report(rc, "solve", result,
                                              "certified" if cert else "not certified"))
    if args.require_certified and not cert:
        return EXIT_VERDICT
    return EXIT_OK


def cmd_certify(rc: RunConfig, args) -> int:
    _require_radial(rc)
    P, sol = _solve_one(rc, rc.eps)
    result = _solution_result(P, sol)
    pk = peak_extract(sol)
    outer = solve_outer_barrier(P)
    decay = decay_fit(sol, pk, outer)
    R = 0.5 * float(rc.lam.distance_to_boundary(pk.r))
    v_floor = float(np.min(rc.V(np.linspace(rc.lam.r_lo, rc.lam.r_hi, 2001))))
    lam_w = min(decay["lambda_fit"], 0.9 * decay["lambda_max"])
    comp = barrier_comparison(P, sol, outer, pk.r, lam_w, R)
    b = PeakBarrier(pk.r, R, lam_w, P.eps, v_floor, rc.params.mu)
    result.update({"outer_barrier": outer.checks, "decay": decay, "comparison": comp,
                   "peak_barrier": peak_barrier_check(b, rc.V, rc.params.mu, P.r, rc.N, rc.lam)})
    cert = result["certification"]["certified"]
    out = rc.output_dir
    if "csv" in rc.formats:
        _write_columns(out / "barrier.csv", "r,u,psi", [P.r, sol.u, outer(P.r)])
    if "dat" in rc.formats:
        _write_columns(out / "barrier.dat", "r u Psi", [P.r, sol.u, outer(P.r)], sep=" ")
    if "json" in rc.formats:
        write_json(out / "certify.json", report(rc, "certify", result,
                                                "certified" if cert else "not certified"))
    return EXIT_OK if cert else EXIT_VERDICT


def _envelope(rc: RunConfig, rep):
    """Fitted decay envelope on the solution grid (NaN when the fit failed)."""
    r = rep.solution.r
    if "C" not in rep.decay:
        return np.full_like(r, np.nan)
    env = DecayEnvelope(rep.decay["C"], rep.decay["lambda_fit"], rep.eps, rc.N)
    return envelope_eval(env, r, rep.r_eps)


def cmd_sweep(rc: RunConfig, args) -> int:
    _require_radial(rc)
    cfg = SweepConfig(rc.eps_list, rc.N, rc.f, rc.V, rc.K, rc.lam, rc.params, rc.grid,
                      rc.growth, rc.warm_start, args.threads, rc.options, rc.tolerances)
    reports = run_sweep(cfg)
    for rep in reports:
        log.info("eps=%g done in %.2fs (%s)", rep.eps, rep.runtime, rep.error or "ok")
    aux = cfg.aux()
    conc = concentration_check(reports, aux, rc.lam, rc.tolerances)
    energy = energy_scaling_check(reports, aux, rc.N - 1, rc.lam, rc.tolerances)
    rows = []
    for rep in reports:
        d = rep.to_dict()
        d.pop("runtime")        # keeps the report byte-identical across runs
        rows.append(d)
    failed = [rep.eps for rep in reports if not rep.ok]
    uncertified = [rep.eps for rep in reports if rep.ok and not rep.certified]
    result = {"reports": rows, "concentration": conc, "energy": energy,
              "solver_failures": failed, "uncertified": uncertified}
    verdict = "pass" if conc["pass"] and energy["pass"] and not uncertified else "fail"
    out = rc.output_dir
    if "csv" in rc.formats:
        cols = ("eps", "r_eps", "peak", "m_at_peak", "scaled_energy", "lambda_fit", "certified",
                "margin", "l2_norm", "grad_norm", "iterations", "residual")
        lines = [",".join(cols)]
        for rep in reports:
            lines.append(",".join(repr(float(getattr(rep, c))) if c != "certified"
                                  else str(int(rep.certified)) for c in cols))
        (out / "sweep.csv").write_text("\n".join(lines) + "\n")
        for rep in reports:
            if rep.solution is not None:
                _write_columns(out / f"profile_eps{rep.eps:g}.csv", "r,u,envelope",
                               [rep.solution.r, rep.solution.u, _envelope(rc, rep)])
    if "dat" in rc.formats:
        good = [rep for rep in reports if rep.solution is not None]
        if good:
            head = " ".join(f"u_eps{rep.eps:g} env_eps{rep.eps:g}" for rep in good)
            cols = [good[0].solution.r]
            for rep in good:
                cols += [rep.solution.u, _envelope(rc, rep)]
            _write_columns(out / "profiles.dat", "r " + head, cols, sep=" ")
    if "json" in rc.formats:
        write_json(out / "sweep.json", report(rc, "sweep", result, verdict))
    if failed:
        return EXIT_SOLVER
    if args.require_certified and uncertified:
        return EXIT_VERDICT
    return EXIT_OK


def cmd_kelvin(rc: RunConfig, args) -> int:
    if rc.N < 3:
        raise ConfigError([("problem.N", "the Kelvin transform needs N >= 3")])
    if not rc.f.is_pure_power:
        raise ConfigError([("problem.f", "the Kelvin transform needs f(s) = s^p")])
    pair = kelvin_transform_potentials(rc.V, rc.K, rc.f.p, rc.N)
    back = pair.inverse()
    result = {"transformed": pair.to_spec(),
              "involution": bool(back.v_hat == rc.V and back.k_hat == rc.K)}
    if rc.growth is not None:
        m = mirror_growth_class(rc.growth, rc.f.p, rc.N)
        result["growth_mirror"] = {e: c.to_spec() for e, c in
                                   (("origin", m.origin), ("infinity", m.infinity)) if c}
    print(dumps(result), end="")
    if "json" in rc.formats:
        write_json(rc.output_dir / "kelvin.json", report(rc, "kelvin", result, "pass"))
    return EXIT_OK


def cmd_validate(rc: RunConfig, args) -> int:
    aux = rc.aux()
    checks = {"f": validate_f(rc.f)}
    checks["lambda"] = validate_lambda(aux, rc.lam, rc.N, rc.k, rc.raw["aux"]["resolution"])
    if rc.growth is not None:
        checks["growth"] = validate_growth(rc.V, rc.K, rc.growth, rc.N, rc.f.q)
    if rc.k == rc.N - 1:
        pos = quadratic_form_positivity(rc.params, rc.grid.nodes)
        checks["positivity"] = {"eigenvalue": pos.eigenvalue, "pass": pos.positive}
    ok = all(bool(c.get("pass", c.get("valid", True))) for c in checks.values())
    if "json" in rc.formats:
        write_json(rc.output_dir / "validate.json",
                   report(rc, "validate", checks, "pass" if ok else "fail"))
    print(dumps({name: bool(c.get("pass", c.get("valid", True))) for name, c in checks.items()}),
          end="")
    return EXIT_OK if ok else EXIT_VERDICT


HANDLERS = {
    "limit-solve": cmd_limit_solve,
    "aux-pot": cmd_aux_pot,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "certify": cmd_certify,
    "kelvin": cmd_kelvin,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semiclassical", description=__doc__.splitlines()[0])
    ap.add_argument("command", help="one of: " + ", ".join(COMMANDS))
    ap.add_argument("--config", required=True, metavar="PATH", help="JSON run config")
    ap.add_argument("--out", metavar="DIR", help="output directory (overrides output.directory)")
    ap.add_argument("--require-certified", action="store_true",
                    help="exit 3 unless every solution is certified")
    ap.add_argument("--threads", type=int, default=1, metavar="N",
                    help="worker threads for cold-start sweeps")
    ap.add_argument("--format", choices=("json", "csv", "all"),
                    help="output formats (all = json, csv and gnuplot .dat)")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def dispatch(command: str, rc: RunConfig, args) -> int:
    """Run ``command`` on a resolved config and map failures to exit codes."""
    if command not in HANDLERS:
        print(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}",
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        return HANDLERS[command](rc, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AdmissibilityError as exc:
        print(f"admissibility: {exc}", file=sys.stderr)
        return EXIT_VERDICT
    except (SolverError, NumericalError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    if args.command not in HANDLERS:
        ap.print_usage(sys.stderr)
        print(f"unknown command {args.command!r}; expected one of {', '.join(COMMANDS)}",
              file=sys.stderr)
        return EXIT_CONFIG
    if args.threads < 1:
        print("--threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rc = load_config(args.config, args.out, echo=False)
    except ConfigError as exc:
        print("config error:", file=sys.stderr)
        for name, msg in exc.errors:
            print(f"  {name}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    if args.format:
        fmts = list(FORMATS) if args.format == "all" else [args.format]
        rc.raw["output"]["formats"] = fmts
    rc.output_dir.mkdir(parents=True, exist_ok=True)
    write_json(rc.output_dir / "config.resolved.json", rc.resolved)
    return dispatch(args.command, rc, args)
