import json
import subprocess
import sys

import pytest

from semiclassical import __version__
from semiclassical.cli import ConfigError, load_config, main, resolve_config

STANDARD = {
    "problem": {"N": 3, "k": 2, "p": 3,
                "V": {"kind": "shifted-polynomial", "params": [0.1, 2.0, 1.0, 2.0]},
                "K": {"kind": "constant", "params": [1.0]}},
    "lambda": {"r_lo": 1.2, "r_hi": 2.8},
}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def _fields(exc):
    return [f for f, _ in exc.value.errors]


def test_minimal_config_defaults():
    rc = resolve_config(json.loads(json.dumps(STANDARD)))
    assert rc.params.kappa == 0.125 and rc.params.mu == 0.5 and rc.params.beta == 1.0
    assert rc.grid.to_spec() == {"r_min": 0.02, "r_max": 6.0, "n": 8192, "spacing": "uniform"}
    assert rc.eps_list == (0.2, 0.1, 0.05, 0.02)
    assert rc.raw["output"]["formats"] == ["json", "csv"]


def test_kappa_out_of_range():
    cfg = dict(STANDARD, penalization={"kappa": 0.3})
    with pytest.raises(ConfigError) as exc:
        resolve_config(cfg)
    assert "penalization.kappa" in _fields(exc)


def test_lambda_order_and_all_fields_listed():
    cfg = dict(STANDARD, **{"lambda": {"r_lo": 3.0, "r_hi": 2.0}, "penalization": {"mu": 2}})
    with pytest.raises(ConfigError) as exc:
        resolve_config(cfg)
    assert {"lambda.r_lo", "penalization.mu"} <= set(_fields(exc))


def test_more_validation():
    bad = json.loads(json.dumps(STANDARD))
    bad["problem"].update(N=4, k=1, p=7)     # d = 3 needs p < 5
    bad["sweep"] = {"eps_list": [0.1, 0.2]}
    bad["grid"] = {"r_min": 2.0}
    bad["bogus"] = {}
    with pytest.raises(ConfigError) as exc:
        resolve_config(bad)
    assert {"problem.p", "sweep.eps_list", "grid.r_min", "bogus"} <= set(_fields(exc))


def test_parse_error_position(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "problem": {"N": 3,,}\n}')
    with pytest.raises(ConfigError) as exc:
        load_config(p, echo=False)
    assert ":2:" in str(exc.value)
    assert main(["validate", "--config", str(p)]) == 2


def test_echo_resolved_config(tmp_path):
    p = _write(tmp_path, STANDARD)
    rc = load_config(p, tmp_path / "out")
    echoed = json.loads((tmp_path / "out" / "config.resolved.json").read_text())
    assert echoed == rc.resolved
    assert echoed["penalization"]["kappa"] == 0.125


def test_unknown_command(tmp_path, capsys):
    assert main(["frobnicate", "--config", str(_write(tmp_path, STANDARD))]) == 2
    assert "usage" in capsys.readouterr().err


def test_aux_pot(tmp_path):
    out = tmp_path / "o"
    assert main(["aux-pot", "--config", str(_write(tmp_path, STANDARD)), "--out", str(out)]) == 0
    rep = json.loads((out / "aux.json").read_text())
    assert rep["result"]["admissibility"]["pass"]
    assert rep["artifact"]["version"] == __version__ and rep["config"]["lambda"]["r_lo"] == 1.2
    lines = (out / "aux_potential.csv").read_text().splitlines()
    assert lines[0] == "r,M" and len(lines) == 2002


def test_aux_pot_boundary_minimum(tmp_path):
    cfg = json.loads(json.dumps(STANDARD))
    cfg["lambda"] = {"r_lo": 2.2, "r_hi": 2.8}
    assert main(["aux-pot", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path)]) == 3


def test_kelvin(tmp_path, capsys):
    cfg = dict(STANDARD, growth={"origin": {"class": "G0_1", "tau": 0.0},
                                 "infinity": {"class": "Ginf_2", "sigma": 0.0}})
    assert main(["kelvin", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["involution"]
    assert res["transformed"]["K"] == {"kind": "kelvin", "weight": 2.0,
                                       "of": {"kind": "constant", "params": [1.0]}}
    assert res["growth_mirror"]["infinity"]["class"] == "Ginf_1"


def test_sweep_require_certified_large_eps(tmp_path):
    cfg = dict(STANDARD, sweep={"eps_list": [1.0]})
    p = _write(tmp_path, cfg)
    assert main(["sweep", "--config", str(p), "--out", str(tmp_path / "a"),
                 "--require-certified"]) == 3
    assert main(["sweep", "--config", str(p), "--out", str(tmp_path / "b")]) == 0


def test_sweep_outputs_deterministic(tmp_path):
    cfg = dict(STANDARD, sweep={"eps_list": [0.2, 0.1]}, output={"directory": str(tmp_path / "s")})
    p = _write(tmp_path, cfg)
    assert main(["sweep", "--config", str(p), "--format", "all"]) == 0
    first = (tmp_path / "s" / "sweep.json").read_bytes()
    assert main(["sweep", "--config", str(p), "--format", "all"]) == 0
    assert (tmp_path / "s" / "sweep.json").read_bytes() == first
    assert (tmp_path / "s" / "profiles.dat").read_text().startswith("# r u_eps0.2 env_eps0.2")
    assert (tmp_path / "s" / "profile_eps0.1.csv").read_text().startswith("r,u,envelope")
    rep = json.loads(first)
    assert [r["certified"] for r in rep["result"]["reports"]] == [True, True]


def test_solve_and_certify(tmp_path):
    cfg = dict(STANDARD, solve={"eps": 0.05}, grid={"n": 2048})
    p = _write(tmp_path, cfg)
    assert main(["solve", "--config", str(p), "--out", str(tmp_path), "--require-certified"]) == 0
    rep = json.loads((tmp_path / "solve.json").read_text())
    assert rep["verdict"] == "certified"
    assert main(["certify", "--config", str(p), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "certify.json").read_text())
    assert rep["result"]["comparison"]["holds_exterior"]


def test_solve_rejects_codim_two(tmp_path):
    cfg = json.loads(json.dumps(STANDARD))
    cfg["problem"]["k"] = 1
    assert main(["solve", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path)]) == 2


def test_limit_solve(tmp_path):
    out = tmp_path / "l"
    assert main(["limit-solve", "--config", str(_write(tmp_path, STANDARD)), "--out", str(out)]) == 0
    rep = json.loads((out / "limit.json").read_text())
    assert rep["result"]["energy"] == pytest.approx(4 / 3, rel=1e-6)


def test_validate(tmp_path):
    assert main(["validate", "--config", str(_write(tmp_path, STANDARD)), "--out", str(tmp_path)]) == 0


def test_module_entry_point(tmp_path):
    p = _write(tmp_path, STANDARD)
    res = subprocess.run([sys.executable, "-m", "semiclassical", "kelvin", "--config", str(p),
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["involution"]
