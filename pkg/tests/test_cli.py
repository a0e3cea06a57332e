import json
import math

import numpy as np
import pytest

from amx.cli import (RunConfig, build_model, config_from_dict, load_config,
                     main, run_emt, run_mode, run_spectrum, run_validate)
from amx.errors import ConfigError
from amx.metric import IsotropicPowerLaw, Kasner

SMALL_GRID = {"grid": {"n_k": 6, "k_min": 0.25, "k_max": 1.0,
                       "n_delta": 4, "n_xi": 4},
              "span": {"outputs": 5}}


def small_config(**extra):
    data = {k: dict(v) for k, v in SMALL_GRID.items()}
    for key, value in extra.items():
        if key in data and isinstance(value, dict):
            data[key].update(value)
        else:
            data[key] = value
    return config_from_dict(data)


def test_default_config_is_kasner_benchmark():
    cfg = load_config(None)
    model = build_model(cfg)
    assert isinstance(model, Kasner)
    assert model.exponents == pytest.approx((2 / 3, 2 / 3, -1 / 3))
    assert cfg.span.t0 == 1.0 and cfg.span.t1 == 10.0
    assert cfg.tolerances.rel_tol == 1e-10


def test_config_toml_and_json(tmp_path):
    toml_path = tmp_path / "run.toml"
    toml_path.write_text(
        "seed = 3\n"
        '[metric]\nvariant = "isotropic-power-law"\nr0 = 2.0\np = 0.5\n'
        "[span]\nt0 = 2.0\nt1 = 4.0\noutputs = 7\n")
    cfg = load_config(toml_path)
    assert isinstance(build_model(cfg), IsotropicPowerLaw)
    assert cfg.span.outputs == 7 and cfg.seed == 3

    json_path = tmp_path / "run.json"
    json_path.write_text(json.dumps(
        {"metric": {"variant": "kasner", "p1": 0.9, "p2": -0.2, "p3": 0.3},
         "seed": 11}))
    cfg = load_config(json_path)
    assert build_model(cfg).exponents == (0.9, -0.2, 0.3)
    assert cfg.seed == 11


def test_config_validation_errors(tmp_path):
    with pytest.raises(ConfigError):
        config_from_dict({"metric": {"variant": "nope"}})
    with pytest.raises(ConfigError):
        config_from_dict({"span": {"t0": 5.0, "t1": 1.0}})
    with pytest.raises(ConfigError):
        config_from_dict({"grid": {"n_k": 0}})
    with pytest.raises(ConfigError):
        config_from_dict({"grid": {"k_min": 2.0, "k_max": 1.0}})
    with pytest.raises(ConfigError):
        config_from_dict({"tolerances": {"rel_tol": 0.0}})
    with pytest.raises(ConfigError):
        config_from_dict({"bogus_section": {}})
    with pytest.raises(ConfigError):
        config_from_dict({"span": {"bogus_key": 1}})
    with pytest.raises(ConfigError):
        config_from_dict({"tolerances": {"checks": {"not_a_check": 1.0}}})
    with pytest.raises(ConfigError):
        config_from_dict({"metric": {"variant": "tabulated"}})  # no csv
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


def test_tabulated_config_roundtrip(tmp_path):
    csv = tmp_path / "bg.csv"
    t = np.linspace(1.0, 10.0, 12)
    csv.write_text("t,a1,a2,a3\n" + "\n".join(
        f"{tv},{tv},{tv},{tv}" for tv in t) + "\n")
    cfg = config_from_dict({"metric": {"variant": "tabulated", "csv": str(csv)}})
    model = build_model(cfg)
    from amx.metric import evaluate_metric
    assert evaluate_metric(model, 5.0).A[0] == pytest.approx(5.0, rel=1e-12)


def test_run_mode_isotropic_zero_columns(tmp_path):
    cfg = config_from_dict({"metric": {"variant": "isotropic-power-law",
                                       "r0": 1.0, "p": 1.0},
                            "span": {"outputs": 9}})
    out = tmp_path / "mode.csv"
    run_mode(cfg, 1.0, 0.7, 0.3, +1, "suv", out)
    lines = out.read_text().splitlines()
    assert lines[0] == "t,S,U,V,invariant_residual"
    assert len(lines) == 10
    for line in lines[1:]:
        vals = [float(x) for x in line.split(",")]
        assert max(abs(v) for v in vals[1:]) <= 1e-12


def test_run_mode_kasner_connection_rows(tmp_path):
    cfg = config_from_dict({"span": {"outputs": 17}})
    out = tmp_path / "mode.csv"
    run_mode(cfg, 1.0, math.pi / 3, math.pi / 5, +1, "suv", out)
    rows = [line.split(",") for line in out.read_text().splitlines()[1:]]
    assert all(abs(float(r[4])) <= 1e-9 for r in rows)
    # round-trip: the formatted values reproduce the invariant residual
    s, u, v, res = (float(rows[-1][i]) for i in range(1, 5))
    assert u * u + v * v - 4.0 * s * (s + 1.0) == pytest.approx(res, abs=1e-12)


def test_run_mode_other_methods_and_errors(tmp_path):
    cfg = small_config()
    run_mode(cfg, 1.0, 0.7, 0.3, +1, "second_order", tmp_path / "y.csv")
    header = (tmp_path / "y.csv").read_text().splitlines()[0]
    assert header == "t,re_y,im_y,re_ydot,im_ydot"
    run_mode(cfg, 1.0, 0.7, 0.3, -1, "bogoliubov", tmp_path / "b.csv")
    header = (tmp_path / "b.csv").read_text().splitlines()[0]
    assert header == "t,S,U,V,invariant_residual"
    with pytest.raises(ConfigError):
        run_mode(cfg, 1.0, 0.7, 0.3, +1, "bogus", tmp_path / "x.csv")
    with pytest.raises(ConfigError):
        run_mode(cfg, 1.0, 0.7, 0.3, 2, "suv", tmp_path / "x.csv")


def test_run_emt_isotropic_zero(tmp_path):
    cfg = small_config(metric={"variant": "isotropic-power-law",
                               "r0": 1.0, "p": 1.0})
    out = tmp_path / "emt.csv"
    run_emt(cfg, out, workers=1)
    lines = out.read_text().splitlines()
    assert lines[0] == ("t,T00,T11,T22,T33,T12,T13,T23,"
                        "conservation_residual,conservation_scale")
    for line in lines[1:]:
        vals = [float(x) for x in line.split(",")]
        assert max(abs(v) for v in vals[1:8]) <= 1e-12


def test_run_emt_determinism_across_workers(tmp_path):
    cfg = small_config()
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_emt(cfg, a, workers=1)
    run_emt(cfg, b, workers=2)
    assert a.read_bytes() == b.read_bytes()


def test_run_emt_refine_reports_delta(tmp_path):
    cfg = small_config()
    result = run_emt(cfg, tmp_path / "e.csv", refine=True, workers=1)
    assert result.refine_delta is not None
    assert result.refine_delta >= 0.0


def test_run_emt_needs_three_outputs(tmp_path):
    cfg = small_config(span={"outputs": 2})
    with pytest.raises(ConfigError):
        run_emt(cfg, tmp_path / "e.csv", workers=1)


def test_memory_budget_enforced(tmp_path):
    cfg = small_config(memory_budget_mb=1,
                       grid={"n_k": 64, "n_delta": 32, "n_xi": 32},
                       span={"outputs": 65})
    with pytest.raises(ConfigError):
        run_emt(cfg, tmp_path / "e.csv", workers=1)


def test_run_spectrum(tmp_path):
    cfg = small_config()
    out = tmp_path / "spec.csv"
    run_spectrum(cfg, 10.0, out, workers=1)
    lines = out.read_text().splitlines()
    assert lines[0].startswith("k,delta,xi,T00_spectral")
    assert lines[0].endswith(",trace")
    assert len(lines) == 1 + 6 * 4 * 4
    t00s, traces = [], []
    for line in lines[1:]:
        vals = [float(x) for x in line.split(",")]
        t00s.append(vals[3])
        traces.append(vals[-1])
    scale = max(abs(v) for v in t00s)
    assert scale > 0.0
    assert max(abs(v) for v in traces) <= 1e-12 * scale
    with pytest.raises(ConfigError):
        run_spectrum(cfg, 99.0, tmp_path / "x.csv", workers=1)
    # at the span start every mode is still in vacuum
    run_spectrum(cfg, cfg.span.t0, tmp_path / "s0.csv", workers=1)
    rows0 = (tmp_path / "s0.csv").read_text().splitlines()[1:]
    assert all(float(r.split(",")[3]) == 0.0 for r in rows0)


def test_run_validate_json_schema(tmp_path):
    cfg = RunConfig()
    cfg.seed = 42
    out = tmp_path / "report.json"
    rc = run_validate(cfg, out)
    assert rc == 0
    payload = json.loads(out.read_text())
    assert isinstance(payload, list) and payload
    for item in payload:
        assert set(item) == {"check", "max_abs", "max_rel", "samples", "pass"}
    checks = [item["check"] for item in payload]
    assert checks == sorted(checks)
    assert all(item["pass"] for item in payload)


def test_run_validate_zero_tolerance_fails(tmp_path):
    cfg = config_from_dict(
        {"tolerances": {"checks": {"identity_quadratic": 0.0}}})
    rc = run_validate(cfg, tmp_path / "r.json")
    assert rc == 1
    payload = json.loads((tmp_path / "r.json").read_text())
    failing = [item for item in payload if not item["pass"]]
    assert [item["check"] for item in failing] == ["identity_quadratic"]


def test_main_exit_codes(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[grid]\nn_k = 0\n")
    assert main(["emt", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == 2
    assert main(["mode", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == 2

    cfg = tmp_path / "small.toml"
    cfg.write_text("[grid]\nn_k = 6\nk_min = 0.25\nk_max = 1.0\n"
                   "n_delta = 4\nn_xi = 4\n[span]\noutputs = 5\n")
    out = tmp_path / "emt.csv"
    assert main(["emt", "--config", str(cfg), "--out", str(out),
                 "--workers", "1"]) == 0
    assert out.exists()
    assert main(["spectrum", "--config", str(cfg), "--t", "99",
                 "--out", str(tmp_path / "s.csv")]) == 2


def test_validate_seed_determinism(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["validate", "--out", str(a), "--seed", "7"]) == 0
    assert main(["validate", "--out", str(b), "--seed", "7"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_validate_stdout_when_no_out(capsys):
    assert main(["validate", "--seed", "7"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert isinstance(payload, list) and payload
