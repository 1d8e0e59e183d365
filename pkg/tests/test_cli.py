import json
import subprocess
import sys

import pytest

from bwgrape import cli

SMALL = {
    "system": {"kind": "single_spin"},
    "ensemble": {"offsets_hz": [-1e6, 0.0, 1e6], "scales": [1.0]},
    "resonator": {"kind": "exponential", "q": 100, "f0_hz": 1e9},
    "grape": {
        "n_steps": 20, "dt_s": 1e-8, "amp_max_hz": 2e7, "n_s": 2, "deadtime_s": 2e-8,
        "compensate": True, "c_max": 5, "max_iters": 200, "direction": "lbfgs", "rng_seed": 1,
    },
    "analysis": {
        "map": {"offsets_hz": {"start": -1e6, "stop": 1e6, "num": 5}, "scales": [0.9, 1.0, 1.1]},
        "fid": {"t2_star_s": 2.5e-7, "n_members": 41, "t_max_s": 5e-7, "dt_acq_s": 5e-9},
    },
}


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


@pytest.fixture
def optimized(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["optimize", "--config", _write(tmp_path, SMALL), "--out", str(out)]) == cli.EXIT_OK
    return tmp_path, out


def test_optimize_writes_outputs(optimized):
    _, out = optimized
    report = json.loads((out / "report.json").read_text())
    assert report["converged"] and report["fidelity"] >= 0.99
    assert report["compensation"]["met_tolerance"]
    assert len(report["per_member"]) == 3
    pulse = json.loads((out / "pulse.json").read_text())
    assert len(pulse["samples"]) == 20 and pulse["n_s"] == 2
    assert pulse["n_r"] == 5 * 2 + 4  # compensation slot plus deadtime samples
    lines = (out / "distorted.csv").read_text().splitlines()
    assert lines[0] == "t_s,re,im"
    assert (out / "trace.csv").read_text().startswith("iteration,objective")


def test_optimize_is_reproducible(optimized):
    tmp_path, out = optimized
    again = tmp_path / "again"
    cli.main(["optimize", "--config", str(tmp_path / "cfg.json"), "--out", str(again)])
    for name in ("report.json", "pulse.json", "distorted.csv", "trace.csv"):
        assert (out / name).read_bytes() == (again / name).read_bytes()


def test_seed_override_changes_hash(optimized):
    tmp_path, out = optimized
    other = tmp_path / "seeded"
    cli.main(["optimize", "--config", str(tmp_path / "cfg.json"), "--out", str(other), "--seed", "7"])
    a = json.loads((out / "report.json").read_text())
    b = json.loads((other / "report.json").read_text())
    assert b["seed"] == 7 and a["config_hash"] != b["config_hash"]


def test_analysis_commands(optimized):
    tmp_path, out = optimized
    cfg = str(tmp_path / "cfg.json")
    for cmd in ("map", "fid", "spectrum", "distort"):
        assert cli.main([cmd, "--config", cfg, "--out", str(out)]) == cli.EXIT_OK
    assert json.loads((out / "map.json").read_text())["min_phi"] <= 1.0
    assert (out / "map.csv").read_text().count("\n") == 1 + 5 * 3
    fid = json.loads((out / "fid.json").read_text())
    assert fid["t2_star_s"] > 0
    spec = json.loads((out / "spectrum.json").read_text())
    assert spec["bandwidth_hz"] == pytest.approx(1e7, rel=1e-3)
    # re-distorting the stored pulse reproduces the optimizer's waveform
    elsewhere = tmp_path / "redistort"
    cli.main(["distort", "--config", cfg, "--out", str(elsewhere), "--pulse", str(out / "pulse.json")])
    assert (elsewhere / "distorted.csv").read_bytes() == (out / "distorted.csv").read_bytes()


def test_non_convergence_exit_code(tmp_path):
    cfg = json.loads(json.dumps(SMALL))
    cfg["grape"]["amp_max_hz"] = 1e6  # too weak for a pi/2 rotation in 200 ns
    cfg["grape"]["max_iters"] = 5
    out = tmp_path / "weak"
    assert cli.main(["optimize", "--config", _write(tmp_path, cfg), "--out", str(out)]) == cli.EXIT_NOT_CONVERGED
    assert not json.loads((out / "report.json").read_text())["converged"]


@pytest.mark.parametrize(
    "text",
    [
        "{not json",
        "[]",
        json.dumps({**SMALL, "grape": {**SMALL["grape"], "bogus": 1}}),
        json.dumps({**SMALL, "grape": {"n_steps": 5}}),
        json.dumps({**SMALL, "resonator": {"kind": "cavity", "q": 1}}),
        json.dumps({**SMALL, "system": {"kind": "qutrit"}}),
        json.dumps({**SMALL, "grape": {**SMALL["grape"], "n_s": 0}}),
        json.dumps({**SMALL, "resonator": {"kind": "measured", "q": 10, "f0_hz": 1e9, "file": "missing.csv"}}),
    ],
)
def test_bad_config_exit_code_and_no_outputs(tmp_path, text):
    path = tmp_path / "bad.json"
    path.write_text(text)
    out = tmp_path / "out"
    assert cli.main(["optimize", "--config", str(path), "--out", str(out)]) == cli.EXIT_CONFIG
    assert not out.exists()


def test_usage_errors(tmp_path):
    assert cli.main(["optimize"]) == cli.EXIT_CONFIG
    assert cli.main(["frobnicate"]) == cli.EXIT_CONFIG
    assert cli.main(["optimize", "--config", str(tmp_path / "nope.json")]) == cli.EXIT_CONFIG
    assert cli.main(["resonator-info", "--q", "10"]) == cli.EXIT_CONFIG
    assert cli.main(["map", "--config", _write(tmp_path, SMALL), "--pulse", str(tmp_path / "none.json")]) == 2


def test_resonator_info(capsys, tmp_path):
    assert cli.main(["resonator-info", "--q", "8486", "--f0-hz", "9.5236e9", "--out", str(tmp_path)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["tau_r_s"] == pytest.approx(141.81e-9, rel=1e-4)
    assert json.loads((tmp_path / "resonator.json").read_text()) == info


def test_shipped_configs_load():
    for name in ("quartz_pi2", "en_pi"):
        cfg, base = cli.load_config(name)
        setup = cli.build_setup(cfg, base)
        assert setup.stages[0].max_iters in (500, 2000)
    cfg, base = cli.load_config("en_pi")
    info = cli.build_setup(cfg, base).info
    assert info["splitting_hz"] == pytest.approx(47.892e6, abs=1e3)


def test_full_pole_and_measured_resonators(tmp_path):
    from bwgrape.resonator import MeasuredResponse
    import numpy as np

    t = np.linspace(0, 2e-7, 401)
    MeasuredResponse(t, np.exp(-t / 2e-8) + 0j).to_csv(tmp_path / "h.csv")
    meas = {"kind": "measured", "q": 100, "f0_hz": 1e9, "file": "h.csv"}
    pole = {
        "kind": "full_pole", "q": 100, "f0_hz": 1e9,
        "circuit": {"r_ohm": 1.0, "l_h": 1e-9, "c_tune_f": 1e-12, "c_match_f": 1e-13},
    }
    for res in (meas, pole):
        cfg = {**SMALL, "resonator": res, "grape": {**SMALL["grape"], "max_iters": 2}}
        code = cli.main(["optimize", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / res["kind"])])
        assert code in (cli.EXIT_OK, cli.EXIT_NOT_CONVERGED)


def test_module_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "bwgrape", "resonator-info", "--q", "1e4", "--f0-hz", "1e10"],
        capture_output=True, text=True,
    )
    assert out.returncode == 0 and "tau_r_s" in out.stdout
