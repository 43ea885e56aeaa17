import json
from pathlib import Path

import pytest

from circlelab.cli import main, run_experiment
from circlelab.configs import BUILTIN_CONFIGS, ConfigError, build_step_distribution, builtin_config
from circlelab.reports import canonical_json, config_hash, verify_report


def test_examples_catalog(capsys):
    assert main(["examples"]) == 0
    out = capsys.readouterr().out
    assert len([l for l in out.splitlines() if l.strip()]) >= 4
    for name in ("sanov", "schottky", "dense", "rotations", "lifted-2"):
        assert name in out


def test_examples_show(capsys):
    assert main(["examples", "--show", "sanov"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["scenario"] == "entropy-gap"


def test_lifted2_declares_qmax():
    assert builtin_config("lifted-2")["q_max"] >= 2


def test_all_builtin_configs_build():
    for name in BUILTIN_CONFIGS:
        mu = build_step_distribution(builtin_config(name))
        assert len(mu) >= 1


def test_unknown_scenario_exit3(tmp_path):
    cfg = {"scenario": "nonsense", "generators": {"r": {"rotation": 0.1}},
           "mu": {"atoms": [["r", 1.0]]}}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    assert main(["run", str(p), "--out", str(tmp_path / "out")]) == 3


def test_missing_weights_key_exit3(tmp_path, capsys):
    cfg = {"scenario": "stationary", "generators": {"r": {"rotation": 0.1}}, "mu": {}}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    assert main(["run", str(p), "--out", str(tmp_path / "out")]) == 3
    err = capsys.readouterr().err
    assert "atoms" in err


def test_malformed_json_line_anchored(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text('{\n "scenario": "stationary",\n "oops"\n}')
    assert main(["run", str(p), "--out", str(tmp_path / "out")]) == 3
    err = capsys.readouterr().err
    import re
    assert re.search(r"c\.json:\d+:\d+:", err)  # line:column anchoring


def test_rotations_scenario_roundtrip(tmp_path):
    cfg = builtin_config("rotations")
    cfg["mc_samples"] = 50_000
    code = run_experiment(cfg, out_dir=tmp_path / "out")
    assert code == 0
    report = tmp_path / "out" / "report.json"
    ok, msgs = verify_report(report)
    assert ok, msgs
    data = json.loads(report.read_text())
    assert data["config_hash"] == config_hash(data["config"])
    assert (tmp_path / "out" / "nu_cdf.csv").exists()


def test_verify_catches_tamper(tmp_path):
    cfg = builtin_config("rotations")
    cfg["mc_samples"] = 50_000
    run_experiment(cfg, out_dir=tmp_path / "out")
    report = tmp_path / "out" / "report.json"
    data = json.loads(report.read_text())
    data["config"]["seed"] = 12345
    report.write_text(json.dumps(data))
    ok, msgs = verify_report(report)
    assert not ok
    assert any("hash" in m for m in msgs)


def test_worker_count_does_not_change_bytes(tmp_path):
    # small distortion run exercises the parallel map
    cfg = {
        "scenario": "distortion",
        "seed": 4,
        "grid_size": 2048,
        "samples": 10_000,
        "n_walks": 8,
        "horizon_real": 40,
        "horizon_complex": 20,
        "kappa": 0.5,
        "lyapunov_steps": 500,
        "generators": {"a": {"matrix": [[1, 2], [0, 1]]}, "b": {"matrix": [[1, 0], [2, 1]]}},
        "mu": {"atoms": [["a", 0.25], ["a^-1", 0.25], ["b", 0.25], ["b^-1", 0.25]],
               "symmetric": True},
    }
    out1, out8 = tmp_path / "w1", tmp_path / "w8"
    assert run_experiment(dict(cfg), workers=1, out_dir=out1) == 0
    assert run_experiment(dict(cfg), workers=8, out_dir=out8) == 0
    for name in ("report.json", "constants.csv"):
        assert (out1 / name).read_bytes() == (out8 / name).read_bytes()


@pytest.mark.parametrize("name", ["rotations", "schottky", "lifted-2", "lifted-3", "sanov", "dense"])
def test_bundled_configs_pass_their_scenarios(tmp_path, name):
    assert run_experiment(builtin_config(name), out_dir=tmp_path / name) == 0


def test_full_theorem_suite_scenario(tmp_path):
    cfg = {
        "scenario": "full-theorem-suite", "seed": 7, "grid_size": 1024,
        "samples": 10_000, "n_max": 8, "method": "both",
        "mc_samples": 20_000, "mc_steps": 150, "n_walks": 4,
        "horizon_real": 40, "horizon_complex": 20, "lyapunov_steps": 500,
        "trajectories": 16, "integral_samples": 10_000, "n_steps": 1000,
        "q_max": 2, "epsilon": 0.01, "word_length_cap": 20,
        "probe_horizon": 15, "probe_trials": 2,
        "generators": {"a": {"matrix": [[1, 2], [0, 1]]}, "b": {"matrix": [[1, 0], [2, 1]]}},
        "mu": {"atoms": [["a", 0.25], ["a^-1", 0.25], ["b", 0.25], ["b^-1", 0.25]],
               "symmetric": True},
    }
    assert run_experiment(cfg, out_dir=tmp_path / "out") == 0
    data = json.loads((tmp_path / "out" / "report.json").read_text())
    for part in ("stationary", "lyapunov", "entropy-gap", "boundary", "distortion", "schwarzian"):
        assert part in data["results"]
    assert (tmp_path / "out" / "convolution.csv").exists()
    assert (tmp_path / "out" / "walk_0.csv").exists()


def test_same_seed_same_bytes(tmp_path):
    cfg = builtin_config("rotations")
    cfg["mc_samples"] = 30_000
    a, b = tmp_path / "a", tmp_path / "b"
    run_experiment(dict(cfg), out_dir=a)
    run_experiment(dict(cfg), out_dir=b)
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "nu_cdf.csv").read_bytes() == (b / "nu_cdf.csv").read_bytes()
