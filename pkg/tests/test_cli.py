import json

import pytest

from arratia.cli import main, resolve


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


class TestErrors:
    def test_missing_config(self, tmp_path, capsys):
        code, _ = run(tmp_path, "dist-check", "--config", str(tmp_path / "nope.yaml"))
        assert code == 2
        assert "cannot read config" in capsys.readouterr().err

    def test_unknown_subcommand(self):
        assert main(["frobnicate"]) == 2

    def test_bad_yaml(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("seed: [1, 2\n")
        assert run(tmp_path, "sudakov-check", "--config", str(cfg))[0] == 2

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("sudakov-check:\n  meshh: 64\n")
        assert run(tmp_path, "sudakov-check", "--config", str(cfg))[0] == 2

    def test_flag_not_used(self, tmp_path):
        assert run(tmp_path, "lil-paths", "--t", "0.5")[0] == 2

    def test_config_violation(self, tmp_path):
        assert run(tmp_path, "dist-check", "--replications", "10")[0] == 2

    def test_bad_seed(self, tmp_path):
        assert run(tmp_path, "sudakov-check", "--seed", "-3")[0] == 2


def test_resolution_layers():
    cfg = {"seed": 5, "replications": 7, "scaling-check": {"spacing": 0.02, "replications": 9}}
    r = resolve("scaling-check", cfg, {"t": [0.5, 2.0], "seed": None, "workers": None, "replications": None,
                                       "alpha": None, "epsilon": None})
    assert r["seed"] == 5 and r["replications"] == 9 and r["spacing"] == 0.02 and r["t_list"] == [0.5, 2.0]
    r = resolve("scaling-check", cfg, {"replications": 11, "seed": 1})
    assert r["replications"] == 11 and r["seed"] == 1


def test_sudakov_outputs_and_worker_invariance(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: 3\nsudakov-check:\n  mesh: 64\n  replications: 400\n")
    c1, o1 = run(tmp_path, "sudakov-check", "--config", str(cfg), name="a")
    c2, o2 = run(tmp_path, "sudakov-check", "--config", str(cfg), "--workers", "2", name="b")
    assert c1 == c2 == 0
    for f in ("report.json", "report.csv", "table_gaussian.csv"):
        assert (o1 / f).read_bytes() == (o2 / f).read_bytes()
    man = json.loads((o1 / "manifest.json").read_text())
    rep = json.loads((o1 / "report.json").read_text())
    assert man["config_hash"] == rep["config_hash"]
    assert man["seed"] == rep["seed"] == 3
    assert "timestamp" in man and "wall_time" in man and man["version"]
    assert "timestamp" not in rep


def test_verdict_exit_codes(tmp_path):
    # the upper-series convergence row fails on the default n-range
    code, out = run(tmp_path, "lil-marginals", "--replications", "2000", name="a")
    assert code == 1
    rep = json.loads((out / "report.json").read_text())
    assert not rep["passed"]
    code, _ = run(tmp_path, "lil-marginals", "--replications", "2000", "--no-verdict", name="b")
    assert code == 0


def test_simulate_exports(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(
        "simulate:\n  grid: {type: uniform, lo: -1, hi: 1, n: 21}\n  replications: 2\n"
        "  drift: {type: constant, c: 0.5}\n"
    )
    code, out = run(tmp_path, "simulate", "--config", str(cfg), "--t", "0.5", "--t", "1.0", "--seed", "9")
    assert code == 0
    lines = (out / "flowpaths.csv").read_text().splitlines()
    assert lines[0] == "replication,save_time,cluster_index,position,leftmost_start_index,rightmost_start_index"
    assert {l.split(",")[1] for l in lines[1:]} == {"0.5", "1.0"}
    assert (out / "plotdata" / "widths.csv").exists()


@pytest.mark.slow
def test_dist_check_example(tmp_path):
    code, out = run(tmp_path, "dist-check", "--t", "1", "--replications", "100000", "--seed", "7")
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert any(r["name"] == "exact_ks" for r in rep["rows"])
