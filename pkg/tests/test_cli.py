import json
import os
import subprocess
import sys

import pytest

from dpbounds.cli import main

RR_EXPERIMENT = {"prior": {"kind": "uniform", "size": 10}, "mechanism": {"kind": "rr", "eps": 1.0, "m": 10},
                 "attack": {"kind": "rr-bayes"}, "metric": {"kind": "exact-match"}, "n": 10, "seed": 11,
                 "replays": 30, "alphas": [0.05]}


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bound_examples(capsys):
    code, out, _ = run(capsys, "bound", "--kind", "pure", "--eps", "1", "--prior", "uniform:10", "--v", "1")
    doc = json.loads(out)
    assert code == 0 and doc["schema"] == "v1"
    assert doc["value"] == pytest.approx(0.23197, abs=5e-6)
    _, out, _ = run(capsys, "bound", "--kind", "pure", "--eps", "0", "--prior", "uniform:10", "--v", "1")
    assert json.loads(out)["value"] == pytest.approx(0.1)
    _, out, _ = run(capsys, "bound", "--kind", "approx-onerun", "--eps", "1", "--delta", "1e-5", "--prior",
                    "uniform:10", "--v", "1", "--n", "1")
    assert json.loads(out)["value"] == pytest.approx(0.231969317 + 0.768030683e-5, abs=1e-9)


def test_bound_baselines_and_mc(capsys, tmp_path):
    _, out, _ = run(capsys, "bound", "--kind", "baseline-rero", "--eps", "1", "--prior", "0.1")
    assert json.loads(out)["value"] == pytest.approx(0.27183, abs=1e-5)
    runs = tmp_path / "runs.csv"
    runs.write_text("0.1,0.1\n0.1,0.1\n")
    _, out, _ = run(capsys, "bound", "--kind", "approx-mc", "--eps", "0", "--delta", "1e-5", "--runs", str(runs),
                    "--v", "2")
    assert json.loads(out)["value"] == pytest.approx(0.01 + 2e-5)


def test_nine_significant_digits(capsys):
    _, out, _ = run(capsys, "bound", "--eps", "1", "--prior", "uniform:10")
    assert '"value": 0.231969317' in out


def test_calibrate(capsys):
    _, out, _ = run(capsys, "calibrate", "--eps", "1", "--delta", "1e-5", "--d", "10", "--k", "3", "--unknown", "3")
    doc = json.loads(out)
    assert doc["m"] == 85
    assert doc["sigma"] == pytest.approx(85 ** 0.5 / 0.2680511232, rel=1e-8)


def test_compare(capsys, tmp_path):
    code, out, _ = run(capsys, "compare", "--eps", "1", "--pmin", "0.1", "--pmax", "1", "--points", "2",
                       "--out", str(tmp_path))
    rows = out.strip().splitlines()
    assert rows[0] == "p,eps,ours,rero,narcissus"
    p, eps, ours, rero, narc = map(float, rows[1].split(","))
    assert (ours, rero, narc) == pytest.approx((0.23197, 0.27183, 0.27184), abs=1e-5)
    assert [float(x) for x in rows[2].split(",")][2:] == [1.0, 1.0, 1.0]
    assert (tmp_path / "compare.csv").read_text() == out


def test_compare_ordering(capsys):
    _, out, _ = run(capsys, "compare")
    for line in out.strip().splitlines()[1:]:
        p, eps, ours, rero, narc = map(float, line.split(","))
        assert ours <= rero and ours <= narc


def test_protect(capsys):
    _, out, _ = run(capsys, "protect", "--prior", "1e-9", "--threshold", "0.05", "--delta", "1e-5")
    assert json.loads(out)["eps_protect"] == pytest.approx(17.78, abs=0.05)
    _, out, _ = run(capsys, "protect", "--prior", "0.5", "--delta", "0.3")
    assert json.loads(out)["eps_protect"] == 0.0


def test_simulate_byte_identical(tmp_path, capsys):
    cfg = tmp_path / "rr.json"
    cfg.write_text(json.dumps(RR_EXPERIMENT))
    outs = []
    for name in ("a", "b"):
        code, out, _ = run(capsys, "simulate", "--config", str(cfg), "--out", str(tmp_path / name))
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]
    for f in ("summary.json", "tails.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    doc = json.loads(outs[0])
    assert doc["replays"] == 30 and sum(doc["w_distribution"]) == 30


def test_output_dir_from_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("DPBOUNDS_OUTPUT_DIR", str(tmp_path / "env"))
    run(capsys, "compare", "--points", "3")
    assert (tmp_path / "env" / "compare.csv").exists()


def test_errors_leave_no_files(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**RR_EXPERIMENT, "mystery": 1}))
    code, out, err = run(capsys, "simulate", "--config", str(bad), "--out", str(tmp_path / "o"))
    assert code != 0 and "mystery" in err and out == ""
    assert not (tmp_path / "o").exists()
    code, _, err = run(capsys, "bound", "--eps", "1", "--prior", "gaussian:3")
    assert code != 0 and err


def test_malformed_flags_exit_nonzero(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["compare", "--points", "many", "--out", str(tmp_path / "x")])
    assert info.value.code != 0
    assert not (tmp_path / "x").exists()
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code != 0


@pytest.mark.parametrize("sub", [[], ["bound"], ["calibrate"], ["simulate"], ["compare"], ["protect"]])
def test_help(sub):
    proc = subprocess.run([sys.executable, "-m", "dpbounds", *sub, "--help"], capture_output=True, text=True,
                          env={**os.environ})
    assert proc.returncode == 0 and "usage" in proc.stdout
