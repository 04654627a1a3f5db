import json
from pathlib import Path

import pytest

from hardyp import cli
from hardyp.acceptance import Criterion
from hardyp.analysis import read_sweep_csv

DOMAINS = Path(__file__).resolve().parent.parent / "scripts" / "domains"


def run(*args):
    return cli.main([str(a) for a in args])


def test_compute_rejects_small_p(tmp_path):
    assert run("compute", "--domain", DOMAINS / "square.json", "--p", 0.9, "--out", tmp_path) == 2


@pytest.mark.parametrize("extra", [["--ladder", "0.1,0.2"], ["--a", "1.5"], ["--ladder", ""],
                                   ["--grading", "0.5"]])
def test_compute_validation_errors(tmp_path, extra):
    assert run("compute", "--domain", DOMAINS / "interval.json", "--p", 2, "--out", tmp_path,
               *extra) == 2


def test_missing_domain_file(tmp_path):
    assert run("compute", "--domain", tmp_path / "nope.json", "--p", 2, "--out", tmp_path) == 2


def test_bad_domain_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"type": "polygon", "vertices": [[0, 0], [1, 1], [1, 0], [0, 1]]}))
    assert run("compute", "--domain", bad, "--p", 2, "--out", tmp_path) == 2


def test_unknown_flag_is_validation_error():
    assert run("compute", "--bogus") == 2


def test_nonconvergence_exit_code(tmp_path):
    assert run("compute", "--domain", DOMAINS / "interval.json", "--p", 2, "--ladder", "0.05",
               "--max-iterations", 1, "--out", tmp_path) == 3


def test_compute_interval(tmp_path):
    assert run("compute", "--domain", DOMAINS / "interval.json", "--p", 3, "--ladder",
               "0.0625,0.03125", "--out", tmp_path) == 0
    rec = json.loads((tmp_path / "interval_p3.json").read_text())
    assert rec["value"] == pytest.approx(8 / 27, rel=0.02)
    assert (tmp_path / "interval_p3.field").exists()
    assert (tmp_path / "interval_p3_log.csv").exists()


def test_compute_square_example(tmp_path):
    assert run("compute", "--domain", DOMAINS / "square.json", "--p", 2, "--a", 1,
               "--ladder", "0.2,0.1,0.05", "--out", tmp_path) == 0
    rec = json.loads((tmp_path / "square_p2.json").read_text())
    assert rec["value"] == pytest.approx(0.25, rel=0.05)
    lv = rec["ladder_values"]
    assert all(b <= a for a, b in zip(lv, lv[1:]))


def test_sweep_annulus_example(tmp_path):
    assert run("sweep", "--domain", DOMAINS / "annulus.json", "--grid", "1.5:3.5:0.2", "--a", 1,
               "--ladder", "0.3", "--fd-step", 0, "--out", tmp_path) == 0
    rows = read_sweep_csv(tmp_path / "annulus_sweep.csv")
    assert len(rows) == 11
    t = [r.transform for r in sorted(rows, key=lambda r: r.p)]
    assert all(b >= a * (1 - 1e-3) for a, b in zip(t, t[1:]))
    assert json.loads((tmp_path / "annulus_sweep_summary.json").read_text())["rows"] == 11
    assert (tmp_path / "annulus_p3.5.json").exists()


def test_sweep_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / str(k)
        assert run("sweep", "--domain", DOMAINS / "interval.json", "--grid", "1.5:2.5:0.5",
                   "--ladder", "0.0625,0.03125", "--seed", 3, "--out", out) == 0
        outs.append((out / "interval_sweep.csv").read_bytes())
    assert outs[0] == outs[1]
    rows = read_sweep_csv(tmp_path / "0" / "interval_sweep.csv")
    assert [r.p for r in rows] == [1.5, 2.0, 2.5]
    assert rows[0].dH_fd is not None and rows[1].field_distance is not None


def test_sweep_rejects_decreasing_grid(tmp_path):
    assert run("sweep", "--domain", DOMAINS / "interval.json", "--grid", "2,1.5",
               "--out", tmp_path) == 2
    assert run("sweep", "--domain", DOMAINS / "interval.json", "--grid", "1.02:2:0.5",
               "--out", tmp_path) == 2


def test_oracle_command(tmp_path):
    assert run("oracle", "--inner", 1, "--outer", 2, "--p", 2, "--out", tmp_path) == 0
    rec = json.loads((tmp_path / "annulus_1_2_p2_oracle.json").read_text())
    assert rec["source"] == "oracle" and rec["value"] == pytest.approx(0.2509, abs=1e-3)
    assert run("oracle", "--domain", DOMAINS / "interval.json", "--p", 2, "--out", tmp_path) == 0
    assert run("oracle", "--domain", DOMAINS / "square.json", "--p", 2, "--out", tmp_path) == 2
    assert run("oracle", "--p", 2, "--out", tmp_path) == 2


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert run("oracle", "--inner", 1, "--outer", 1.5, "--p", 2) == 0
    assert (tmp_path / "env" / "annulus_1_1.5_p2_oracle.json").exists()


def test_verify_exit_codes(monkeypatch, capsys):
    import hardyp.acceptance as acc

    monkeypatch.setattr(acc, "run_all", lambda stream=None: [Criterion(1, "x", True, "ok")])
    assert run("verify") == 0
    monkeypatch.setattr(acc, "run_all", lambda stream=None: [Criterion(1, "x", False, "bad")])
    assert run("verify") == 4
    assert "failing: [1]" in capsys.readouterr().out


def test_run_config_validation():
    cfg = cli.RunConfig(command="sweep", domain="d.json", grid=[1.5, 1.4], ladder=[0.1])
    with pytest.raises(cli.ValidationError, match="strictly increasing"):
        cfg.validate()
    assert cli.run(cfg) == 2
