import csv
import io
import json
import math
import subprocess

import pytest

from singmt.cli import main

MOEBIUS = '{"kind": "moebius", "c": 0.4}'


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_no_command_and_bad_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["eval", "--bogus"])
    assert info.value.code == 2


# -- eval -------------------------------------------------------------------------------

def test_eval_zero_profile(capsys, tmp_path):
    path = tmp_path / "z.csv"
    path.write_text("r,v\n0,0\n0.5,0\n1,0\n")
    code, out, _ = run(capsys, "eval", "--alpha", 12, "--beta", 0, "--profile", path)
    assert code == 0
    d = json.loads(out)
    assert d["F_disk"] == 0.0 and d["dirichlet_norm"] == 0.0


def test_eval_identity_map_matches_disk(capsys):
    code, out, _ = run(capsys, "eval", "--alpha", 6.0, "--beta", 1, "--moser", 0.01,
                       "--map", '{"kind": "scaling", "R": 1.0}')
    assert code == 0
    d = json.loads(out)
    assert d["F_domain"] == pytest.approx(d["F_disk"], rel=1e-14)
    assert abs(d["dirichlet_norm"] - 1) < 1e-12


def test_eval_montecarlo(capsys):
    code, out, _ = run(capsys, "eval", "--alpha", 2, "--beta", 0.5, "--moser", 0.3,
                       "--map", MOEBIUS, "--mc", 100000, "--seed", 4)
    d = json.loads(out)
    mc = d["F_domain_montecarlo"]
    assert code == 0 and mc["seed"] == 4
    assert abs(mc["estimate"] - d["F_domain"]) <= 4 * mc["stderr"]


def test_eval_malformed_row_names_line(capsys, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("r,v\n0,1\n0.5,abc\n1,0\n")
    code, _, err = run(capsys, "eval", "--alpha", 1, "--profile", path)
    assert code == 2
    assert f"{path}:3:" in err


@pytest.mark.parametrize("argv", [
    ["eval", "--alpha", 13, "--moser", 0.1],
    ["eval", "--alpha", 1, "--beta", 2, "--moser", 0.1],
    ["eval", "--alpha", 1, "--moser", 1.5],
    ["eval", "--alpha", 1],
    ["eval", "--moser", 0.1],
    ["eval", "--alpha", 1, "--profile", "/nonexistent.csv"],
    ["eval", "--alpha", 1, "--moser", 0.1, "--map", "{not json"],
    ["eval", "--alpha", 1, "--moser", 0.1, "--map", '{"kind": "spiral"}'],
    ["eval", "--alpha", 1, "--moser", 0.1, "--map", '{"kind": "power_series", "coeffs": [1, 0.6]}'],
    ["eval", "--beta", 1, "--moser", 0.1],
    ["eval", "--alpha", 1, "--moser", 0.1, "--threads", 0],
    ["eval", "--config", "/nonexistent.json", "--moser", 0.1],
])
def test_bad_input_exits_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err.startswith("error: ")


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": 2.0, "beta": 0.5, "map": {"kind": "scaling", "R": 2.0}}))
    _, out, _ = run(capsys, "eval", "--config", cfg, "--moser", 0.1)
    d = json.loads(out)
    assert d["alpha"] == 2.0 and d["map"]["R"] == 2.0
    _, out, _ = run(capsys, "eval", "--config", cfg, "--moser", 0.1, "--alpha", 3.0)
    assert json.loads(out)["alpha"] == 3.0
    cfg.write_text(json.dumps({"alpha": 1.0, "optimizer": {"grid_size": 3}}))
    assert run(capsys, "maximize", "--config", cfg)[0] == 2


# -- verify -----------------------------------------------------------------------------

def test_verify_defaults_pass(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--out", tmp_path)
    assert code == 0
    lines = out.strip().splitlines()
    assert all(line.startswith("PASS") for line in lines)
    reports = json.loads((tmp_path / "reports.json").read_text())
    assert len(reports) == len(lines)
    assert reports[-1]["details"]["n_failed"] == 0


def test_verify_identity_has_zero_slack_in_equality_cases(capsys, tmp_path):
    code, _, _ = run(capsys, "verify", "--map", '{"kind": "scaling", "R": 1.0}', "--out", tmp_path)
    assert code == 0
    for r in json.loads((tmp_path / "reports.json").read_text()):
        if r["name"].startswith("transplant"):
            assert abs(r["min_slack"]) <= 1e-12


def test_verify_rejects_non_univalent_map(capsys):
    code, _, err = run(capsys, "verify", "--map", '{"kind": "power_series", "coeffs": [1, 0.6]}')
    assert code == 2
    assert "univalent" in err


def test_verify_with_rearrangement(capsys):
    code, out, _ = run(capsys, "verify", "--alpha", math.pi, "--beta", 0.5, "--map", MOEBIUS,
                       "--rearrange", "--rearrange-grid", 256)
    assert code == 0
    assert "polya_szego" in out and "equimeasurability" in out


# -- experiments --------------------------------------------------------------------------

def test_gap_critical(capsys, tmp_path):
    code, out, _ = run(capsys, "gap", "--alpha", 4 * math.pi, "--beta", 0, "--out", tmp_path)
    assert code == 0
    d = json.loads(out)
    assert d["gap"] > 0
    rows = list(csv.reader((tmp_path / "moser_series.csv").open()))
    assert rows[0] == ["rho", "F_disk"] and len(rows) == 5


@pytest.mark.parametrize("rhos", [(1e-4, 1e-2, 1e-3), (0.5, 0.0), (2.0, 1e-2)])
def test_gap_rejects_bad_rhos(capsys, rhos):
    assert run(capsys, "gap", "--alpha", 1, "--rho", *rhos)[0] == 2


def test_verify_rejects_coarse_rearrangement_grid(capsys):
    assert run(capsys, "verify", "--map", MOEBIUS, "--rearrange", "--rearrange-grid", 128)[0] == 2


def test_ratio_identity(capsys, tmp_path):
    code, out, _ = run(capsys, "ratio", "--alpha", 2 * math.pi, "--beta", 1, "--out", tmp_path)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "ratio.csv").read_text())))
    assert [float(r["rho"]) for r in rows] == [1e-2, 1e-3, 1e-4]
    assert all(r["ratio"] == "1.0" for r in rows)
    assert out.strip().splitlines()[-1].startswith("# target")


def test_ratio_moebius(capsys):
    code, out, _ = run(capsys, "ratio", "--alpha", 2 * math.pi, "--beta", 1, "--map", MOEBIUS,
                       "--rho", 1e-2, 1e-4)
    rows = list(csv.DictReader(io.StringIO(out.split("#")[0])))
    assert code == 0
    assert float(rows[-1]["ratio"]) == pytest.approx(1.0, abs=0.01)


def test_maximize_two_starts_agree(capsys, tmp_path):
    code, out, _ = run(capsys, "maximize", "--alpha", math.pi, "--beta", 0.5, "--starts", 2,
                       "--seed", 1, "--out", tmp_path)
    assert code == 0
    d = json.loads(out)
    assert len(d["starts"]) == 2
    assert d["relative_spread"] <= 1e-6
    for name in ("maximize.json", "maximizer_profile.csv", "history.csv"):
        assert (tmp_path / name).exists()


def test_maximize_non_convergence_exits_1(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": 4 * math.pi, "optimizer": {"max_iter": 2}}))
    code, _, err = run(capsys, "maximize", "--config", cfg)
    assert code == 1
    assert "gradient_residual" in err


def test_sweep_in_input_order(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"params": [[1.0, 0.0], [2.0, 1.0], [0.5, 0.5]],
                               "optimizer": {"grid_size": 256}, "rho_list": [1e-2, 1e-3, 1e-4]}))
    code, out, _ = run(capsys, "sweep", "--config", cfg, "--threads", 3, "--out", tmp_path)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [(float(r["alpha"]), float(r["beta"])) for r in rows] == [(1.0, 0.0), (2.0, 1.0), (0.5, 0.5)]
    assert all(r["converged"] == "true" for r in rows)
    assert (tmp_path / "sweep.csv").read_text() == out


# -- determinism ----------------------------------------------------------------------------

@pytest.mark.parametrize("argv", [
    ["maximize", "--alpha", 2 * math.pi, "--beta", 1, "--starts", 2, "--seed", 3],
    ["eval", "--alpha", 1, "--beta", 0.5, "--moser", 0.1, "--map", MOEBIUS, "--mc", 20000, "--seed", 9],
])
def test_outputs_are_byte_identical(capsys, tmp_path, argv):
    a, b = tmp_path / "a", tmp_path / "b"
    run(capsys, *argv, "--out", a)
    run(capsys, *argv, "--out", b)
    files = sorted(p.name for p in a.iterdir())
    assert files and files == sorted(p.name for p in b.iterdir())
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_console_script():
    res = subprocess.run(["singmt", "eval", "--alpha", "13", "--moser", "0.1"],
                         capture_output=True, text=True)
    assert res.returncode == 2
    assert "error:" in res.stderr
