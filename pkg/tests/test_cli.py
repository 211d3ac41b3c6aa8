import json
import subprocess
import sys

import pytest

from biharm import cli


def run_json(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if code == 0 and out.strip().startswith("{") else None)


def test_shoot(capsys):
    code, doc = run_json(capsys, "shoot", "--q", "2", "--beta", "0")
    assert code == 0 and doc["outcome"]["kind"] == "Extinct"
    assert doc["metadata"]["command"] == "shoot" and doc["metadata"]["args"]["q"] == 2.0
    code, doc = run_json(capsys, "shoot", "--q", "2", "--beta", "1000", "--r-target", "1e3")
    assert doc["outcome"]["kind"] == "Global"


def test_exit_codes(capsys):
    assert cli.main(["shoot", "--q", "-1", "--beta", "1"]) == cli.EXIT_PRECONDITION
    assert cli.main(["beta-star", "--q", "2", "--tol", "0"]) == cli.EXIT_PRECONDITION
    assert cli.main(["modes", "--k", "0..0", "--solve"]) == cli.EXIT_PRECONDITION
    assert cli.main(["shoot", "--q", "2"]) == cli.EXIT_PRECONDITION
    assert cli.main(["frobnicate"]) == cli.EXIT_PRECONDITION
    assert cli.main(["shoot", "--q", "2", "--beta", "4", "--max-steps", "10"]) == cli.EXIT_NUMERICAL
    assert cli.main(["beta-star", "--q", "2", "--lo", "5", "--hi", "10"]) == cli.EXIT_PRECONDITION
    assert cli.main(["classify-regime", "--q", "2"]) == cli.EXIT_PRECONDITION
    capsys.readouterr()


@pytest.mark.parametrize("q", ["2", "5"])
def test_beta_star(capsys, q, golden):
    code, doc = run_json(capsys, "beta-star", "--q", q)
    cert = doc["certificate"]
    assert code == 0 and cert["width"] <= 1e-6
    g_lo, g_hi = golden["horizon_1e3"][q]
    assert cert["beta_lo"] <= g_hi and cert["beta_hi"] >= g_lo


def test_classify_regime(capsys):
    code, doc = run_json(capsys, "classify-regime", "--q", "2", "--minimal")
    assert doc["report"]["label"] == "MinimalSub3" and abs(doc["report"]["p"] - 4 / 3) < 0.05
    code, doc = run_json(capsys, "classify-regime", "--q", "5", "--minimal")
    rep = doc["report"]
    assert rep["label"] == "MinimalSuper3" and rep["L_hat"] > 0 and abs(rep["sigma"] - 1) < 0.15
    beta = 2 * rep["extras"]["beta_hi"]
    code, doc = run_json(capsys, "classify-regime", "--q", "5", "--beta", repr(beta))
    assert doc["report"]["label"] == "NonMinimal" and abs(doc["report"]["p"] - 2) < 0.05


def test_verify_transform(capsys, tmp_path):
    k, e = tmp_path / "k.csv", tmp_path / "e.csv"
    code, doc = run_json(
        capsys, "verify-transform", "--q", "2", "--beta", "4", "--r-target", "1e3",
        "--window", "10", "500", "--kelvin-csv", str(k), "--emden-csv", str(e),
    )
    assert code == 0 and doc["passed"] and doc["L_source"] == "u/r at horizon"
    assert "s,vbar" in k.read_text() and "t,zbar" in e.read_text()
    assert k.read_text().startswith("# tool: biharm")
    code, doc = run_json(capsys, "verify-transform", "--q", "5", "--minimal")
    assert doc["passed"] and doc["L_source"] == "fitted"


def test_modes(capsys, tmp_path):
    code, doc = run_json(capsys, "modes", "--k", "1..10")
    assert [row["k"] for row in doc["spectrum"]] == list(range(1, 11))
    assert doc["spectrum"][9]["roots_mu"] == [-12, -10, 9, 11]
    path = tmp_path / "z.csv"
    code, doc = run_json(capsys, "modes", "--solve", "--k", "2", "--a", "5", "--csv", str(path))
    assert abs(doc["solutions"][0]["rate"] - 2) < 1e-2
    assert "t,z" in path.read_text().splitlines()


def test_shoot_csv_has_metadata(capsys, tmp_path):
    path = tmp_path / "t.csv"
    assert cli.main(["shoot", "--q", "2", "--beta", "4", "--csv", str(path)]) == 0
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# tool: biharm") and any(ln.startswith("# rel_tol:") for ln in lines)
    assert "r,u,du,v,dv" in lines
    capsys.readouterr()


@pytest.mark.parametrize(
    "argv",
    [
        ["beta-star", "--q", "3", "--tol", "1e-8"],
        ["classify-regime", "--q", "5", "--minimal", "--theta", "0.3"],
        ["modes", "--k", "2..4", "--solve", "--a", "7.5"],
    ],
)
def test_from_json_replays_bit_for_bit(capsys, tmp_path, argv):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(argv + ["-o", str(first)]) == 0
    assert cli.main([argv[0], "--from-json", str(first), "-o", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    capsys.readouterr()


def test_from_json_command_must_match(capsys, tmp_path):
    path = tmp_path / "a.json"
    assert cli.main(["modes", "--k", "1..2", "-o", str(path)]) == 0
    assert cli.main(["shoot", "--from-json", str(path)]) == cli.EXIT_PRECONDITION
    capsys.readouterr()


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# shooting run\nq = 2\nbeta = 0\nr-target = 1e3\n")
    code, doc = run_json(capsys, "shoot", "--config", str(cfg))
    assert doc["outcome"]["kind"] == "Extinct"
    code, doc = run_json(capsys, "shoot", "--config", str(cfg), "--beta", "1000")
    assert doc["outcome"]["kind"] == "Global" and doc["metadata"]["args"]["beta"] == 1000.0
    bad = tmp_path / "bad.cfg"
    bad.write_text("q 2\n")
    assert cli.main(["shoot", "--config", str(bad)]) == cli.EXIT_PRECONDITION
    assert cli.main(["shoot", "--config", str(tmp_path / "missing.cfg")]) == cli.EXIT_PRECONDITION
    capsys.readouterr()


def test_sweep_csv(capsys, tmp_path):
    path = tmp_path / "sweep.csv"
    assert cli.main(["sweep", "--q", "2,5", "--beta", "minimal,2x,0.1", "--csv", str(path), "--workers", "2"]) == 0
    capsys.readouterr()
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    assert lines[0] == "q,beta,label,p,L_hat,sigma,window_lo,window_hi"
    labels = [ln.split(",")[2] for ln in lines[1:]]
    assert labels == ["MinimalSub3", "NonMinimal", "Extinct", "MinimalSuper3", "NonMinimal", "Extinct"]
    assert cli.main(["sweep", "--q", "2", "--beta", "lots"]) == cli.EXIT_PRECONDITION


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "biharm.cli", "modes", "--k", "1"], capture_output=True, text=True)
    assert out.returncode == 0 and json.loads(out.stdout)["spectrum"][0]["roots_mu"] == [-3, -1, 0, 2]
    out = subprocess.run([sys.executable, "-m", "biharm.cli", "shoot", "--q", "-1", "--beta", "1"], capture_output=True)
    assert out.returncode == 2
