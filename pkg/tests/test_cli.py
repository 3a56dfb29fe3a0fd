import json
import subprocess
import sys

import pytest

from hcma.cli import main

FOLIATE = ["foliate", "--model", "quadric-like", "--lambda", "0.02", "--modes", "16",
           "--grid", "0,0.2", "--levi", "--tangency"]


def _files(d):
    return sorted(p.name for p in d.iterdir())


def test_tube_entire_ok(tmp_path, capsys):
    rc = main(["tube", "--metric", "round", "--geodesics", "2", "--tau-ceiling", "6", "--expect", "entire",
               "--out", str(tmp_path)])
    assert rc == 0
    rep = json.loads((tmp_path / "tube_report.json").read_text())
    assert rep["schema"] == 1 and rep["entire_flag"] and rep["passed"]
    meta = json.loads((tmp_path / "tube_report.meta.json").read_text())
    assert meta["argv"][0] == "tube" and meta["backend"] in ("numba", "numpy")
    assert "ok" in capsys.readouterr().out


def test_failed_expectation_exits_one(tmp_path):
    rc = main(["tube", "--metric", "zoll", "--zoll-eps", "0.2", "--geodesics", "2", "--expect", "entire",
               "--out", str(tmp_path)])
    assert rc == 1
    assert json.loads((tmp_path / "tube_report.json").read_text())["passed"] is False


@pytest.mark.parametrize("argv", [
    ["tube", "--n-sigma", "20"],
    ["tube", "--metric", "zoll", "--zoll-eps", "0.7"],
    ["tube", "--tau-ceiling", "-1"],
    ["tube", "--metric", "torus"],
    ["foliate", "--modes", "4"],
    ["flow", "--n-out", "1"],
    ["bogus"],
])
def test_bad_configuration_exits_two(tmp_path, argv, capsys):
    assert main(argv + ["--out", str(tmp_path)] if argv != ["bogus"] else argv) == 2
    assert not list(tmp_path.iterdir())


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# round sphere\nmetric = round\ngeodesics = 1\ntau-ceiling = 3\n")
    out = tmp_path / "o"
    assert main(["tube", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads((out / "tube_report.json").read_text())
    assert rep["config"]["geodesics"] == 1 and rep["tau_ceiling"] == 3
    # explicit flags override the file
    assert main(["tube", "--config", str(cfg), "--geodesics", "2", "--out", str(out)]) == 0
    assert json.loads((out / "tube_report.json").read_text())["config"]["geodesics"] == 2
    cfg.write_text("colour = blue\n")
    assert main(["tube", "--config", str(cfg), "--out", str(out)]) == 2
    cfg.write_text("geodesics 3\n")
    assert main(["tube", "--config", str(cfg), "--out", str(out)]) == 2
    assert main(["tube", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_flow_outputs(tmp_path):
    assert main(["flow", "--field", "eta", "--t-end", "1", "--n-out", "11", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "flow_eta.json").read_text())
    assert rep["passed"] and abs(rep["period"] - 12.566370614359172) < 1e-9
    assert (tmp_path / "flow_eta.csv").read_text().startswith("t,re_z1")


def test_foliate_is_deterministic_and_replayable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(FOLIATE + ["--traces", "--out", str(a)]) == 0
    assert main(FOLIATE + ["--traces", "--out", str(b)]) == 0
    for name in ("chart.json", "foliate_report.json", "leaf_00.csv", "leaf_01.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert not [n for n in _files(a) if n.startswith(".") or n.endswith(".tmp")]
    rep = json.loads((a / "foliate_report.json").read_text())
    assert all(rep["reports"]["checks"].values())

    v = tmp_path / "v"
    assert main(["verify", "--chart", str(a / "chart.json"), "--levi", "--tangency", "--out", str(v)]) == 0
    ver = json.loads((v / "verify_report.json").read_text())
    assert ver["passed"]
    assert ver["reports"]["levi"] == rep["reports"]["levi"]


def test_verify_rejects_bad_chart(tmp_path):
    bad = tmp_path / "chart.json"
    bad.write_text(json.dumps({"schema": 7}))
    assert main(["verify", "--chart", str(bad), "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "hcma", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip()
