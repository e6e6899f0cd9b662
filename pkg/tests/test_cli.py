import json
import subprocess
import sys

import pytest

from feigmarkov import verify
from feigmarkov.cli import main
from feigmarkov.core import save_map


@pytest.fixture(scope="module")
def map_file(m, tmp_path_factory):
    p = tmp_path_factory.mktemp("cli") / "map.json"
    save_map(m, p)
    return str(p)


def test_solve_then_verify_core(tmp_path):
    out = tmp_path / "m.json"
    r = subprocess.run([sys.executable, "-m", "feigmarkov", "solve", "--r", "2", "--out", str(out)],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert "alpha = -2.5029078" in r.stdout
    rep = tmp_path / "r.json"
    r = subprocess.run([sys.executable, "-m", "feigmarkov", "verify", "--map", str(out),
                        "--suite", "core", "--report", str(rep)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert json.loads(rep.read_text())["ok"] is True


@pytest.mark.parametrize("argv", [
    ["curve", "--depth", "0"],
    ["curve", "--scales", "3..1"],
    ["curve", "--scales", "a..b"],
    ["dim", "--max-depth", "1"],
    ["solve", "--r", "3", "--out", "x.json"],
    ["tiles", "--max-pieces", "0"],
    ["rays", "--point", "1"],
    ["verify", "--suite", "everything"],
    [],
])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as e:
        main(argv)
    assert e.value.code == 2


def test_missing_map_exits_2(tmp_path, capsys):
    assert main(["curve", "--map", str(tmp_path / "none.json"), "--depth", "2"]) == 2
    assert "error" in capsys.readouterr().err


def test_curve_outputs_are_deterministic(map_file, tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    svg = tmp_path / "l.svg"
    assert main(["curve", "--map", map_file, "--depth", "4", "--scales", "-1..1", "--csv", str(a),
                 "--svg", str(svg)]) == 0
    assert main(["curve", "--map", map_file, "--depth", "4", "--scales", "-1..1", "--csv", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "re,im,address" and len(lines) == 1 + 3 * 81 + 1
    assert svg.read_text().startswith("<svg")
    assert "vertices" in capsys.readouterr().out


def test_failed_check_exits_1_and_names_it(map_file, monkeypatch, capsys):
    def fake(m, suite, seed):
        rep = verify.VerificationReport(suite, seed)
        rep.add("good", "holds", True, {})
        rep.add("broken_bound", "does not hold", False, {"v": 1.0}, 0.5)
        return rep
    monkeypatch.setattr(verify, "run_suite", fake)
    assert main(["verify", "--map", map_file, "--suite", "core"]) == 1
    err = capsys.readouterr().err
    assert "broken_bound" in err and "good" not in err


def test_tiles(map_file, tmp_path, capsys):
    census = tmp_path / "c.json"
    svg = tmp_path / "t.svg"
    assert main(["tiles", "--map", map_file, "--depth", "4", "--max-pieces", "40",
                 "--census", str(census), "--svg", str(svg)]) == 0
    data = json.loads(census.read_text())
    assert len(data) == 40
    assert "coverage" in capsys.readouterr().out
    assert svg.read_text().count("<path") == 40


def test_rays_snaps_to_a_base_point(map_file, tmp_path, capsys):
    svg = tmp_path / "r.svg"
    assert main(["rays", "--map", map_file, "--point", "-0.3,0.01", "--depth", "2", "--svg", str(svg)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("ray to -0.332560077")
    assert svg.exists()
