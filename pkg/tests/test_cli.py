import csv
import json

import pytest

from maxlab.cli import main

TENT = '{"breakpoints":["-1","0","1"],"values":["0","1","0"]}'


@pytest.fixture
def tent_file(tmp_path):
    p = tmp_path / "tent.json"
    p.write_text(TENT)
    return str(p)


def test_maximal_row_count(tent_file, tmp_path):
    out = tmp_path / "m.csv"
    assert main(["maximal", "--op", "M", "--grid", "-4:4:0.01", tent_file, "-o", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert len(rows) == 802 and rows[0][0] == "x"


def test_maximal_m2_radii(tent_file, tmp_path):
    out = tmp_path / "m2.csv"
    assert main(["maximal", "--op", "M2", "--partition", "0", "--grid", "-4:4:0.01", tent_file, "-o", str(out)]) == 0
    for row in csv.DictReader(out.open()):
        assert float(row["radius"]) >= abs(float(row["x"])) - 1e-12


def test_missing_file_is_io_error(tmp_path):
    assert main(["maximal", str(tmp_path / "nope.json")]) == 3


def test_malformed_function_is_validation_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"breakpoints":["0","1"],"values":["0","1"]}')
    assert main(["maximal", str(p)]) == 2
    p.write_text("{not json")
    assert main(["maximal", str(p)]) == 2


def test_m2_needs_partition(tent_file):
    assert main(["maximal", "--op", "M2", tent_file]) == 2


def test_continuity_outputs(tent_file, tmp_path):
    d = tmp_path / "run"
    assert main(["continuity", tent_file, "--kind", "bump", "--out-dir", str(d), "--svg"]) == 0
    data = json.loads((d / "continuity.json").read_text())
    assert data["passed"] and data["config"]["kind"] == "bump"
    gaps = [r["derivative_gap"] for r in data["records"]]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert (d / "continuity.svg").read_text().startswith("<svg")
    rows = list(csv.reader((d / "continuity.csv").open()))
    assert len(rows) == 8


def test_continuity_identity_and_bad_j(tent_file, tmp_path):
    d = tmp_path / "id"
    assert main(["continuity", tent_file, "--kind", "identity", "--j", "1,2", "--out-dir", str(d)]) == 0
    data = json.loads((d / "continuity.json").read_text())
    assert all(r["derivative_gap"] == 0 for r in data["records"])
    assert main(["continuity", tent_file, "--j", "4,2"]) == 2
    assert main(["continuity", tent_file, "--j", "0,1"]) == 2


def test_outputs_are_byte_identical(tent_file, tmp_path):
    runs = []
    for _ in range(2):
        a = tmp_path / "a.json"
        assert main(["verify", tent_file, "--which", "decomposition", "-o", str(a)]) == 0
        c = tmp_path / "c.csv"
        assert main(["maximal", "--op", "Mu", "--grid", "-2:2:1/8", tent_file, "-o", str(c)]) == 0
        d = tmp_path / "run"
        assert main(["continuity", tent_file, "--j", "1,64", "--out-dir", str(d)]) == 0
        runs.append([a.read_bytes(), c.read_bytes(), (d / "continuity.json").read_bytes(),
                     (d / "continuity.csv").read_bytes()])
    assert runs[0] == runs[1]


@pytest.mark.parametrize("which", ["decomposition", "m1", "m2", "luiro", "oracle", "tails", "points"])
def test_verify_all(which, tent_file, tmp_path):
    out = tmp_path / f"{which}.json"
    assert main(["verify", tent_file, "--which", which, "--points", "20", "-o", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["passed"] and data["which"] == which and "config" in data


def test_verify_unknown(tent_file):
    assert main(["verify", tent_file, "--which", "bogus"]) == 2


def test_invalid_region_is_validation_error(tent_file):
    assert main(["verify", tent_file, "--which", "m2", "--partition", "0,1/4", "--delta", "1/4"]) == 2


def test_failed_check_exit_code(tent_file, tmp_path, capsys):
    # a finite difference with h = 1/2 is far too coarse to match Luiro's formula
    out = tmp_path / "l.json"
    assert main(["verify", tent_file, "--which", "luiro", "--h", "1/2", "-o", str(out)]) == 1
    data = json.loads(out.read_text())
    assert not data["passed"] and data["failures"]
    assert "failed" in capsys.readouterr().err


def test_approx_and_perturb(tent_file, tmp_path):
    out = tmp_path / "g.json"
    assert main(["approx", tent_file, "--epsilon", "3", "--coarsen", "-o", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["error"] == "2"
    p = tmp_path / "f2.json"
    assert main(["perturb", tent_file, "--kind", "bump", "--j", "2", "-o", str(p)]) == 0
    f2 = json.loads(p.read_text())
    assert f2["values"][2] == "3/2"
    assert main(["perturb", tent_file, "--kind", "bump", "--j", "0"]) == 2


def test_derivative_report(tent_file, tmp_path):
    p = tmp_path / "f2.json"
    main(["perturb", tent_file, "--kind", "bump", "--j", "4", "-o", str(p)])
    rep = tmp_path / "d.json"
    code = main(["derivative", tent_file, "--op", "M2", "--partition", "0", "--grid", "-3:3:1/20",
                 "--against", str(p), "--delta", "1/4", "--K", "4", "--report", str(rep), "-o", str(tmp_path / "d.csv")])
    assert code == 0
    data = json.loads(rep.read_text())
    assert set(data["distance"]) == {"distance", "skipped_measure", "grid_step", "region"}
    assert data["distance"]["distance"] > 0
