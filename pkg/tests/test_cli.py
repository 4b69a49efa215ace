import json

import pytest

from qchaos.cli import main, purity_range
from qchaos.io import read_sidecar, sidecar_path


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_oracle_check(capsys):
    code, out, _ = run(capsys, "oracle-check", "--n", "1000", "--seed", "7")
    rep = json.loads(out)
    assert code == 0 and rep["max_error"] < 1e-12


def test_fixed_points_reports_c3(capsys):
    code, out, _ = run(capsys, "fixed-points", "--eps", "0", "--unit", "deg")
    c3 = json.loads(out)["c3"]
    assert code == 0 and abs(c3["u"] - 0.639) < 5e-4 and abs(c3["w"] - 0.361) < 5e-4


def test_units_agree(capsys):
    _, a, _ = run(capsys, "critical-purity", "--eps", "4.5")
    _, b, _ = run(capsys, "critical-purity", "--eps", "5", "--unit", "pct")
    assert json.loads(a)["p_c"] == pytest.approx(json.loads(b)["p_c"], abs=1e-12)


def test_exit_codes(capsys, tmp_path):
    code, _, err = run(capsys, "basin", "--eps", "0", "--viewport", "1,-1,0,1", "--out", str(tmp_path / "x.ppm"))
    assert code == 2 and "usage" in err
    with pytest.raises(SystemExit) as exc:
        main(["basin", "--eps", "0"])
    assert exc.value.code == 2
    capsys.readouterr()
    code, _, err = run(capsys, "critical-purity", "--eps", "20")
    assert code == 1 and json.loads(err)["error"] == "NoC3"
    code, _, _ = run(capsys, "julia", "--eps", "0", "--mode", "full", "--depth", "30", "--out", str(tmp_path / "j.csv"))
    assert code == 2


def test_basin_outputs_and_replay(capsys, tmp_path):
    img, lab = tmp_path / "b.ppm", tmp_path / "b.csv"
    argv = ["basin", "--eps", "2", "--surface", "sphere", "--purity", "0.9", "--viewport=-2,2,-1.5,1.5", "--res", "40x30", "--out", str(img), "--labels", str(lab)]
    assert run(capsys, *argv)[0] == 0
    first = img.read_bytes(), lab.read_bytes()
    assert first[0].startswith(b"P6\n40 30\n255\n")
    side = read_sidecar(sidecar_path(img))
    assert side["command"] == "basin" and "--threads" not in side["argv"]
    img.unlink()
    lab.unlink()
    assert run(capsys, "replay", str(sidecar_path(img)))[0] == 0
    assert (img.read_bytes(), lab.read_bytes()) == first


def test_julia_csv(capsys, tmp_path):
    out = tmp_path / "j.csv"
    assert run(capsys, "julia", "--eps", "0", "--mode", "full", "--depth", "3", "--out", str(out))[0] == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 8


def test_montecarlo_json(capsys):
    code, out, _ = run(capsys, "montecarlo", "--eps", "0", "--n", "2000", "--seed", "1")
    rep = json.loads(out)
    assert code == 0 and rep["delta"] == 0 and {"eps", "delta", "purified_pct", "n", "seed"} <= rep.keys()


def test_thread_count_does_not_change_output(capsys, tmp_path):
    outs = []
    for t in ("1", "3"):
        p = tmp_path / f"m{t}.json"
        run(capsys, "montecarlo", "--eps", "4.5", "--n", "3000", "--seed", "4", "--threads", t, "--json-out", str(p))
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_purity_range():
    assert purity_range("0.625:1.0:0.025")[0] == 0.625
    assert len(purity_range("0.625:1.0:0.025")) == 16
    assert purity_range("0.7,0.8") == [0.7, 0.8]


def test_repro_figure_small(capsys, tmp_path):
    code, _, _ = run(capsys, "repro-figure", "--id", "2a", "--outdir", str(tmp_path), "--res", "32")
    assert code == 0 and any(tmp_path.iterdir())
