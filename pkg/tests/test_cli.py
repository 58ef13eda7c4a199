import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from torusbie.cli import main, parse_args
from torusbie.spectral import read_coeffs_csv

FAST = ["--mvartheta", "32", "--deterministic"]


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


def test_parse_valid_solve():
    args = parse_args(["solve", "--surface", "bagel", "--problem", "example1", "-n", "25", "-q", "2.3", "--mode", "banded"])
    assert (args.command, args.n, args.q, args.mode) == ("solve", 25, 2.3, "banded")


@pytest.mark.parametrize(
    "argv",
    [
        ["assemble", "--surface", "bagel", "-n", "0"],
        ["assemble", "--surface", "bagel", "-n", "3", "--bogus"],
        ["assemble", "-n", "3"],
        ["solve", "--surface", "bagel", "-n", "3"],
        ["potential", "--surface", "torus", "--problem", "harmonic_pole", "--pole", "10,0,0",
         "--point", "10,0,0", "-n", "3"],
        ["potential", "--surface", "torus", "--problem", "harmonic_pole", "-n", "3", "--point", "2,0,0"],
        ["experiment", "--surface", "bagel", "--problem", "example1", "--nlist", "5,3"],
        ["experiment", "--surface", "bagel", "--problem", "example1", "--nlist", "5,30", "--nref", "30"],
        ["decay", "--surface", "bagel", "-n", "2", "--max-distance", "9"],
        ["frobnicate"],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "usage" in capsys.readouterr().err


def test_runtime_error_exit_1(capsys):
    code, _ = run("solve", "--surface", "torus", "--problem", "harmonic_pole", "--pole", "2,0,0", "-n", "2", *FAST)
    assert code == 1
    assert "inside" in capsys.readouterr().err


def test_surface_validate():
    code, text = run("surface-validate", "--surface", "cruller", "--mtheta", "32", "--mvartheta", "64", "--samples", "16")
    assert code == 0
    assert "periodic=True" in text and "ok=True" in text


def test_assemble_solve_round_trip(tmp_path):
    mat = tmp_path / "m.bin"
    fused = tmp_path / "fused.csv"
    split = tmp_path / "split.csv"
    common = ["--surface", "bagel", "-n", "3", *FAST]
    assert run("assemble", *common, "--out", str(mat))[0] == 0
    assert run("solve", *common, "--problem", "example1", "--out", str(fused))[0] == 0
    code, text = run("solve", "--surface", "bagel", "--matrix", str(mat), "--problem", "example1",
                     "--out", str(split), "--cond")
    assert code == 0 and "cond=" in text
    a = read_coeffs_csv(fused).data
    b = read_coeffs_csv(split).data
    assert np.max(np.abs(a - b)) <= 1e-12


def test_banded_round_trip(tmp_path):
    mat = tmp_path / "m.bin"
    common = ["--surface", "cruller", "-n", "4", "-q", "1.0", "--mode", "banded", *FAST]
    assert run("assemble", *common, "--out", str(mat))[0] == 0
    fused, split = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("solve", *common, "--problem", "example2", "--out", str(fused))[0] == 0
    assert run("solve", "--surface", "cruller", "--matrix", str(mat), "--problem", "example2", "--out", str(split))[0] == 0
    assert np.max(np.abs(read_coeffs_csv(fused).data - read_coeffs_csv(split).data)) <= 1e-12


def test_experiment_deterministic_bytes(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        code, _ = run("experiment", "--surface", "bagel", "--problem", "example1", "--nlist", "2,4",
                      "--nref", "6", *FAST, "--out", str(path))
        assert code == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    rows = list(csv.reader(io.StringIO(outs[0].decode())))
    assert rows[0] == ["n", "e_n", "co", "cond", "e_trunc", "co_trunc", "cond_trunc", "cr"]
    assert [r[0] for r in rows[1:]] == ["2", "4"]


def test_decay_outputs(tmp_path):
    prof = tmp_path / "p.csv"
    code, text = run("decay", "--surface", "bagel", "-n", "2", *FAST, "--max-distance", "5", "--profiles", str(prof))
    assert code == 0
    lines = text.splitlines()
    assert lines[0] == "d,max_abs,mean_abs" and len(lines) == 7
    assert prof.read_text().splitlines()[0] == "index,radius,diagonal,anti_diagonal"


def test_potential_constant(tmp_path):
    code, text = run("potential", "--surface", "torus", "--problem", "constant", "-n", "2", "--mtheta", "128",
                     "--point", "2,0,0", "--point", "0,-2,0.2", *FAST)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 2
    for r in rows:
        assert float(r["u"]) == pytest.approx(1.0, abs=1e-6)


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# manifest\nsurface = bagel\nn = 3\nmvartheta = 32\ndeterministic = true\nproblem = example1\n")
    args = parse_args(["solve", "--config", str(cfg), "-n", "2"])
    assert (args.surface, args.n, args.mvartheta, args.deterministic) == ("bagel", 2, 32, True)
    cfg.write_text("colour = blue\n")
    with pytest.raises(SystemExit) as info:
        parse_args(["solve", "--config", str(cfg)])
    assert info.value.code == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "torusbie.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for verb in ("surface-validate", "assemble", "solve", "experiment", "decay", "potential"):
        assert verb in res.stdout
