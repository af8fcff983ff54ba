import os
import subprocess
import sys

import numpy as np
import pytest

from lindchord import __version__
from lindchord.cli import main, shipped_scenarios
from lindchord.grid import read_psgrid

DAMPED = """
name = quick
system.kind = damped_oscillator
system.gamma = 0.2
state.kind = fock
state.fock = 1
times = 0, 1, 3
outputs.moments = q1^2, p1^2
outputs.purity = true
outputs.wigner = true
outputs.chord = true
outputs.positivity = true
positivity.t_max = 50
grid.count = 16
"""


@pytest.fixture
def scn(tmp_path):
    def write(text, name="quick.scn"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    return write


def read_table(path):
    lines = path.read_text().splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    body = [ln.split("\t") for ln in lines if not ln.startswith("#")]
    return header, body[0], body[1:]


def test_run_outputs(scn, tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--scenario", scn(DAMPED), "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert "quick_timeseries.tsv" in names and "quick_positivity.tsv" in names and "manifest.txt" in names
    assert {f"quick_{k}_t{i}.psgrid" for k in ("chord", "wigner") for i in range(3)} <= set(names)
    header, cols, rows = read_table(out / "quick_timeseries.tsv")
    assert header[0] == f"# lindchord {__version__}"
    assert header[1].startswith("# scenario quick sha256 ")
    assert cols == ["t", "<q1^2>", "<p1^2>", "purity", "E_l"]
    assert float(rows[0][1]) == pytest.approx(1.5)
    assert float(rows[2][0]) == 3.0
    g = read_psgrid(out / "quick_wigner_t0.psgrid")
    assert g.rep == "wigner" and g.values.shape == (16, 16)
    manifest = (out / "manifest.txt").read_text()
    assert "quick_wigner_t0.psgrid\t" in manifest and "sha256" in manifest


def test_positivity_command(scn, tmp_path, capsys):
    assert main(["positivity", "--scenario", scn(DAMPED), "--out", str(tmp_path)]) == 0
    line = capsys.readouterr().out
    t_p = float(line.split("t_p = ")[1].split()[0])
    assert t_p == pytest.approx(np.log(5) / 0.2, rel=1e-8)
    _, cols, rows = read_table(tmp_path / "quick_positivity.tsv")
    assert cols == ["threshold", "t_minus", "t_p", "t_plus"]


def test_spectrum_command(tmp_path, capsys):
    assert main(["spectrum", "--scenario", "chain40", "--out", str(tmp_path), "--order", "both"]) == 0
    text = capsys.readouterr().out
    assert "max defect" in text
    _, cols, rows = read_table(tmp_path / "chain40_spectrum.tsv")
    assert cols[-1] == "defect" and len(rows) == 80
    assert max(float(r[-1]) for r in rows) < 1e-4


def test_reduce_and_evolve_commands(tmp_path):
    assert main(["reduce", "--scenario", "figs_beating", "--out", str(tmp_path / "r")]) == 0
    names = {p.name for p in (tmp_path / "r").iterdir()}
    assert "figs_beating_gamma0_reduced2_t0.psgrid" in names
    assert not any("wigner" in n for n in names)
    g = read_psgrid(tmp_path / "r" / "figs_beating_gamma0_reduced2_t0.psgrid")
    assert g.values.min() < -0.05 / np.pi
    assert main(["evolve", "--scenario", "figs_beating", "--out", str(tmp_path / "e")]) == 0


def test_oracle_compare_command(scn, tmp_path, capsys):
    text = DAMPED.replace("grid.count = 16", "grid.count = 16\noracle.cutoff = 24")
    assert main(["oracle-compare", "--scenario", scn(text), "--out", str(tmp_path),
                 "--tolerance-profile", "fast"]) == 0
    worst = float(capsys.readouterr().out.split("deviation")[1])
    assert worst < 1e-5


def test_selftest(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 5 and all(ln.startswith("PASS") for ln in out)


def test_exit_codes(scn, tmp_path, capsys):
    bad = scn(DAMPED.replace("system.gamma = 0.2", "system.gamma = oops"), "bad.scn")
    assert main(["run", "--scenario", bad, "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "line 4" in err and "system.gamma" in err
    assert main(["run", "--scenario", str(tmp_path / "missing.scn"), "--out", str(tmp_path)]) == 2
    assert main(["run", "--out", str(tmp_path)]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--scenario", scn(DAMPED), "--out", str(blocker / "sub")]) == 4


def test_numeric_failure_exit_code_names_stage(scn, tmp_path, capsys):
    text = DAMPED.replace("state.fock = 1", "state.fock = 4") + "oracle.cutoff = 3\n"
    code = main(["oracle-compare", "--scenario", scn(text), "--out", str(tmp_path), "--tolerance-profile", "fast"])
    assert code == 3
    assert "stage 'oracle'" in capsys.readouterr().err


def test_env_vars_and_precedence(scn, tmp_path, monkeypatch):
    path = scn(DAMPED)
    monkeypatch.setenv("LINDCHORD_SCENARIO", path)
    monkeypatch.setenv("LINDCHORD_OUT", str(tmp_path / "env"))
    assert main(["evolve"]) == 0
    assert (tmp_path / "env" / "quick_timeseries.tsv").exists()
    assert main(["evolve", "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "quick_timeseries.tsv").exists()
    monkeypatch.setenv("LINDCHORD_TOLERANCE_PROFILE", "sloppy")
    assert main(["evolve"]) == 2
    assert main(["evolve", "--tolerance-profile", "fast", "--out", str(tmp_path / "f")]) == 0
    monkeypatch.setenv("LINDCHORD_THREADS", "many")
    assert main(["evolve", "--tolerance-profile", "fast"]) == 2


def test_threads_do_not_change_output(scn, tmp_path):
    path = scn(DAMPED)
    main(["evolve", "--scenario", path, "--out", str(tmp_path / "a")])
    main(["evolve", "--scenario", path, "--out", str(tmp_path / "b"), "--threads", "3"])
    assert (tmp_path / "a" / "manifest.txt").read_text() == (tmp_path / "b" / "manifest.txt").read_text()


def test_module_entry_point(tmp_path):
    env = dict(os.environ)
    r = subprocess.run([sys.executable, "-m", "lindchord", "--version"], capture_output=True, text=True, env=env)
    assert r.returncode == 0 and __version__ in r.stdout
    r = subprocess.run([sys.executable, "-m", "lindchord", "run", "--scenario", "co2", "--out", str(tmp_path)],
                       capture_output=True, text=True, env=env)
    assert r.returncode == 0
    assert (tmp_path / "co2_spectrum.tsv").exists()


def test_shipped_scenario_names():
    assert "figs_beating" in {p.stem for p in shipped_scenarios()}
