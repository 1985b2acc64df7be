from __future__ import annotations

import subprocess
import sys
from pathlib import Path

import pytest

from spbft.cli import EXIT_DOMAIN, EXIT_IO, EXIT_SCENARIO, main
from spbft.sr_link import SrLinkParams, min_spreading_factor

GOLDEN = Path(__file__).parent / "golden"


def field(out: str, name: str) -> str:
    for line in out.splitlines():
        if line.startswith(name + " "):
            return line.split()[1]
    raise KeyError(name)


def test_linkcalc_report(capsys):
    assert main(["linkcalc", "--gamma-d-db", "20", "--delta-gamma", "0.1", "--antennas", "4"]) == 0
    out = capsys.readouterr().out
    assert float(field(out, "gamma_d")) == pytest.approx(100.0)
    assert float(field(out, "gamma_p")) == pytest.approx(110.0)
    assert float(field(out, "K_min")) == min_spreading_factor(SrLinkParams(100.0, 0.1, 4))


def test_linkcalc_domain_error(capsys):
    assert main(["linkcalc", "--gamma-d-db", "20", "--delta-gamma", "1.2"]) == EXIT_DOMAIN
    assert capsys.readouterr().err.startswith("error[domain]:")


def test_security_command(capsys):
    assert main(["security", "--n", "4", "--pe", "0.99", "--ps", "0.9", "--simulate", "--trials", "2000"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[1].startswith("pbft") and out[2].startswith("spbft")
    assert float(out[2].split()[1]) == pytest.approx(0.99853008, abs=1e-8)


def test_security_rejects_bad_n(capsys):
    assert main(["security", "--n", "5", "--pe", "0.9", "--ps", "0.8"]) == EXIT_DOMAIN
    assert "error[config]" in capsys.readouterr().err


def test_energy_command(capsys):
    assert main(["energy", "--n", "4", "--pt-dbm", "30"]) == 0
    out = capsys.readouterr().out
    assert "pbft      3.0 9.0 12.0 4.0 28.0" in out
    assert "spbft     3.0 6.0 6.0 0.0 15.0" in out
    assert float(field(out, "savings_ratio")) == pytest.approx(13 / 28)


def test_schedule_command(capsys):
    assert main(["schedule", "--n", "4"]) == 0
    assert capsys.readouterr().out == (GOLDEN / "schedule_n4.txt").read_text()


def test_sweep_command_writes_csv_and_script(tmp_path, capsys):
    scenario = tmp_path / "s.ini"
    scenario.write_text("[sweep]\nnodes = 4, 5\ntrials = 0\n")
    out, plot = tmp_path / "out.csv", tmp_path / "plot.gp"
    assert main(["sweep", str(scenario), "--out", str(out), "--gnuplot", str(plot)]) == 0
    assert len(out.read_text().splitlines()) == 1 + 4
    assert str(out) in plot.read_text()
    assert "skipping n=5" in capsys.readouterr().err


def test_sweep_errors(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[sweep]\nnodez = 4\n")
    assert main(["sweep", str(bad)]) == EXIT_SCENARIO
    err = capsys.readouterr().err
    assert err.startswith("error[scenario]:") and "bad.ini:2" in err
    ok = tmp_path / "ok.ini"
    ok.write_text("[sweep]\nnodes = 4\ntrials = 0\n")
    assert main(["sweep", str(ok), "--out", str(tmp_path / "missing" / "x.csv")]) == EXIT_IO


def test_interpret_command(capsys):
    assert main(["interpret", "--nodes", "4", "--trials", "20000"]) == 0
    out = capsys.readouterr().out
    assert "readings in force" in out and "exactly-one" in out


def test_usage_error_exits_two():
    with pytest.raises(SystemExit) as info:
        main(["linkcalc"])
    assert info.value.code == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "spbft.cli", "energy", "--n", "7"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "savings_ratio" in proc.stdout
