from __future__ import annotations

import io
import json
import math
from pathlib import Path

import pytest

from spbft.protocol import Protocol
from spbft.scenario import ScenarioError, ScenarioFile, load_scenario, parse_scenario
from spbft.sweep import COLUMNS, gnuplot_script, read_csv, run_sweep

GOLDEN = Path(__file__).parent / "golden"


def test_defaults_cover_reference_grid():
    plan = ScenarioFile()
    assert plan.nodes == tuple(range(4, 101, 3))
    assert [(s.p_s, s.p_e) for s in plan.scenarios] == [(0.9, 0.99), (0.8, 0.9)]
    assert plan.p_t == pytest.approx(1.0)
    assert plan.t1 == plan.t2 == pytest.approx(0.08192)


def test_parse_full_file():
    plan = load_scenario(GOLDEN / "golden.ini")
    assert plan.nodes == (4, 7, 10, 13)
    assert plan.protocols == (Protocol.PBFT, Protocol.SPBFT)
    assert [s.name for s in plan.scenarios] == ["high", "low"]
    assert plan.trials == 100_000 and plan.seed == 42


def test_range_keys_and_explicit_delays():
    plan = parse_scenario("[sweep]\nn_min = 4\nn_max = 16\nn_step = 6\nt1 = 0.5\nt2 = 0.25\npt_dbm = 20\n")
    assert plan.nodes == (4, 10, 16)
    assert (plan.t1, plan.t2) == (0.5, 0.25)
    assert plan.p_t == pytest.approx(0.1)


@pytest.mark.parametrize(
    "text,line,key",
    [
        ("[sweep]\nnodes = 4\nbogus = 1\n", 3, "bogus"),
        ("[sweep]\ntrials = many\n", 2, "trials"),
        ("[sweep]\nrescue = sometimes\n", 2, "rescue"),
        ("[scenario x]\np_s = 0.95\np_e = 0.9\n", 2, "p_s"),
        ("[scenario x]\np_s = 1.5\np_e = 0.9\n", 2, "p_s"),
        ("\n[plots]\nx = 1\n", 2, None),
        ("[sweep]\nt1 = 1\nmessage_bits = 8\n", 2, "t1"),
        ("[sweep]\ntrials = -1\n", 2, "trials"),
    ],
)
def test_malformed_scenarios_report_location(text, line, key):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text, "s.ini")
    assert info.value.line == line
    assert info.value.key == key
    assert str(info.value).startswith(f"s.ini:{line}:")


def test_missing_file_is_a_scenario_error(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "nope.ini")


def test_bad_n_is_skipped_with_warning():
    plan = parse_scenario("[sweep]\nnodes = 4, 5, 7\ntrials = 0\n")
    with pytest.warns(UserWarning, match="n=5"):
        rows = run_sweep(plan).rows
    assert sorted({r["n"] for r in rows}) == [4, 7]


def test_empty_node_range_gives_header_only():
    result = run_sweep(parse_scenario("[sweep]\nn_min = 10\nn_max = 4\n"))
    assert result.to_csv() == ",".join(COLUMNS) + "\n"


def test_schema_file_matches_header():
    schema = json.loads((Path(__file__).parents[1] / "src/spbft/sweep_schema.json").read_text())
    assert tuple(c["name"] for c in schema["columns"]) == COLUMNS
    assert GOLDEN.joinpath("sweep_golden.csv").read_text().splitlines()[0] == ",".join(COLUMNS)


def test_analytic_only_rows_and_energy_uses_watts():
    plan = parse_scenario("[sweep]\nnodes = 4\ntrials = 0\nt1 = 1\nt2 = 1\npt_dbm = 30\n[scenario a]\np_s=0.9\np_e=0.99\n")
    pbft, spbft = run_sweep(plan).rows
    assert pbft["simulated_security"] is None
    assert pbft["e_total"] == pytest.approx(28.0)
    assert spbft["e_total"] == pytest.approx(15.0)
    assert spbft["reliability_gain"] == pytest.approx(math.log10(spbft["analytic_security"]))


def test_csv_round_trip_is_exact():
    text = (GOLDEN / "sweep_golden.csv").read_text()
    rows = read_csv(io.StringIO(text))
    assert len(rows) == 16
    analytic_only = (GOLDEN / "golden.ini").read_text().replace("trials = 100000", "trials = 0")
    fresh = run_sweep(parse_scenario(analytic_only))
    for parsed, row in zip(rows, fresh.rows):
        for key in ("scenario", "n", "analytic_security", "reliability_gain", "e_total", "savings_ratio", "p_t", "t1"):
            assert parsed[key] == row[key]
    assert rows[0]["trials"] == 100_000


def test_golden_sweep_is_byte_identical():
    plan = load_scenario(GOLDEN / "golden.ini")
    assert run_sweep(plan).to_csv() == (GOLDEN / "sweep_golden.csv").read_text()


def test_parallel_sweep_matches_serial():
    plan = parse_scenario("[sweep]\nnodes = 4, 7\ntrials = 20000\nseed = 9\n")
    assert run_sweep(plan, workers=1).to_csv() == run_sweep(plan, workers=3).to_csv()


def test_gnuplot_script_references_columns():
    script = gnuplot_script("out.csv")
    assert "'out.csv'" in script
    assert sum(line.startswith("plot ") for line in script.splitlines()) == 3
