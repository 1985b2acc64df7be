"""Acceptance criteria; each test records one PASS/FAIL line shown in the terminal summary.

Tolerances are fixed here and must not be loosened to make a criterion pass.
"""

from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import mp_min_spreading_factor, mp_q
from spbft.energy import pbft_energy, savings_ratio, spbft_energy
from spbft.protocol import ProtocolConfig, Role, Stage, band_usage, full_schedule, max_faulty, message_counts, role_schedule
from spbft.scenario import load_scenario
from spbft.security import SecurityInputs, pbft_security_baseline, spbft_security
from spbft.sr_link import SrLinkParams, min_spreading_factor, q_function
from spbft.sweep import interpretation_report, run_sweep

GOLDEN = Path(__file__).parent / "golden"
NODES = tuple(range(4, 101, 3))
HIGH, LOW = (0.9, 0.99), (0.8, 0.9)

ENERGY_REL_TOL = 1e-12
SAVINGS_BAND = (0.09, 0.11)
PEAK_BAND = (0.45, 0.60)
MC_SIGMAS = 3.0
MC_TRIALS = 1_000_000
R2_MIN = 0.98
SR_REL_TOL = 1e-6
Q_REL_TOL = 1e-12


def record(number: int, ok: bool, detail: str, started: float) -> None:
    verdict = "PASS" if ok else "FAIL"
    ACCEPTANCE_LINES.append(f"criterion {number:>2}: {verdict}  {detail}  ({time.perf_counter() - started:.2f} s)")
    assert ok, detail


def test_criterion_01_quorum_bound():
    t = time.perf_counter()
    bad = [n for n in range(4, 1001) if max_faulty(n) != (n - 1) // 3 or 3 * max_faulty(n) + 1 > n]
    record(1, not bad, f"max_faulty = floor((n-1)/3) for n in [4, 1000]; mismatches={bad[:5]}", t)


def test_criterion_02_energy_closed_forms():
    t = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for n in range(4, 101, 3):
        for _ in range(5):
            t1, t2, pt = (float(v) for v in 10.0 ** rng.uniform(-3, 0, size=3))
            config = ProtocolConfig(n, 0.9, 0.99, t1, t2, pt)
            base = (n - 1) * t1 * pt + (n - 1) ** 2 * t1 * pt + n * (n - 1) * t1 * pt + n * t2 * pt
            symb = (2 * n * n - 5 * n + 3) * t1 * pt
            worst = max(worst, abs(pbft_energy(config).e_total / base - 1), abs(spbft_energy(config).e_total / symb - 1))
    record(2, worst <= ENERGY_REL_TOL, f"worst relative error {worst:.2e} (tol {ENERGY_REL_TOL:g})", t)


def test_criterion_03_energy_saving():
    t = time.perf_counter()
    curve = {n: savings_ratio(ProtocolConfig(n, 0.9, 0.99, 1.0, 1.0, 1.0)) for n in NODES}
    hits = [n for n in (19, 22) if SAVINGS_BAND[0] <= curve[n] <= SAVINGS_BAND[1]]
    positive = all(v > 0 for v in curve.values())
    shown = " ".join(f"{n}:{curve[n]:.4f}" for n in NODES)
    ok = bool(hits) and positive
    record(3, ok, f"ratio n=19 {curve[19]:.5f}, n=22 {curve[22]:.5f}; in band at {hits}; all positive={positive}; "
                  f"curve {shown}", t)


def test_criterion_04_security_ordering():
    t = time.perf_counter()
    violations = []
    for ps, pe in (HIGH, LOW):
        for n in NODES:
            inputs = SecurityInputs.for_n(n, pe, ps)
            if spbft_security(inputs).p_total < pbft_security_baseline(inputs).p_total:
                violations.append((ps, pe, n))
    record(4, not violations, f"S-PBFT >= PBFT on {2 * len(NODES)} points; violations={violations}", t)


def test_criterion_05_peak_improvement():
    t = time.perf_counter()
    ps, pe = LOW
    diffs = {}
    for n in NODES:
        inputs = SecurityInputs.for_n(n, pe, ps)
        diffs[n] = spbft_security(inputs).p_total - pbft_security_baseline(inputs).p_total
    n_peak = max(diffs, key=diffs.get)
    peak = diffs[n_peak]
    in_band = [n for n, d in diffs.items() if PEAK_BAND[0] <= d <= PEAK_BAND[1]]
    ok = PEAK_BAND[0] <= peak <= PEAK_BAND[1]
    record(5, ok, f"peak gap {peak:.4f} at n={n_peak} (band {PEAK_BAND}); gap in band for n in "
                  f"{in_band[0] if in_band else None}..{in_band[-1] if in_band else None}", t)


def test_criterion_06_analytic_vs_monte_carlo():
    t = time.perf_counter()
    report, ok_42 = interpretation_report(trials=MC_TRIALS, seed=42)
    report_43, ok_43 = interpretation_report(trials=MC_TRIALS, seed=43, alternatives=False)
    ACCEPTANCE_LINES.extend(["", "formula-interpretation report:", *report.rstrip().splitlines(),
                             "", *report_43.rstrip().splitlines()[-14:], ""])
    ok = ok_42 and ok_43
    record(6, ok, f"12 points within {MC_SIGMAS:g} std errors at {MC_TRIALS} trials: seed 42 {ok_42}, seed 43 {ok_43}", t)


def test_criterion_07_reliability_gain_linearity():
    t = time.perf_counter()
    ps, pe = LOW
    xs, ys = [], []
    for n in NODES:
        value = pbft_security_baseline(SecurityInputs.for_n(n, pe, ps)).p_total
        if value < 1.0:
            xs.append(n)
            ys.append(math.log10(value))
    xs, ys = np.array(xs, float), np.array(ys)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    r2 = 1 - float(resid @ resid) / float(((ys - ys.mean()) ** 2).sum())
    record(7, r2 >= R2_MIN, f"R^2 {r2:.4f} (min {R2_MIN}) over {len(xs)} points, slope {slope:.5f}/node", t)


def test_criterion_08_sr_math():
    t = time.perf_counter()
    worst_k = 0.0
    for gd in np.geomspace(1, 100, 10):
        for dg in np.linspace(0.01, 0.9, 10):
            for m in (1, 4, 16):
                got = min_spreading_factor(SrLinkParams(float(gd), float(dg), m))
                want = float(mp_min_spreading_factor(float(gd), float(dg), m))
                worst_k = max(worst_k, abs(got / want - 1))
    worst_q = max(abs(q_function(x) / float(mp_q(x)) - 1) for x in np.linspace(-8, 8, 321))
    ok = worst_k <= SR_REL_TOL and worst_q <= Q_REL_TOL
    record(8, ok, f"K_min worst rel err {worst_k:.1e} on 300 points (tol {SR_REL_TOL:g}); "
                  f"Q worst rel err {worst_q:.1e} (tol {Q_REL_TOL:g})", t)


def test_criterion_09_schedule_fidelity():
    t = time.perf_counter()
    table = {
        1: {0: Role.PTX, 1: Role.STX, 2: Role.SRX, 3: Role.PRX},
        2: {0: Role.PTX, 1: Role.PRX, 2: Role.STX, 3: Role.SRX},
        3: {0: Role.PTX, 1: Role.SRX, 2: Role.PRX, 3: Role.STX},
    }
    pp = role_schedule(4, Stage.PRE_PREPARE)
    table_ok = all(pp.band_roles(b) == roles for b, roles in table.items()) and pp.bands == (1, 2, 3)
    bad = []
    for n in range(4, 101, 3):
        want = {Stage.PRE_PREPARE: (n - 1, 0), Stage.PREPARE: (n * n - 3 * n + 2, n - 1),
                Stage.COMMIT: (n * n - 3 * n + 2, 2 * n - 2), Stage.REPLY: (0, n)}
        for sched in full_schedule(n):
            got = (len(sched.active_messages), len(sched.backscatter_messages))
            if message_counts(n, sched.stage) != want[sched.stage] or got != want[sched.stage] or sched.problems():
                bad.append((n, sched.stage.value))
        if band_usage(n) > n:
            bad.append((n, "bands"))
    record(9, table_ok and not bad, f"table match={table_ok}; count/collision/band issues={bad[:5]}", t)


def test_criterion_10_determinism():
    t = time.perf_counter()
    plan = load_scenario(GOLDEN / "golden.ini")
    serial = run_sweep(plan, workers=1).to_csv()
    parallel = run_sweep(plan, workers=2).to_csv()
    golden = (GOLDEN / "sweep_golden.csv").read_text()
    ok = serial == parallel == golden
    record(10, ok, f"serial == parallel: {serial == parallel}; == committed golden: {serial == golden} "
                   f"({len(serial)} bytes)", t)
