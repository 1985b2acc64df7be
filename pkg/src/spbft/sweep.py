"""Parameter sweeps over n and (p_s, p_e), CSV output and the interpretation report."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources

from .energy import energy, savings_ratio
from .montecarlo import estimate_security, reliability_gain, simulate
from .protocol import Protocol, ProtocolConfig
from .scenario import Scenario, ScenarioFile
from .security import EXACTLY_ONE, SecurityInputs, security


def load_schema() -> list[dict]:
    return json.loads(resources.files(__package__).joinpath("sweep_schema.json").read_text())["columns"]


COLUMNS = tuple(col["name"] for col in load_schema())


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[dict, ...]
    columns: tuple[str, ...] = COLUMNS

    def to_csv(self) -> str:
        buf = io.StringIO()
        write_csv(self, buf)
        return buf.getvalue()


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _row(n: int, sc: Scenario, protocol: Protocol, config: ProtocolConfig, plan: ScenarioFile) -> dict:
    analytic = security(SecurityInputs.from_config(config), protocol, plan.rescue).p_total
    e = energy(config, protocol)
    row = {
        "scenario": sc.name,
        "protocol": protocol.value,
        "n": n,
        "f": config.f,
        "p_s": sc.p_s,
        "p_e": sc.p_e,
        "analytic_security": analytic,
        "reliability_gain": reliability_gain(analytic) if analytic > 0 else -math.inf,
        "simulated_security": None,
        "simulated_std_err": None,
        "trials": plan.trials,
        "seed": plan.seed,
        "t1": config.t1,
        "t2": config.t2,
        "p_t": config.p_t,
        "e_preprepare": e.e_preprepare,
        "e_prepare": e.e_prepare,
        "e_commit": e.e_commit,
        "e_reply": e.e_reply,
        "e_total": e.e_total,
        "savings_ratio": savings_ratio(config),
    }
    if plan.trials > 0:
        est = estimate_security(
            config, protocol, plan.trials, plan.seed,
            semantics=plan.semantics, rescue=plan.rescue, reply_links=plan.reply_links,
        )
        row["simulated_security"] = est.point
        row["simulated_std_err"] = est.std_err
    return row


def _row_task(args):
    return _row(*args)


def run_sweep(plan: ScenarioFile, workers: int | None = None) -> SweepResult:
    """Evaluate every grid point; rows come back in grid order whatever the worker count."""
    tasks = [(n, sc, protocol, config, plan) for n, sc, protocol, config in plan.grid()]
    workers = plan.workers if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_row_task, tasks))
    else:
        rows = [_row(*task) for task in tasks]
    return SweepResult(tuple(rows))


def write_csv(result: SweepResult, stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([format_value(row[c]) for c in result.columns])


def read_csv(stream) -> list[dict]:
    """Parse a sweep CSV back into typed values."""
    types = {col["name"]: col["type"] for col in load_schema()}
    convert = {"int": int, "float": float, "str": str}
    rows = []
    for raw in csv.DictReader(stream):
        rows.append({k: (convert[types[k]](v) if v != "" else None) for k, v in raw.items()})
    return rows


def gnuplot_script(csv_path: str) -> str:
    """Plot commands for the security, reliability-gain and energy curves of a sweep CSV."""
    cols = {name: i + 1 for i, name in enumerate(COLUMNS)}
    sel = 'strcol({c}) eq "{v}" ? ${y} : 1/0'
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set xlabel 'number of nodes n'",
        "set terminal pngcairo size 1200,400",
        "set output 'sweep.png'",
        "set multiplot layout 1,3",
    ]
    for ycol, label in (("analytic_security", "consensus security"), ("reliability_gain", "reliability gain"),
                        ("e_total", "energy per round (J)")):
        lines.append(f"set ylabel '{label}'")
        plots = []
        for proto in ("pbft", "spbft"):
            expr = sel.format(c=cols["protocol"], v=proto, y=cols[ycol])
            plots.append(f"'{csv_path}' using {cols['n']}:({expr}) with linespoints title '{proto}'")
        lines.append("plot " + ", \\\n     ".join(plots))
    lines.append("unset multiplot")
    return "\n".join(lines) + "\n"


def interpretation_report(
    nodes=(4, 7, 10),
    scenarios=None,
    trials: int = 1_000_000,
    seed: int = 42,
    rescue: str = EXACTLY_ONE,
    workers: int = 1,
    alternatives: bool = True,
) -> tuple[str, bool]:
    """Compare the closed forms with simulation under the reading they encode and under node-level quorums.

    Returns the report text and whether every point agreed within 3 standard errors.
    ``alternatives=False`` drops the quorum-semantics columns.
    """
    scenarios = scenarios or ScenarioFile().scenarios
    lines = [
        "readings in force:",
        f"  commit-replica rescue of f+1 active losses: {rescue}",
        "  stage coupling: pre-prepare losses i shrink the prepare pool; commit starts a fresh budget;",
        "    commit losses l shrink the reply budget to f-l over n-1 replica replies",
        "  primary commit reception: prepare-stage form at i = 0",
        "  S-PBFT reply links: enhanced (p_e)",
        f"trials={trials} seed={seed}",
        "",
        f"{'n':>4} {'scenario':>8} {'protocol':>8} {'analytic':>12} {'simulated':>12} {'z':>7}"
        + (f"  {'quorum+bs-reply':>15} {'z':>8}" if alternatives else ""),
    ]
    all_ok = True
    for n in nodes:
        for sc in scenarios:
            config = ProtocolConfig(n, sc.p_s, sc.p_e)
            for protocol in (Protocol.PBFT, Protocol.SPBFT):
                analytic = security(SecurityInputs.from_config(config), protocol, rescue).p_total
                est = simulate(config, protocol, trials, seed, rescue=rescue, workers=workers).estimate()
                z = _z(analytic, est.point, est.std_err)
                ok = abs(est.point - analytic) <= 3 * est.std_err
                all_ok &= ok
                line = f"{n:>4} {sc.name:>8} {protocol.value:>8} {analytic:>12.6f} {est.point:>12.6f} {z:>7.2f}"
                if alternatives:
                    alt = simulate(
                        config, protocol, trials, seed, rescue=rescue, semantics="quorum",
                        reply_links="backscatter", workers=workers,
                    ).estimate()
                    line += f"  {alt.point:>15.6f} {_z(analytic, alt.point, alt.std_err):>8.1f}"
                lines.append(line + ("" if ok else "  << outside 3 std errors"))
    lines.append("")
    lines.append("agreement: " + ("all points within 3 std errors" if all_ok else "VIOLATIONS present"))
    return "\n".join(lines) + "\n", all_ok


def _z(analytic: float, point: float, std_err: float) -> float:
    if std_err == 0.0:
        return 0.0 if point == analytic else math.copysign(math.inf, point - analytic)
    return (point - analytic) / std_err
