"""Command-line entry point: ``spbft sweep | linkcalc | security | energy | schedule | interpret``."""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from pathlib import Path

from .energy import energy, savings_ratio
from .montecarlo import REPLY_LINKS, SEMANTICS, estimate_security, reliability_gain
from .protocol import Protocol, ProtocolConfig, dump_schedule, full_schedule
from .scenario import DEFAULT_PT_DBM, ScenarioError, load_scenario
from .security import EXACTLY_ONE, RESCUE_READINGS, SecurityInputs, security
from .sr_link import DomainError, SrLinkParams, compose, min_spreading_factor
from .sweep import gnuplot_script, interpretation_report, run_sweep
from .units import db_to_linear, dbm_to_watts

# exit codes by error category; argparse itself exits with 2 on usage errors
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SCENARIO = 3
EXIT_DOMAIN = 4
EXIT_IO = 5
EXIT_CHECK = 6


class CliError(Exception):
    def __init__(self, category: str, message: str, code: int):
        super().__init__(message)
        self.category, self.code = category, code


def _fmt(x: float) -> str:
    return repr(float(x))


def _cmd_sweep(args) -> int:
    plan = load_scenario(args.scenario)
    out = args.out or plan.out
    workers = args.workers if args.workers is not None else plan.workers
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = run_sweep(plan, workers=workers)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    text = result.to_csv()
    try:
        if out in (None, "-"):
            sys.stdout.write(text)
        else:
            Path(out).write_text(text)
        gnuplot = args.gnuplot or plan.gnuplot
        if gnuplot:
            Path(gnuplot).write_text(gnuplot_script(out if out not in (None, "-") else "sweep.csv"))
    except OSError as exc:
        raise CliError("io", f"cannot write output: {exc}", EXIT_IO) from None
    return EXIT_OK


def _cmd_linkcalc(args) -> int:
    gamma_d = db_to_linear(args.gamma_d_db)
    params = SrLinkParams(gamma_d, args.delta_gamma, args.antennas)
    k_min = min_spreading_factor(params)
    snr = compose(params, max(k_min, 1.0))
    print(f"gamma_d       {_fmt(gamma_d)}  ({args.gamma_d_db} dB)")
    print(f"delta_gamma   {_fmt(args.delta_gamma)}")
    print(f"antennas      {args.antennas}")
    print(f"gamma_b       {_fmt(params.gamma_b)}")
    print(f"gamma_p       {_fmt(snr.gamma_p)}")
    print(f"K_min         {_fmt(k_min)}")
    note = "" if k_min >= 1.0 else "  (bound below 1; evaluated at K = 1)"
    print(f"gamma_s       {_fmt(snr.gamma_s)}{note}")
    return EXIT_OK


def _config(args, p_s: float, p_e: float) -> ProtocolConfig:
    return ProtocolConfig(args.n, p_s, p_e, args.t1, args.t2, dbm_to_watts(args.pt_dbm))


def _cmd_security(args) -> int:
    config = _config(args, args.ps, args.pe)
    inputs = SecurityInputs.from_config(config)
    print("protocol  analytic_security     reliability_gain" + ("      simulated  std_err" if args.simulate else ""))
    for protocol in (Protocol.PBFT, Protocol.SPBFT):
        value = security(inputs, protocol, args.rescue).p_total
        gain = reliability_gain(value) if value > 0 else -math.inf
        line = f"{protocol.value:<9} {value:<21.15g} {gain:<21.15g}"
        if args.simulate:
            est = estimate_security(
                config, protocol, args.trials, args.seed,
                semantics=args.semantics, rescue=args.rescue, reply_links=args.reply_links,
                workers=args.workers,
            )
            line += f" {est.point:<14.10g} {est.std_err:.3g}"
        print(line)
    return EXIT_OK


def _cmd_energy(args) -> int:
    config = _config(args, 1.0, 1.0)
    print("protocol  e_preprepare  e_prepare  e_commit  e_reply  e_total (J)")
    for protocol in (Protocol.PBFT, Protocol.SPBFT):
        e = energy(config, protocol)
        print(f"{protocol.value:<9} " + " ".join(_fmt(v) for v in (e.e_preprepare, e.e_prepare, e.e_commit,
                                                                     e.e_reply, e.e_total)))
    print(f"savings_ratio {_fmt(savings_ratio(config))}")
    return EXIT_OK


def _cmd_schedule(args) -> int:
    sys.stdout.write(dump_schedule(full_schedule(args.n)))
    return EXIT_OK


def _cmd_interpret(args) -> int:
    nodes = tuple(args.nodes)
    report, ok = interpretation_report(nodes=nodes, trials=args.trials, seed=args.seed, rescue=args.rescue,
                                       workers=args.workers)
    sys.stdout.write(report)
    return EXIT_OK if ok or not args.strict else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spbft", description="Wireless PBFT / symbiotic PBFT analysis toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run a scenario file and write the CSV")
    p.add_argument("scenario")
    p.add_argument("--out", help="CSV path ('-' for stdout); overrides the scenario's out key")
    p.add_argument("--gnuplot", help="also write a gnuplot script to this path")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("linkcalc", help="symbiotic-radio link budget")
    p.add_argument("--gamma-d-db", type=float, required=True)
    p.add_argument("--delta-gamma", type=float, required=True)
    p.add_argument("--antennas", type=int, default=1)
    p.set_defaults(func=_cmd_linkcalc)

    def add_config(p):
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--t1", type=float, default=1.0)
        p.add_argument("--t2", type=float, default=1.0)
        p.add_argument("--pt-dbm", type=float, default=DEFAULT_PT_DBM)

    p = sub.add_parser("security", help="closed-form (and optionally simulated) consensus security")
    add_config(p)
    p.add_argument("--pe", type=float, required=True)
    p.add_argument("--ps", type=float, required=True)
    p.add_argument("--rescue", choices=RESCUE_READINGS, default=EXACTLY_ONE)
    p.add_argument("--simulate", action="store_true")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--semantics", choices=SEMANTICS, default="analytic")
    p.add_argument("--reply-links", choices=REPLY_LINKS, default="enhanced")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_security)

    p = sub.add_parser("energy", help="per-stage round energy")
    add_config(p)
    p.set_defaults(func=_cmd_energy)

    p = sub.add_parser("schedule", help="dump the S-PBFT band/role schedule")
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("interpret", help="closed form vs simulation agreement report")
    p.add_argument("--nodes", type=int, nargs="+", default=[4, 7, 10])
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--rescue", choices=RESCUE_READINGS, default=EXACTLY_ONE)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--strict", action="store_true", help="exit nonzero when a point disagrees")
    p.set_defaults(func=_cmd_interpret)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        category, code, message = exc.category, exc.code, str(exc)
    except ScenarioError as exc:
        category, code, message = "scenario", EXIT_SCENARIO, str(exc)
    except DomainError as exc:
        category, code, message = "domain", EXIT_DOMAIN, str(exc)
    except ValueError as exc:
        category, code, message = "config", EXIT_DOMAIN, str(exc)
    except OSError as exc:
        category, code, message = "io", EXIT_IO, str(exc)
    print(f"error[{category}]: {message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
