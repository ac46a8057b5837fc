"""``forensic-lr`` command line.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from forensic_lr.match_stats import (
    Genotype,
    MultiLocusProfile,
    profile_frequency,
    sib_match_probability,
    theta_genotype_freq,
)
from forensic_lr.oracle_sim import (
    InsufficientDataError,
    SimConfig,
    estimate_match_probability,
    estimate_sib_match_probability,
    estimate_theta_match_probability,
    simulate_closed_building,
)
from forensic_lr.population_db import TableError, parse_allele_tables, validate_table
from forensic_lr.report import (
    CaseError,
    emit_report,
    load_case,
    parse_key_values,
    parse_multipliers,
    run_case,
    with_overrides,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2


def _evaluate(args) -> int:
    case = load_case(args.case)
    multipliers = parse_multipliers(args.multipliers) if args.multipliers else None
    case = with_overrides(case, theta=args.theta, floor=args.floor, multipliers=multipliers)
    report = run_case(case)
    sys.stdout.write(emit_report(report, args.format, timestamp=args.timestamp))
    return EXIT_OK


def _validate(args) -> int:
    tables = parse_allele_tables(Path(args.alleles).read_text(encoding="utf-8"))
    status = EXIT_OK
    for name, table in tables.items():
        report = validate_table(table)
        if not report.findings:
            print(f"{name}: ok ({len(table.loci)} loci)")
        for f in report.findings:
            print(f"{name}: {f.severity}: {f.locus}: {f.message}")
        if not report.ok:
            status = EXIT_INVALID
    return status


def _load_sim_config(path: Path) -> dict:
    conf = {}
    target = {}
    for key, value in parse_key_values(path.read_text(encoding="utf-8")):
        if key.startswith("target."):
            target[key[len("target."):]] = value
        else:
            conf[key] = value
    conf["target"] = target
    return conf


def _simulate(args) -> int:
    path = Path(args.config)
    conf = _load_sim_config(path)
    mode = conf.get("mode", "match")
    try:
        cfg = SimConfig(
            seed=args.seed,
            trials=int(conf.get("trials", 1_000_000)),
            lanes=int(conf.get("lanes", 1)),
        )
    except ValueError as exc:
        raise CaseError(f"bad simulation config: {exc}") from None
    out = [("mode", mode), ("seed", str(args.seed))]

    if mode == "building":
        n, f = int(conf["n"]), float(conf["f"])
        sim = simulate_closed_building(n, f, cfg)
        est = sim.only_source_matches
        closed_form = (1.0 - f) ** n
    else:
        tables = parse_allele_tables((path.parent / conf["alleles"]).read_text(encoding="utf-8"))
        table = tables[conf["population"]] if "population" in conf else next(iter(tables.values()))
        target = MultiLocusProfile(Genotype(l, pair) for l, pair in conf["target"].items())
        if mode == "match":
            est = estimate_match_probability(target, table, cfg)
            closed_form = profile_frequency(target, table).value
        elif mode == "sib":
            min_acc = int(conf["min_accepted"]) if "min_accepted" in conf else None
            est = estimate_sib_match_probability(target, table, cfg, min_accepted=min_acc)
            closed_form = sib_match_probability(target, table).value
        elif mode == "theta":
            if len(target) != 1:
                raise CaseError("theta mode takes a single-locus target")
            g = target[0]
            theta = float(conf["theta"])
            est = estimate_theta_match_probability(g, table.alleles(g.locus), theta, cfg)
            closed_form = theta_genotype_freq(g, table.alleles(g.locus), theta).value
        else:
            raise CaseError(f"unknown simulation mode {mode!r}")
    out += [
        ("trials", str(est.trials)),
        ("estimate", repr(est.estimate)),
        ("std_error", repr(est.std_error)),
        ("closed_form", repr(closed_form)),
        ("within_4_sigma", str(est.within(closed_form)).lower()),
    ]
    sys.stdout.write("".join(f"{k} = {v}\n" for k, v in out))
    return EXIT_OK


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forensic-lr", description="DNA match statistics")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="evaluate a case file and print a report")
    ev.add_argument("--case", required=True, help="path to the key-value case file")
    ev.add_argument("--format", choices=("text", "structured"), default="text")
    ev.add_argument("--theta", type=float, help="override the case theta")
    ev.add_argument("--floor", type=float, help="override the ceiling allele floor")
    ev.add_argument("--multipliers", help="comma-separated sensitivity multipliers")
    ev.add_argument("--timestamp", action="store_true", help="stamp text output with the time")
    ev.set_defaults(func=_evaluate)

    va = sub.add_parser("validate", help="check an allele-frequency CSV")
    va.add_argument("--alleles", required=True)
    va.set_defaults(func=_validate)

    si = sub.add_parser("simulate", help="run a Monte Carlo cross-check")
    si.add_argument("--config", required=True, help="key-value simulation config")
    si.add_argument("--seed", type=_u64, required=True)
    si.set_defaults(func=_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CaseError, TableError, InsufficientDataError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
