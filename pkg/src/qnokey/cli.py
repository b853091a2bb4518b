"""Command-line front end.

Subcommands: `run` one experiment, `sweep` a parameter grid, `verify` a
stored report against a fresh rerun, and `tables` for truth-table files.
Exit status: 0 when every embedded assertion passed, 1 when any failed,
2 for unusable arguments. Reports land in --out, or in the directory
named by QNOKEY_OUTPUT_DIR, or in the working directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .adversary import AttackSpecError
from .harness import ConfigError, ExperimentConfig, run_experiment, verify_report
from .oracles import (BooleanPermutation, make_rng, read_table, sample_function,
                      sample_permutation, save_table)
from .protocols import PROTOCOL_IDS, ProtocolError

OUTPUT_DIR_ENV = "QNOKEY_OUTPUT_DIR"


def _output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


def _parse_messages(raw: str | None, n: int) -> tuple[int, ...] | None:
    if raw is None or raw == "all":
        return None
    try:
        return tuple(int(v, 0) for v in raw.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad message list {raw!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qnokey",
        description="Exact simulation experiments for the no-key protocol family",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment and write its report")
    run.add_argument("--protocol", required=True, choices=PROTOCOL_IDS)
    run.add_argument("--n", type=int, required=True, help="message width in bits")
    run.add_argument("--l", type=int, default=0, help="tag register width")
    run.add_argument("--t", type=int, default=0, help="authentication tag width")
    run.add_argument("--x", default=None,
                     help="comma-separated messages, or 'all' (default)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--trials", type=int, default=1)
    run.add_argument("--attack", default=None,
                     help="none | passive | mim | phase:x=<int>[,passes=..] "
                          "| measure[:passes=..]")
    run.add_argument("--snapshots", action=argparse.BooleanOptionalAction,
                     default=True, help="record per-round channel snapshots")
    run.add_argument("--average", choices=("none", "pads", "pads+keys"), default="none")
    run.add_argument("--exhaustive-keys", action="store_true",
                     help="sweep every authentication key (p6 attacks)")
    run.add_argument("--include-matrices", action="store_true",
                     help="embed channel snapshots in the report")
    run.add_argument("--qubit-cap", type=int, default=22)
    run.add_argument("--enum-limit", type=int, default=1 << 16)
    run.add_argument("--fa-file", default=None, help="pin the sender permutation")
    run.add_argument("--fb-file", default=None, help="pin the receiver permutation")
    run.add_argument("--sa-file", default=None, help="pin Alice's tag function")
    run.add_argument("--sb-file", default=None, help="pin Bob's tag function")
    run.add_argument("--out", default=None, help="report path")

    sweep = sub.add_parser("sweep", help="run a grid of honest experiments")
    sweep.add_argument("--protocols", default="p1,p2,p4",
                       help="comma-separated protocol ids")
    sweep.add_argument("--n", default="1,2", help="comma-separated message widths")
    sweep.add_argument("--l", default="1", help="comma-separated tag widths")
    sweep.add_argument("--t", type=int, default=3, help="authentication width for p6")
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--trials", type=int, default=1)
    sweep.add_argument("--qubit-cap", type=int, default=22)
    sweep.add_argument("--enum-limit", type=int, default=1 << 16)
    sweep.add_argument("--out-dir", default=None)

    verify = sub.add_parser("verify", help="re-derive reports and compare bytes")
    verify.add_argument("reports", nargs="+")

    tables = sub.add_parser("tables", help="emit or check truth-table files")
    tsub = tables.add_subparsers(dest="table_command", required=True)
    sample = tsub.add_parser("sample", help="sample a table to a file")
    sample.add_argument("--kind", choices=("perm", "func"), required=True)
    sample.add_argument("--n", type=int, required=True)
    sample.add_argument("--l", type=int, default=1)
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--out", required=True)
    check = tsub.add_parser("check", help="validate a table file and summarise it")
    check.add_argument("files", nargs="+")
    return parser


def _cmd_run(args) -> int:
    config = ExperimentConfig(
        protocol=args.protocol,
        n=args.n,
        l=args.l,
        t=args.t,
        messages=_parse_messages(args.x, args.n),
        seed=args.seed,
        trials=args.trials,
        attack=args.attack,
        snapshots=args.snapshots,
        average=args.average,
        exhaustive_keys=args.exhaustive_keys,
        include_matrices=args.include_matrices,
        qubit_cap=args.qubit_cap,
        enum_limit=args.enum_limit,
        fa_file=args.fa_file,
        fb_file=args.fb_file,
        sa_file=args.sa_file,
        sb_file=args.sb_file,
    )
    report = run_experiment(config)
    if args.out is not None:
        path = Path(args.out)
    else:
        name = f"{config.protocol}_n{config.n}_l{config.l}_seed{config.seed}.json"
        path = _output_dir() / name
    path.parent.mkdir(parents=True, exist_ok=True)
    report.write(path)
    for check in report.body["assertions"]:
        mark = "PASS" if check["passed"] else "FAIL"
        print(f"{mark} {check['name']}: {check['detail']}")
    print(f"report: {path}")
    return 0 if report.passed else 1


def _cmd_sweep(args) -> int:
    out_dir = Path(args.out_dir) if args.out_dir else _output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    protocols = [p.strip() for p in args.protocols.split(",") if p.strip()]
    widths = [int(v) for v in args.n.split(",")]
    tags = [int(v) for v in args.l.split(",")]
    failures = 0
    for protocol in protocols:
        if protocol not in PROTOCOL_IDS:
            raise ConfigError(f"unknown protocol {protocol!r}")
        for n in widths:
            for l in tags if protocol != "p1" else [0]:
                try:
                    config = ExperimentConfig(
                        protocol=protocol, n=n, l=l,
                        t=args.t if protocol == "p6" else 0,
                        seed=args.seed, trials=args.trials,
                        qubit_cap=args.qubit_cap, enum_limit=args.enum_limit,
                    )
                except (ConfigError, ProtocolError) as exc:
                    print(f"SKIP {protocol} n={n} l={l}: {exc}")
                    continue
                report = run_experiment(config)
                name = f"{protocol}_n{n}_l{l}_seed{args.seed}.json"
                report.write(out_dir / name)
                mark = "PASS" if report.passed else "FAIL"
                if not report.passed:
                    failures += 1
                print(f"{mark} {protocol} n={n} l={l} -> {out_dir / name}")
    return 1 if failures else 0


def _cmd_verify(args) -> int:
    bad = 0
    for path in args.reports:
        ok, detail = verify_report(path)
        print(f"{'PASS' if ok else 'FAIL'} {path}: {detail}")
        if not ok:
            bad += 1
    return 1 if bad else 0


def _cmd_tables(args) -> int:
    if args.table_command == "sample":
        rng = make_rng(args.seed)
        if args.kind == "perm":
            table = sample_permutation(args.n, rng)
        else:
            table = sample_function(args.n, args.l, rng)
        save_table(table, args.out)
        print(f"wrote {args.kind} n={args.n}"
              + (f" l={args.l}" if args.kind == "func" else "")
              + f" -> {args.out}")
        return 0
    bad = 0
    for path in args.files:
        try:
            table = read_table(path)
        except (OSError, ValueError) as exc:
            print(f"FAIL {path}: {exc}")
            bad += 1
            continue
        kind = "perm" if isinstance(table, BooleanPermutation) else "func"
        print(f"PASS {path}: {kind} n={table.n} out={table.out_width} "
              f"entries={len(table.table)}")
    return 1 if bad else 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "tables":
            return _cmd_tables(args)
    except (ConfigError, ProtocolError, AttackSpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
