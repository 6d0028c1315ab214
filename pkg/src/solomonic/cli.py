"""Command-line entry point: ``solomonic <subcommand>``.

Exit codes: 0 success, 1 verification failed (non-truthful or non-unique
outcome), 2 usage error, 3 invalid input file, 4 solver error, 5 settlement
still pending at the horizon.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import data
from .chain import HorizonExceeded
from .game import (
    GameError,
    IncomparableLottery,
    ProfileCapExceeded,
    brute_force_spe,
    count_profiles,
    game_from_json,
    is_unique_outcome,
    lottery_to_json,
    solve_spe,
)
from .scenario import ScenarioError, load_scenario, rows_to_csv, run_sweep, simulate
from .solomon import InvalidFineRegime, verify_proposition1

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_SOLVER = 4
EXIT_HORIZON = 5


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str, **extra):
        self.code = code
        self.kind = kind
        self.extra = extra
        super().__init__(message)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _resolve(path: str, kind: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    bundled = data.path(kind, path)
    if bundled.exists():
        return bundled
    raise CliError(EXIT_INPUT, "FileNotFound", f"no such file: {path}")


def _dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def cmd_solve_solomon(args) -> int:
    states = ["alpha", "beta"] if args.state == "all" else [args.state]
    sels = ["a", "b", "random"] if args.proposer == "all" else [args.proposer]
    fines = args.fine or [Fraction(1)]
    regime = "malice" if args.malice else args.regime
    try:
        report = verify_proposition1(fines, states=states, selections=sels, regime=regime,
                                     cross_check=not args.no_cross_check)
    except InvalidFineRegime as e:
        raise CliError(EXIT_INPUT, "InvalidFineRegime", str(e)) from None
    doc = report.to_json()
    doc["regime"] = regime
    if args.format == "json":
        _emit(_dumps(doc), args.out)
    else:
        lines = []
        for v in report.verdicts:
            outs = " | ".join(l.describe() for l in v.outcomes)
            mark = "ok " if v.ok else "BAD"
            lines.append(f"{mark} state={v.state} proposer={v.proposer} F={v.fine} "
                         f"order={v.order}: {outs} (unique={v.unique})")
        lines.append(f"{len(report.verdicts) - len(report.violations)}/{len(report.verdicts)} truthful")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if report.ok else EXIT_FAILED


def cmd_simulate(args) -> int:
    path = _resolve(args.scenario, "scenarios")
    sc = load_scenario(path, seed=args.seed, repetitions=args.reps, signal=args.signal)
    report = simulate(sc, keep_trace=args.out is not None)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.dumps())
        (out / "trace.jsonl").write_text(report.trace_jsonl())
    agg = report.to_json()["aggregate"]
    if args.format == "json":
        sys.stdout.write(_dumps({"scenario": sc.name, "digest": sc.digest, "aggregate": agg}))
    else:
        sys.stdout.write("outcome,count,frequency\n")
        for k, v in agg["counts"].items():
            sys.stdout.write(f"{k},{v},{agg['frequencies'][k]}\n")
    return EXIT_OK


def cmd_verify_spe(args) -> int:
    path = _resolve(args.game, "games")
    try:
        game, prefs = game_from_json(json.loads(path.read_text()))
    except (ValueError, KeyError, TypeError) as e:
        raise CliError(EXIT_INPUT, "InvalidGame", str(e)) from None
    try:
        sol = solve_spe(game, prefs)
    except IncomparableLottery as e:
        raise CliError(EXIT_SOLVER, "IncomparableLottery", str(e), path="/".join(e.path)) from None
    except GameError as e:
        raise CliError(EXIT_SOLVER, type(e).__name__, str(e)) from None
    uniq = is_unique_outcome(sol)
    doc = {
        "game": path.name,
        "unique": uniq.unique,
        "outcome_set": [lottery_to_json(l) for l in sol.sorted_outcomes()],
        "profile_count": sol.profile_count,
        "oracle": None,
    }
    n = count_profiles(game)
    if n <= args.cap:
        try:
            oracle = brute_force_spe(game, prefs, cap=args.cap)
            doc["oracle"] = {"profiles_enumerated": n,
                             "agrees": oracle.outcome_set == sol.outcome_set
                             and oracle.profile_count == sol.profile_count}
        except ProfileCapExceeded:
            pass
    else:
        doc["oracle"] = {"profiles_enumerated": 0, "skipped": f"{n} profiles exceed cap {args.cap}"}
    _emit(_dumps(doc), args.out)
    if doc["oracle"] and doc["oracle"].get("agrees") is False:
        return EXIT_FAILED
    return EXIT_OK if uniq.unique else EXIT_FAILED


def cmd_sweep(args) -> int:
    path = _resolve(args.spec, "sweeps")
    try:
        spec = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ScenarioError(e.msg, line=e.lineno) from None
    base_dir = path.parent
    base = spec.get("base")
    if isinstance(base, str) and not (base_dir / base).is_file():
        spec["base"] = str(_resolve(base, "scenarios"))
    rows = run_sweep(spec, base_dir, seed=args.seed)
    if args.format == "json":
        _emit(_dumps({"rows": rows}), args.out)
    else:
        _emit(rows_to_csv(rows), args.out)
    return EXIT_OK


def _fraction(s: str) -> Fraction:
    try:
        f = Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {s}") from None
    if f <= 0:
        raise argparse.ArgumentTypeError("fine must be positive")
    return f


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="solomonic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-solomon", help="solve the Solomon mechanism and check truthfulness")
    p.add_argument("--state", choices=["alpha", "beta", "all"], default="all")
    p.add_argument("--fine", type=_fraction, action="append",
                   help="fine amount; repeat for a grid (default 1)")
    p.add_argument("--proposer", choices=["a", "b", "random", "all"], default="all")
    p.add_argument("--regime", choices=["small", "large", "malice"], default="small",
                   help="preference regime; anything but 'small' breaks a needed ranking")
    p.add_argument("--malice", action="store_true", help="shorthand for --regime malice")
    p.add_argument("--no-cross-check", action="store_true", help="skip the brute-force oracle")
    p.add_argument("--format", choices=["json", "text"], default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve_solomon)

    p = sub.add_parser("simulate", help="run a scenario file")
    p.add_argument("scenario", help="scenario JSON path or bundled scenario name")
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--signal", action="store_true", help="mark the contract as carrying the clause")
    p.add_argument("--out", help="directory for report.json and trace.jsonl")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-spe", help="solve a game JSON file")
    p.add_argument("game", help="game JSON path or bundled game name")
    p.add_argument("--cap", type=int, default=10**6, help="profile cap for the oracle")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify_spe)

    p = sub.add_parser("sweep", help="run a parameter sweep and emit a table")
    p.add_argument("spec", help="sweep JSON path or bundled sweep name")
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        err = {"error": e.kind, "message": str(e), **e.extra}
        code = e.code
    except ScenarioError as e:
        err = {"error": "ScenarioError", "message": str(e), "path": e.path, "line": e.line}
        code = EXIT_INPUT
    except HorizonExceeded as e:
        err = {"error": "HorizonExceeded", "message": str(e), "pending": e.pending}
        code = EXIT_HORIZON
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
