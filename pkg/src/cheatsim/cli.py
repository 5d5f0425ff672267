"""Command-line entry point: ``cheatsim analytic|simulate|estimate``.

Exit codes: 0 success (for ``estimate``: every off-diagonal cell passed),
1 comparison failure, 2 usage, configuration or runtime error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analytic import CheatSchedule, DomainError, knowledge_matrix
from .asynchronous import ConfigError
from .montecarlo import compare_all, estimate_certainty, run_trial
from .scenario import ScenarioError, parse_scenario

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class CliError(Exception):
    pass


# -- serialisation -------------------------------------------------------------


def _fmt(x: float) -> str:
    # shortest round-trip repr keeps full double precision
    return repr(float(x))


def matrix_csv(matrix: np.ndarray, meta: dict, fmt=_fmt) -> str:
    """CSV with ``# key=value`` metadata lines, a header of target ids, one row per observer."""
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key}={value}\n")
    w = csv.writer(buf, lineterminator="\n")
    n = matrix.shape[1]
    w.writerow(["observer"] + [str(j) for j in range(1, n + 1)])
    for i, row in enumerate(matrix, start=1):
        w.writerow([str(i)] + [fmt(x) for x in row])
    return buf.getvalue()


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror}") from None


def _parse_eps(spec: str) -> list[CheatSchedule]:
    """``0,0.3,0.1/0.5`` -> constant, constant, cycling sequence."""
    out = []
    for item in spec.split(","):
        item = item.strip()
        if not item:
            raise CliError(f"empty entry in --eps {spec!r}")
        try:
            if "/" in item:
                out.append(CheatSchedule.sequence([float(x) for x in item.split("/")]))
            else:
                out.append(CheatSchedule.constant(float(item)))
        except ValueError as exc:
            raise CliError(f"--eps entry {item!r}: {exc}") from None
    return out


def _load(args):
    if not args.scenario:
        raise CliError("--scenario is required")
    cfg = parse_scenario(args.scenario)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    if getattr(args, "floor", None) is not None:
        changes["tolerance_floor"] = args.floor
    if changes:
        cfg = dataclasses.replace(cfg, **changes)
    return cfg


def _out_dir(args, cfg=None) -> Path | None:
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg.output_dir:
        return Path(cfg.output_dir)
    return None


# -- subcommands ---------------------------------------------------------------


def cmd_analytic(args) -> int:
    if args.eps is not None:
        schedules = _parse_eps(args.eps)
        if args.d is None:
            raise CliError("--d is required with --eps")
        steps = [args.d]
        out = Path(args.out) if args.out else None
    else:
        cfg = _load(args)
        schedules = list(cfg.schedules)
        steps = [args.d] if args.d is not None else list(cfg.checkpoints)
        out = _out_dir(args, cfg)
    n = len(schedules)
    for d in steps:
        km = knowledge_matrix(schedules, d)
        if args.format == "json":
            text = dump_json({
                "schema_version": SCHEMA_VERSION,
                "kind": "analytic_knowledge_matrix",
                "n": n,
                "d": d,
                "matrix": km.entries.tolist(),
            })
            name = f"analytic_d{d}.json"
        else:
            text = matrix_csv(km.entries, {"kind": "analytic", "n": n, "d": d})
            name = f"analytic_d{d}.csv"
        if out is None:
            sys.stdout.write(text)
        else:
            _write(out / name, text)
            print(f"wrote {out / name}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    trace = run_trial(cfg, args.trial)
    data = {"schema_version": SCHEMA_VERSION, "kind": "simulation_trace", **trace.to_dict()}
    out = _out_dir(args, cfg)
    if out is not None:
        path = out / "trace.json"
        _write(path, dump_json(data))
        print(f"wrote {path}")
    unit = "day" if cfg.mode == "sync" else "round"
    print(f"mode={cfg.mode} n={cfg.n} seed={cfg.seed} trial={args.trial} steps={len(trace.steps)}")
    for r in trace.steps:
        if r.no_supermajority:
            print(f"  {unit} {r.step}: no supermajority")
        elif r.detected:
            print(f"  {unit} {r.step}: detected {sorted(r.detected)}")
    print(f"detections: {trace.detection_count}")
    print(f"no-supermajority steps: {trace.no_supermajority_count}")
    for b in trace.beliefs:
        known = ", ".join(f"{j}@{s}" for j, s in sorted(b.known_cheaters.items())) or "-"
        print(f"  observer {b.observer_id}: {known}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = _load(args)
    matrices = estimate_certainty(cfg, workers=args.workers)
    reports = compare_all(cfg, matrices)
    out = _out_dir(args, cfg)
    meta = {"mode": cfg.mode, "n": cfg.n, "trials": cfg.trials, "seed": cfg.seed}
    report_data = {
        "schema_version": SCHEMA_VERSION,
        "kind": "comparison_report",
        "config": cfg.summary(),
        "all_pass": all(r.passed for r in reports),
        "checkpoints": [],
    }
    for m, r in zip(matrices, reports):
        entry = r.to_dict()
        if args.format == "json":
            entry["counts"] = m.counts.tolist()
        report_data["checkpoints"].append(entry)
        if out is not None and args.format == "csv":
            _write(out / f"counts_d{m.step}.csv",
                   matrix_csv(m.counts, {**meta, "d": m.step, "kind": "counts"}, fmt=str))
            _write(out / f"empirical_d{m.step}.csv",
                   matrix_csv(m.frequencies, {**meta, "d": m.step, "kind": "empirical"}))
    if out is not None:
        _write(out / "report.json", dump_json(report_data))
        print(f"wrote {out}")
    print(f"mode={cfg.mode} n={cfg.n} trials={cfg.trials} seed={cfg.seed}")
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        print(
            f"  d={r.step}: {status} max_dev={r.max_deviation:.6f} fails={r.fail_count} "
            f"no_supermajority_steps={r.no_supermajority_steps}"
        )
    return EXIT_OK if report_data["all_pass"] else EXIT_FAIL


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cheatsim",
        description="Simulate probabilistic cheaters and compare with the closed-form certainty.",
        epilog="exit codes: 0 success, 1 comparison failure, 2 usage/config/runtime error",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--scenario", "-s", help="scenario INI file")
        sp.add_argument("--out", "-o", help="output directory (default: stdout / scenario output_dir)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        if seed:
            sp.add_argument("--seed", type=int, help="override the scenario seed")
            sp.add_argument("--trials", type=int, help="override the scenario trial count")

    a = sub.add_parser("analytic", help="closed-form who-knows-whom matrix")
    common(a, seed=False)
    a.add_argument("--eps", help="inline schedules, e.g. '0,0.3,0.1/0.5' (slash = cycling sequence)")
    a.add_argument("--d", type=int, help="step count (default: scenario checkpoints)")
    a.set_defaults(func=cmd_analytic)

    s = sub.add_parser("simulate", help="run one trial and write its trace")
    common(s)
    s.add_argument("--trial", type=int, default=0, help="trial index within the seed")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="Monte Carlo estimate compared with the closed form")
    common(e)
    e.add_argument("--floor", type=float, help="absolute tolerance floor")
    e.add_argument("--workers", type=int, default=1, help="threads for trial blocks")
    e.set_defaults(func=cmd_estimate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return args.func(args)
    except (CliError, ScenarioError, ConfigError, DomainError, ValueError, RuntimeError) as exc:
        print(f"cheatsim: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
