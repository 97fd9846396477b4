"""Command-line entry point: ``rembo {run,compare,theory,verify-aggregates}``.

Exit codes: 0 success, 1 invalid config or arguments, 2 runtime failure
(including failed theorem verdicts and aggregate mismatches).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import theory
from .experiment import (ConfigError, ExperimentConfig, gap_summary, load_config, run_replications,
                         verify_aggregates, write_cell)
from .report import _atomic_write

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2
log = logging.getLogger("rembo")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; we reserve 2 for runtime failures
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p):
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--seed", type=int, help="global seed (overrides the config)")
    p.add_argument("--jobs", type=int, default=1, help="replications run in parallel")
    p.add_argument("--output", help="output directory (overrides the config)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rembo", description="Random-embedding Bayesian optimization experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    _common(sub.add_parser("run", help="replicate one method over a (k, d) grid"))
    _common(sub.add_parser("compare", help="paired comparison of two or more methods"))

    th = sub.add_parser("theory", help="Monte-Carlo checks of the embedding theorems")
    which = th.add_subparsers(dest="check", required=True, parser_class=_Parser)
    t1 = which.add_parser("theorem1")
    t1.add_argument("--D", type=int, default=10)
    t1.add_argument("--de", type=int, default=2)
    t1.add_argument("--d", type=int, default=None, help="embedding dimension (default: de)")
    t1.add_argument("--trials", type=int, default=1000)
    t1.add_argument("--seed", type=int, default=0)
    t2 = which.add_parser("theorem2")
    t2.add_argument("--D", type=int, default=10)
    t2.add_argument("--de", type=int, default=2)
    t2.add_argument("--d", type=int, default=None)
    t2.add_argument("--epsilon", type=float, default=0.1)
    t2.add_argument("--trials", type=int, default=10_000)
    t2.add_argument("--seed", type=int, default=0)
    rg = which.add_parser("regret")
    rg.add_argument("--d", type=int, default=1)
    rg.add_argument("--seeds", type=int, default=10)
    rg.add_argument("--budget", type=int, default=40)
    rg.add_argument("--max-slope", type=float, default=-0.5, help="pass iff the fitted slope is at most this")

    va = sub.add_parser("verify-aggregates", help="recompute aggregate.csv files from replication CSVs")
    va.add_argument("--output", required=True, help="directory written by run or compare")
    va.add_argument("--tol", type=float, default=1e-12)
    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.global_seed = args.seed
    if args.output is not None:
        cfg.output_dir = args.output
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    return cfg


def _config_echo(cfg: ExperimentConfig) -> str:
    lines = [f"global_seed = {cfg.global_seed}", f"replications = {cfg.replications}",
             f"objective = {cfg.objective!r}", f"modes = {', '.join(cfg.modes)}",
             f"d = {', '.join(map(str, cfg.d_values))}", f"k = {', '.join(map(str, cfg.k_values))}"]
    lines += [f"{k} = {v}" for k, v in cfg.run.echo().items() if k not in ("mode", "d", "k", "seed")]
    return "\n".join(lines) + "\n"


def _run_cells(cfg: ExperimentConfig, mode: str, root: Path, jobs: int):
    """Run every grid cell of ``mode``; returns [(run config, reports, n_failed)]."""
    out = []
    for run in cfg.cells(mode):
        cell_dir = root / (f"d{run.d}_k{run.k}" if mode == "rembo" else mode)
        log.info("%s d=%d k=%d: %d replications", mode, run.d, run.k, cfg.replications)
        results = run_replications(cfg.objective, run, cfg.global_seed, cfg.replications, jobs)
        reports = write_cell(cell_dir, results)
        failed = sum(r.report is None for r in results)
        for r in results:
            if r.error:
                print(f"replication {r.rep} failed: {r.error}", file=sys.stderr)
        out.append((run, reports, failed))
    return out


def _fmt_cell(gaps) -> str:
    mean, std = gap_summary(gaps)
    return f"{mean:.4f} ± {std:.4f}"


def cmd_run(args) -> int:
    cfg = _load(args)
    if len(cfg.modes) != 1:
        raise UsageError("run takes a single mode; use compare for several")
    root = Path(cfg.output_dir)
    _atomic_write(root / "config.echo.txt", _config_echo(cfg))
    cells = _run_cells(cfg, cfg.modes[0], root, args.jobs)
    if cfg.modes[0] == "rembo":
        by = {(run.k, run.d): [r.final_gap for r in reports] for run, reports, _ in cells}
        header = "k," + ",".join(f"d={d}" for d in cfg.d_values)
        rows = [f"{k}," + ",".join(_fmt_cell(by[(k, d)]) for d in cfg.d_values) for k in cfg.k_values]
        _atomic_write(root / "summary.csv", "\n".join([header, *rows]) + "\n")
        print(header)
        print("\n".join(rows))
    else:
        _, reports, _ = cells[0]
        print(f"{cfg.modes[0]}: final gap {_fmt_cell([r.final_gap for r in reports])}")
    return EXIT_RUNTIME if any(failed for *_, failed in cells) else EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load(args)
    if len(cfg.modes) < 2:
        raise UsageError("compare needs at least two modes")
    if len(set(cfg.modes)) != len(cfg.modes):
        raise UsageError("modes must be distinct")
    if len(cfg.d_values) != 1 or len(cfg.k_values) != 1:
        raise UsageError("compare takes a single d and k")
    root = Path(cfg.output_dir)
    _atomic_write(root / "config.echo.txt", _config_echo(cfg))
    summary, any_failed = [], False
    for mode in cfg.modes:
        cells = _run_cells(cfg, mode, root, args.jobs)
        run, reports, failed = cells[0]
        any_failed |= bool(failed)
        gaps = np.array([r.final_gap for r in reports])
        summary.append((mode, float(np.median(gaps)) if len(gaps) else float("nan"),
                        *gap_summary(gaps), len(gaps)))
    order = sorted(range(len(summary)), key=lambda i: (np.nan_to_num(summary[i][1], nan=np.inf), i))
    lines = ["rank,mode,median_final_gap,mean_final_gap,std_final_gap,n"]
    for rank, i in enumerate(order, 1):
        mode, med, mean, std, n = summary[i]
        lines.append(f"{rank},{mode},{med!r},{mean!r},{std!r},{n}")
    _atomic_write(root / "ranking.csv", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_RUNTIME if any_failed else EXIT_OK


def cmd_theory(args) -> int:
    if args.check == "regret":
        if args.d < 1 or args.seeds < 1 or args.budget < 4:
            raise UsageError("need d >= 1, seeds >= 1 and budget >= 4")
        res = theory.regret_decay_probe(args.d, args.seeds, args.budget)
        ok = res.slope <= args.max_slope
        print(f"regret d={args.d} seeds={args.seeds} budget={args.budget}: slope={res.slope:.4f} "
              f"(pass iff <= {args.max_slope}) excluded={res.excluded} verdict={'pass' if ok else 'fail'}")
        return EXIT_OK if ok else EXIT_RUNTIME
    d = args.de if args.d is None else args.d
    if args.de < 1 or args.D < args.de:
        raise UsageError("need 1 <= de <= D")
    if d < args.de:
        raise UsageError(f"d={d} is below de={args.de}")
    if args.trials < 1:
        raise UsageError("trials must be positive")
    if args.check == "theorem1":
        inst = theory.EffectiveSubspaceInstance.random(args.D, args.de, args.seed)
        rep = theory.check_theorem1(inst, d, args.trials, args.seed + 1)
        detail = f"tolerance={rep.bound:g} degenerate={rep.degenerate}"
    else:
        if not 0 < args.epsilon < 1:
            raise UsageError("epsilon must lie in (0, 1)")
        inst = theory.EffectiveSubspaceInstance.random(args.D, args.de, args.seed, axis_aligned=True)
        rep = theory.check_theorem2(inst, d, args.epsilon, args.trials, args.seed + 1)
        detail = f"epsilon={args.epsilon:g} frequency={rep.frequency:.4f} threshold={rep.bound:.4f}"
    print(f"{args.check} D={args.D} de={args.de} d={d}: trials={rep.trials} successes={rep.successes} "
          f"{detail} verdict={'pass' if rep.verdict else 'fail'}")
    return EXIT_OK if rep.verdict else EXIT_RUNTIME


def cmd_verify(args) -> int:
    root = Path(args.output)
    if not root.is_dir():
        raise UsageError(f"{root} is not a directory")
    results = verify_aggregates(root, args.tol)
    if not results:
        raise UsageError(f"no aggregate.csv under {root}")
    for path, ok, msg in results:
        print(f"{'ok  ' if ok else 'FAIL'} {path}: {msg}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_RUNTIME


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "theory": cmd_theory, "verify-aggregates": cmd_verify}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - any crash maps to the runtime exit code
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
