"""Experiment configs, replication runner and aggregate files.

Config files are flat ``key = value`` text with ``#`` comments. The first
setting must be ``version = 1``. List-valued keys take comma-separated values.
"""

from __future__ import annotations

import csv
import io
import math
import shlex
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .acquisition import AcquisitionSpec
from .bench import EvaluationError, ObjectiveSpec
from .driver import RunConfig, run_interleaved
from .report import RunReport, _atomic_write, _fmt

CONFIG_VERSION = 1
AGGREGATE_COLUMNS = ("eval_index", "mean_gap", "q25", "q50", "q75", "n")


class ConfigError(ValueError):
    """Invalid config; ``line`` is 1-based when the problem has a location."""

    def __init__(self, message: str, path: str = "<config>", line: Optional[int] = None):
        self.path, self.line, self.message = path, line, message
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}")


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _opt(conv):
    def parse(s):
        return None if s.lower() in ("none", "") else conv(s)

    return parse


def _list(conv):
    def parse(s):
        items = [p.strip() for p in s.split(",")]
        if any(not p for p in items):
            raise ValueError(f"empty item in list {s!r}")
        return tuple(conv(p) for p in items)

    return parse


KEYS = {
    "version": int,
    # objective
    "objective": str,
    "D": int,
    "rotation_seed": _opt(int),
    "effective_dims": _list(int),
    "command": shlex.split,
    "param_template": _opt(str),
    "timeout": float,
    "categorical": _list(int),
    "known_optimum": _opt(float),
    "max_concurrent": int,
    # optimizer
    "mode": str,
    "modes": _list(str),
    "d": _list(int),
    "k": _list(int),
    "kernel": str,
    "budget": int,
    "acquisition": str,
    "ucb_beta": _opt(float),
    "ell0": float,
    "L": float,
    "U": float,
    "t_sigma": float,
    "adapt_ell": _bool,
    "jitter": float,
    "acq_evals_per_dim": int,
    "acq_max_evals": int,
    "embedding_scale": float,
    # protocol
    "replications": int,
    "seed": int,
    "output": str,
}
_OBJECTIVE_KEYS = {f.name for f in fields(ObjectiveSpec)} - {"id"}
_RUN_KEYS = {"kernel", "budget", "ell0", "L", "U", "t_sigma", "adapt_ell", "jitter",
             "acq_evals_per_dim", "acq_max_evals", "embedding_scale"}


@dataclass
class ExperimentConfig:
    objective: ObjectiveSpec
    run: RunConfig
    replications: int = 1
    output_dir: str = "results"
    global_seed: int = 0
    d_values: tuple[int, ...] = (2,)
    k_values: tuple[int, ...] = (1,)
    modes: tuple[str, ...] = ("rembo",)
    lines: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")

    def cells(self, mode: str) -> list[RunConfig]:
        """One RunConfig per (k, d) grid point; baselines ignore the grid."""
        if mode != "rembo":
            return [replace(self.run, mode=mode, k=1)]
        return [replace(self.run, mode=mode, d=d, k=k) for k in self.k_values for d in self.d_values]


def parse_config_text(text: str, path: str = "<config>") -> ExperimentConfig:
    values, lines = {}, {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", path, no)
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", path, no)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", path, no)
        if not lines and key != "version":
            raise ConfigError("the first setting must be 'version = 1'", path, no)
        try:
            values[key] = KEYS[key](val)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", path, no) from None
        lines[key] = no
    if "version" not in values:
        raise ConfigError("missing 'version = 1'", path)
    if values["version"] != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {values['version']}", path, lines["version"])

    def fail(key, exc):
        raise ConfigError(str(exc), path, lines.get(key))

    try:
        obj_kw = {k: v for k, v in values.items() if k in _OBJECTIVE_KEYS}
        objective = ObjectiveSpec(id=values.get("objective", "branin_embedded"), **obj_kw)
    except ValueError as exc:
        fail("objective", exc)

    if "mode" in values and "modes" in values:
        fail("modes", "set either 'mode' or 'modes', not both")
    modes = values.get("modes") or (values.get("mode", "rembo"),)
    d_values = values.get("d", (2,))
    k_values = values.get("k", (1,))
    for key, seq in (("d", d_values), ("k", k_values)):
        if any(v < 1 for v in seq):
            fail(key, f"{key} values must be positive")
    try:
        acq = AcquisitionSpec(values.get("acquisition", "ei"), values.get("ucb_beta"))
    except ValueError as exc:
        fail("acquisition", exc)
    run_kw = {k: v for k, v in values.items() if k in _RUN_KEYS}
    try:
        run = RunConfig(mode=modes[0], d=d_values[0], k=k_values[0], acquisition=acq, **run_kw)
        for m in modes:
            for k in k_values:
                for d in d_values:
                    replace(run, mode=m, d=d, k=k if m == "rembo" else 1)
    except ValueError as exc:
        fail(_key_mentioned(str(exc), lines), exc)
    try:
        return ExperimentConfig(objective, run, values.get("replications", 1), values.get("output", "results"),
                                values.get("seed", 0), tuple(d_values), tuple(k_values), tuple(modes), lines)
    except ValueError as exc:
        fail("replications", exc)


def _key_mentioned(message: str, lines: dict) -> Optional[str]:
    # best-effort line anchor for errors raised by the dataclass validators
    words = set(message.replace("=", " ").replace("'", " ").split())
    for key in ("budget", "kernel", "mode", "modes", "k", "d", "L", "U", "ell0"):
        if key in words and key in lines:
            return key
    return "modes" if "modes" in lines else ("mode" if "mode" in lines else None)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(p)) from None
    return parse_config_text(text, str(p))


# ---------------------------------------------------------------------------
# running


def replication_seeds(global_seed: int, rep: int) -> tuple[int, int]:
    """(objective seed, optimizer seed) for one replication.

    The objective seed does not depend on mode or grid cell, so every
    method sees the same hidden problem in replication ``rep``.
    """
    obj_ss, run_ss = np.random.SeedSequence([global_seed, rep]).spawn(2)
    return (int(obj_ss.generate_state(1)[0]), int(run_ss.generate_state(1)[0]))


def run_replication(objective: ObjectiveSpec, run: RunConfig, global_seed: int, rep: int) -> RunReport:
    obj_seed, run_seed = replication_seeds(global_seed, rep)
    return run_interleaved(replace(run, seed=run_seed), objective.build(obj_seed))


@dataclass
class ReplicationResult:
    rep: int
    report: Optional[RunReport]
    error: Optional[str] = None


def _replicate(args) -> ReplicationResult:
    objective, run, global_seed, rep = args
    try:
        return ReplicationResult(rep, run_replication(objective, run, global_seed, rep))
    except (EvaluationError, ArithmeticError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        return ReplicationResult(rep, None, f"{type(exc).__name__}: {exc}")


def run_replications(objective: ObjectiveSpec, run: RunConfig, global_seed: int, replications: int,
                     jobs: int = 1) -> list[ReplicationResult]:
    tasks = [(objective, run, global_seed, r) for r in range(replications)]
    if jobs <= 1 or replications == 1:
        return [_replicate(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_replicate, tasks))


def aggregate(gap_traces) -> list[tuple]:
    """Per evaluation index: mean gap, quartiles and the number of traces reaching it."""
    traces = [np.asarray(g, dtype=float) for g in gap_traces]
    if not traces:
        return []
    rows = []
    for t in range(max(len(g) for g in traces)):
        col = np.array([g[t] for g in traces if len(g) > t])
        q25, q50, q75 = np.quantile(col, [0.25, 0.5, 0.75])
        rows.append((t + 1, float(np.mean(col)), float(q25), float(q50), float(q75), len(col)))
    return rows


def aggregate_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_COLUMNS)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def read_aggregate(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([[float(r[c]) for c in AGGREGATE_COLUMNS] for r in rows]).reshape(-1, len(AGGREGATE_COLUMNS))


def write_cell(out_dir: Path, results: list[ReplicationResult]) -> list[RunReport]:
    """Write one CSV per replication, a failure log if needed, and the aggregate."""
    out_dir.mkdir(parents=True, exist_ok=True)
    reports, log_lines = [], []
    for res in results:
        if res.report is None:
            log_lines.append(f"{res.rep},replication,{res.error}")
            continue
        res.report.to_csv(out_dir / f"rep{res.rep:03d}.csv")
        for sub, ev, kind in res.report.failures:
            log_lines.append(f"{res.rep},{sub}:{ev},{kind}")
        reports.append(res.report)
    if log_lines:
        _atomic_write(out_dir / "failures.csv", "replication,where,error\n" + "\n".join(log_lines) + "\n")
    _atomic_write(out_dir / "aggregate.csv", aggregate_csv(aggregate([r.gaps() for r in reports])))
    return reports


def gap_summary(gaps) -> tuple[float, float]:
    g = np.asarray(gaps, dtype=float)
    if len(g) == 0:
        return math.nan, math.nan
    return float(g.mean()), float(g.std(ddof=1)) if len(g) > 1 else 0.0


def verify_aggregates(root, tol: float = 1e-12) -> list[tuple[Path, bool, str]]:
    """Recompute every ``aggregate.csv`` under ``root`` from the sibling ``rep*.csv`` files."""
    out = []
    for agg_path in sorted(Path(root).rglob("aggregate.csv")):
        reps = sorted(agg_path.parent.glob("rep*.csv"))
        stored = read_aggregate(agg_path)
        fresh = np.array(aggregate([RunReport.from_csv(p).gaps() for p in reps]), dtype=float)
        fresh = fresh.reshape(-1, len(AGGREGATE_COLUMNS))
        if stored.shape != fresh.shape:
            out.append((agg_path, False, f"{len(stored)} rows stored, {len(fresh)} recomputed"))
            continue
        same = np.isclose(stored, fresh, rtol=0, atol=tol, equal_nan=True)
        if same.all():
            out.append((agg_path, True, f"{len(stored)} rows from {len(reps)} replications"))
        else:
            r, c = np.argwhere(~same)[0]
            out.append((agg_path, False, f"row {r + 1} column {AGGREGATE_COLUMNS[c]} differs"))
    return out
