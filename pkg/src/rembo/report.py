"""Run traces and their CSV form."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

TRACE_COLUMNS = ("cumulative_evals", "best_value", "best_gap", "sub_run", "step", "ell", "U", "C")


@dataclass(frozen=True)
class TraceRow:
    cumulative_evals: int
    best_value: float
    best_gap: float
    sub_run: int
    step: int
    ell: float
    U: float
    C: int


@dataclass
class RunReport:
    trace: list[TraceRow]
    config: dict = field(default_factory=dict)
    seed: int = 0
    wall_time: float = 0.0
    failures: list[tuple[int, int, str]] = field(default_factory=list)

    @property
    def evals(self) -> int:
        return len(self.trace)

    @property
    def best_value(self) -> float:
        return self.trace[-1].best_value

    @property
    def final_gap(self) -> float:
        return self.trace[-1].best_gap

    def gaps(self) -> np.ndarray:
        return np.array([r.best_gap for r in self.trace])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.trace:
            w.writerow([_fmt(getattr(r, c)) for c in TRACE_COLUMNS])
        text = buf.getvalue()
        if path is not None:
            _atomic_write(Path(path), text)
        return text

    @classmethod
    def from_csv(cls, path) -> "RunReport":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        trace = []
        for r in rows:
            kw = {}
            for f in fields(TraceRow):
                v = r[f.name]
                kw[f.name] = int(v) if f.type in ("int", int) else float(v)
            trace.append(TraceRow(**kw))
        return cls(trace)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)
