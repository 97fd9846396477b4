import math

import numpy as np

from rembo.report import TRACE_COLUMNS, RunReport, TraceRow

BRANIN = 0.39788735772973816


def _report():
    rows = [TraceRow(1, 3.0, 2.6, 0, 1, 1.0, 50.0, 0),
            TraceRow(2, 1.0, 0.6, 1, 1, 0.5, 50.0, 1),
            TraceRow(3, 1.0, 0.6, 0, 2, math.nan, math.nan, 0)]
    return RunReport(rows, {"mode": "rembo"}, seed=3, wall_time=1.23)


def test_csv_round_trip(tmp_path):
    rep = _report()
    text = rep.to_csv(tmp_path / "sub" / "r.csv")
    assert text.splitlines()[0] == ",".join(TRACE_COLUMNS)
    assert (tmp_path / "sub" / "r.csv").read_text() == text
    back = RunReport.from_csv(tmp_path / "sub" / "r.csv")
    assert back.evals == 3 and back.best_value == 1.0 and back.final_gap == 0.6
    assert back.trace[:2] == rep.trace[:2]
    assert math.isnan(back.trace[2].ell)
    assert isinstance(back.trace[0].C, int)
    assert not list(tmp_path.glob("**/*.tmp"))


def test_floats_round_trip_exactly(tmp_path):
    v = 0.1 + 0.2
    rep = RunReport([TraceRow(1, v, v - BRANIN, 0, 1, 1 / 3, 50.0, 0)])
    rep.to_csv(tmp_path / "x.csv")
    assert RunReport.from_csv(tmp_path / "x.csv").trace == rep.trace


def test_wall_time_not_serialized():
    a, b = _report(), _report()
    b.wall_time = 99.0
    assert a.to_csv() == b.to_csv()
    assert "1.23" not in a.to_csv()


def test_gaps_vector():
    assert np.array_equal(_report().gaps(), [2.6, 0.6, 0.6])
