import csv
import filecmp
from pathlib import Path

import numpy as np
import pytest

from rembo.bench import ObjectiveSpec
from rembo.cli import main
from rembo.experiment import (AGGREGATE_COLUMNS, ConfigError, aggregate, parse_config_text, read_aggregate,
                              replication_seeds, verify_aggregates)
from rembo.report import RunReport

TINY = """\
version = 1
objective = branin_embedded
D = 25
mode = rembo
d = 2, 3
k = 1, 2
budget = 6
acq_evals_per_dim = 40
replications = 2
seed = 5
"""


def write(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_parse_defaults_and_grid():
    cfg = parse_config_text(TINY)
    assert cfg.d_values == (2, 3) and cfg.k_values == (1, 2) and cfg.replications == 2
    assert [(c.d, c.k) for c in cfg.cells("rembo")] == [(2, 1), (3, 1), (2, 2), (3, 2)]
    assert cfg.run.acq_evals_per_dim == 40 and cfg.global_seed == 5
    assert cfg.cells("random")[0].k == 1


@pytest.mark.parametrize("text,line,fragment", [
    ("D = 25\nversion = 1\n", 1, "first setting"),
    ("version = 2\n", 1, "unsupported"),
    ("version = 1\nbudget = 10\nbudget = 12\n", 3, "duplicate"),
    ("version = 1\n\n# note\ncolour = red\n", 4, "unknown key"),
    ("version = 1\nbudget = lots\n", 2, "budget"),
    ("version = 1\nnot a setting\n", 2, "key = value"),
    ("version = 1\nk = 4\nbudget = 7\n", 3, "budget"),
    ("version = 1\nobjective = hartmann\n", 2, "unknown objective"),
    ("version = 1\nreplications = 0\n", 2, "replications"),
    ("version = 1\nd = 2, , 3\n", 2, "empty item"),
])
def test_line_anchored_errors(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config_text(text, "x.cfg")
    assert info.value.line == line
    assert f"x.cfg:{line}:" in str(info.value)
    assert fragment in str(info.value)


def test_missing_version():
    with pytest.raises(ConfigError, match="version"):
        parse_config_text("")


def test_replication_seeds_pair_methods():
    a = replication_seeds(7, 3)
    assert a == replication_seeds(7, 3) and a != replication_seeds(7, 4) and a != replication_seeds(8, 3)
    spec = ObjectiveSpec(D=25)
    f, g = spec.build(a[0]), spec.build(a[0])
    assert (f.i, f.j) == (g.i, g.j)


def test_aggregate_oracle():
    rows = aggregate([[3.0, 1.0], [5.0, 2.0, 0.5], [1.0, 1.0]])
    assert rows[0] == (1, 3.0, 2.0, 3.0, 4.0, 3)
    assert rows[2] == (3, 0.5, 0.5, 0.5, 0.5, 1)
    assert aggregate([]) == []


def test_run_artifacts_determinism_and_verify(tmp_path, capsys):
    cfg = write(tmp_path, TINY)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--output", str(out1)]) == 0
    assert main(["run", "--config", cfg, "--output", str(out2), "--jobs", "2"]) == 0
    files = sorted(p.relative_to(out1) for p in out1.rglob("*") if p.is_file())
    assert len(files) == 4 * 3 + 2  # 4 cells x (2 reps + aggregate), echo, summary
    for rel in files:
        assert filecmp.cmp(out1 / rel, out2 / rel, shallow=False), rel
    summary = (out1 / "summary.csv").read_text().splitlines()
    assert summary[0] == "k,d=2,d=3" and len(summary) == 3
    assert all("±" in cell for row in summary[1:] for cell in row.split(",")[1:])

    capsys.readouterr()
    assert main(["verify-aggregates", "--output", str(out1)]) == 0
    assert capsys.readouterr().out.count("ok") == 4
    agg = out1 / "d2_k1" / "aggregate.csv"
    lines = agg.read_text().splitlines()
    cells = lines[3].split(",")
    cells[1] = repr(float(cells[1]) + 1e-9)
    lines[3] = ",".join(cells)
    agg.write_text("\n".join(lines) + "\n")
    assert main(["verify-aggregates", "--output", str(out1)]) == 2
    assert main(["verify-aggregates", "--output", str(out1), "--tol", "1e-6"]) == 0


def test_seed_flag_changes_output(tmp_path):
    cfg = write(tmp_path, TINY.replace("d = 2, 3", "d = 2").replace("k = 1, 2", "k = 1"))
    main(["run", "--config", cfg, "--output", str(tmp_path / "a")])
    main(["run", "--config", cfg, "--output", str(tmp_path / "b"), "--seed", "6"])
    assert (tmp_path / "a/d2_k1/rep000.csv").read_text() != (tmp_path / "b/d2_k1/rep000.csv").read_text()


def test_single_replication_aggregate_equals_trace(tmp_path):
    text = TINY.replace("replications = 2", "replications = 1").replace("d = 2, 3", "d = 2")
    out = tmp_path / "o"
    assert main(["run", "--config", write(tmp_path, text), "--output", str(out)]) == 0
    trace = RunReport.from_csv(out / "d2_k2" / "rep000.csv").gaps()
    agg = read_aggregate(out / "d2_k2" / "aggregate.csv")
    for col in (1, 2, 3, 4):
        assert np.array_equal(agg[:, col], trace)
    assert np.all(agg[:, 5] == 1)
    assert agg[:, 0].tolist() == list(range(1, 7))


def test_compare(tmp_path, capsys):
    text = """\
version = 1
D = 25
modes = rembo, bo, random
budget = 4
acq_evals_per_dim = 40
acq_max_evals = 200
replications = 2
"""
    out = tmp_path / "cmp"
    assert main(["compare", "--config", write(tmp_path, text), "--output", str(out)]) == 0
    for mode_dir in ("d2_k1", "bo", "random"):
        with open(out / mode_dir / "aggregate.csv") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == AGGREGATE_COLUMNS and len(rows) == 5
    ranking = (out / "ranking.csv").read_text().splitlines()
    assert ranking[0].startswith("rank,mode") and len(ranking) == 4
    assert sorted(r.split(",")[1] for r in ranking[1:]) == ["bo", "random", "rembo"]
    assert all(ok for _, ok, _ in verify_aggregates(out))

    single = text.replace("modes = rembo, bo, random", "modes = rembo")
    assert main(["compare", "--config", write(tmp_path, single, "s.cfg"), "--output", str(out)]) == 1


def test_validation_exit_codes(tmp_path, capsys):
    assert main([]) == 1
    assert main(["run"]) == 1
    assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 1
    bad = write(tmp_path, "version = 1\nk = 4\nbudget = 7\n")
    assert main(["run", "--config", bad]) == 1
    assert "exp.cfg:3" in capsys.readouterr().err
    assert main(["run", "--config", write(tmp_path, TINY), "--jobs", "0"]) == 1
    assert main(["verify-aggregates", "--output", str(tmp_path / "none")]) == 1


def test_theory_commands(capsys):
    assert main(["theory", "theorem1", "--D", "10", "--de", "2", "--d", "2", "--trials", "1000"]) == 0
    assert "verdict=pass" in capsys.readouterr().out
    assert main(["theory", "theorem2", "--epsilon", "0.1", "--trials", "10000"]) == 0
    line = capsys.readouterr().out
    assert "frequency=" in line and "threshold=" in line
    assert main(["theory", "theorem1", "--de", "3", "--d", "2"]) == 1
    assert main(["theory", "theorem2", "--epsilon", "1.5"]) == 1
    assert main(["theory", "regret", "--d", "1", "--seeds", "1", "--budget", "8", "--max-slope", "10"]) == 0


@pytest.mark.parametrize("path", sorted((Path(__file__).parents[1] / "configs").glob("*.cfg")), ids=lambda p: p.name)
def test_shipped_configs_parse(path):
    from rembo.experiment import load_config

    cfg = load_config(path)
    assert cfg.replications >= 1 and cfg.modes
