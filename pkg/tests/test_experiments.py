import csv
import io
import json

import pytest

from kgs.errors import ConfigError
from kgs.experiments import (
    AggregateRow,
    DatasetSpec,
    ExperimentGrid,
    grid_from_config,
    report,
    run_grid,
)
from kgs.synth import SemConfig


def small(name="s", **kw):
    return DatasetSpec(name, sem=SemConfig(d=kw.pop("d", 6), n=kw.pop("n", 300), **kw))


def strip_time(records):
    return [{k: v for k, v in r.items() if k != "wall_time"} for r in records]


def test_zero_edge_grid():
    res = run_grid(ExperimentGrid((small(e_target=0),), variants=("ges",), seeds=(1, 2)))
    (row,) = res.rows
    assert row.mean_shd == 0 and row.runs == 2 and not res.failures


def test_deterministic():
    grid = ExperimentGrid((small(),), variants=("ges", "kgs_d", "kgs_c"), fractions=(0.3,), seeds=(1, 2))
    assert strip_time(run_grid(grid).records) == strip_time(run_grid(grid).records)


def test_variant_independence():
    one = ExperimentGrid((small(),), variants=("kgs_u",), fractions=(0.3,), seeds=(3,))
    many = ExperimentGrid((small(),), variants=("ges", "kgs_d", "kgs_f", "kgs_u"), fractions=(0.3,), seeds=(3,))
    a = strip_time(run_grid(one).records)
    b = [r for r in strip_time(run_grid(many).records) if r["variant"] == "kgs_u"]
    assert a == b


def test_ges_rows_identical_across_fractions():
    grid = ExperimentGrid((small(),), variants=("ges",), fractions=(0.0, 0.1, 0.25), seeds=(1, 2))
    rows = run_grid(grid).rows
    assert len({(r.mean_shd, r.mean_tpr, r.mean_fdr, r.mean_models, r.mean_time) for r in rows}) == 1


def test_zero_fraction_knowledge_equals_ges():
    grid = ExperimentGrid((small(),), variants=("ges", "kgs_d"), fractions=(0.0,), seeds=(1,))
    ges, kgs = strip_time(run_grid(grid).records)
    keys = ("shd", "tpr", "fdr", "models_estimated", "final_score")
    assert [ges[k] for k in keys] == [kgs[k] for k in keys]


def test_failures_are_recorded(tmp_path):
    bad = DatasetSpec("missing", data_path=str(tmp_path / "no.csv"), truth_path=str(tmp_path / "no.txt"))
    res = run_grid(ExperimentGrid((bad, small()), variants=("ges",), seeds=(1,)), tmp_path / "out")
    assert len(res.failures) == 1 and "error" in res.failures[0]
    assert [r.dataset for r in res.rows] == ["s"]
    lines = (tmp_path / "out" / "runs.jsonl").read_text().splitlines()
    assert len(lines) == 2


def test_outputs_written(tmp_path):
    run_grid(ExperimentGrid((small(),), variants=("ges", "kgs_d"), seeds=(1,)), tmp_path)
    rec = json.loads((tmp_path / "runs.jsonl").read_text().splitlines()[0])
    assert {"dataset", "variant", "fraction", "seed", "shd", "models_estimated", "wall_time"} <= set(rec)
    assert (tmp_path / "aggregate.csv").exists() and (tmp_path / "aggregate.md").exists()


def test_parallel_matches_serial():
    base = dict(variants=("ges", "kgs_d"), fractions=(0.25,), seeds=(1, 2, 3))
    a = run_grid(ExperimentGrid((small(),), workers=1, **base)).records
    b = run_grid(ExperimentGrid((small(),), workers=2, **base)).records
    assert strip_time(a) == strip_time(b)


class TestConfig:
    def test_from_dict(self, tmp_path):
        cfg = {"datasets": [{"name": "a", "d": 5, "n": 100}, {"name": "b", "data": "x.csv", "truth": "x.txt"}],
               "variants": ["ges"], "fractions": [0.1], "seeds": [4], "workers": 2}
        grid = grid_from_config(cfg, tmp_path)
        assert grid.datasets[0].sem.d == 5 and grid.seeds == (4,) and grid.workers == 2
        assert grid.datasets[1].data_path == str(tmp_path / "x.csv")

    @pytest.mark.parametrize("cfg", [
        {},
        {"datasets": []},
        {"datasets": [{"name": "a", "d": 5, "bogus": 1}]},
        {"datasets": [{"name": "a", "d": 5}], "variants": ["pc"]},
        {"datasets": [{"name": "a", "d": 5}], "fractions": [2.0]},
        {"datasets": [{"name": "a", "d": 5}, {"name": "a", "d": 6}]},
        {"datasets": [{"d": 5}]},
    ])
    def test_invalid(self, cfg):
        with pytest.raises(ConfigError):
            grid_from_config(cfg)


def _row(variant, fraction=0.25, shd=3.0, tpr=0.8):
    return AggregateRow("d-10", variant, fraction, shd, tpr, 0.1, 20.0, 0.05, 5)


class TestReport:
    def test_json_single(self):
        out = json.loads(report([_row("ges")], "json"))
        assert len(out) == 1 and set(out[0]) == {
            "dataset", "variant", "fraction", "mean_shd", "mean_tpr", "mean_fdr", "mean_models", "mean_time", "runs"}

    def test_csv_two_rows(self):
        rows = list(csv.reader(io.StringIO(report([_row("ges"), _row("kgs_d")], "csv"))))
        assert len(rows) == 3
        assert rows[0][:4] == ["dataset", "variant", "fraction", "mean_shd"]

    def test_markdown_groups_and_bold(self):
        md = report([_row("ges", shd=6.0, tpr=0.7), _row("kgs_d", shd=2.0, tpr=1.0)], "markdown")
        header = md.splitlines()[0]
        for group in ("SHD", "TPR", "FDR", "Run Time (s)", "Estimated Models"):
            assert group in header
        kgs_line = [l for l in md.splitlines() if l.startswith("| KGS-D")][0]
        assert "**2**" in kgs_line and "**1**" in kgs_line

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            report([], "json")
        with pytest.raises(ValueError):
            report([_row("ges")], "xml")
