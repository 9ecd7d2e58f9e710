# ==============================================================================
# test_ablation.py  –  Tests for ablation grids, the results ledger and the
#   multi-seed trend check
# ==============================================================================

import math
import os

import pytest

from singshift.db.results_store import fetch_results, get_engine, open_session
from singshift.schedule.mixing_schedule import JT_FT, JT_SCRATCH, TWO_STAGE, jt_ft
from singshift.trainer import ablation
from singshift.trainer.ablation import (
    GRID_COLUMNS,
    CellResult,
    GridCell,
    GridSpec,
    ablate,
    builtin_grid,
    cell_run_mode,
    fraction_label,
    parse_grid,
    resolve_cell,
    run_grid,
    sanitize_label,
    summarize_grid,
    trend_check,
)
from singshift.trainer.config import ConfigError
from singshift.utils.tables import read_tsv

K_GRID = """
[grid]
name = final_ratio
seeds = 7
axis = schedule.K
values = 0.0, 0.25, 0.5, 0.75, 1.0
"""


# ------------------------------------------------------------------------------
# Grid definitions
# ------------------------------------------------------------------------------
def test_parse_axis_grid():
    grid = parse_grid(K_GRID)
    assert grid.name == "final_ratio"
    assert grid.seeds == (7,)
    assert [c.label for c in grid.cells] == ["K=0.0", "K=0.25", "K=0.5", "K=0.75", "K=1.0"]
    assert grid.cells[1].overrides == (("schedule.K", "0.25"),)


def test_parse_cell_sections():
    grid = parse_grid(
        "[grid]\nname = custom\nseeds = 1, 2\n\n"
        "[cell:slow ramp]\nschedule.pattern = linear\nschedule.T_start = 0\nschedule.T_end = 4\n"
        "[cell:baseline]\n"
    )
    assert grid.seeds == (1, 2)
    assert [c.label for c in grid.cells] == ["slow ramp", "baseline"]
    assert grid.cells[0].overrides[0] == ("schedule.pattern", "linear")
    assert grid.cells[1].overrides == ()


def test_switch_fraction_axis_labels():
    grid = parse_grid("[grid]\nseeds = 3\naxis = schedule.switch_fraction\nvalues = 0, 0.25, 1\n")
    assert [c.label for c in grid.cells] == ["0 ME", "0.25 ME", "1 ME"]


@pytest.mark.parametrize(
    "text",
    [
        "[cell:a]\nschedule.K = 1.0\n",
        "[grid]\nseeds = 1\ncolour = red\n",
        "[grid]\nseeds = one\naxis = schedule.K\nvalues = 0\n",
        "[grid]\nseeds = 1\naxis = schedule.K\n",
        "[grid]\nseeds = 1\n[weird]\nx = 1\n",
        "[grid]\nseeds = 1\n[cell:a]\nK = 1\n",
        "[grid]\nseeds = 1\n",
        "[grid]\naxis = schedule.K\nvalues = 0\n",
        "[grid]\nseeds = 1\naxis = schedule.K\nvalues = 0, 0\n",
    ],
)
def test_bad_grid_files(text):
    with pytest.raises(ConfigError):
        parse_grid(text)


def test_builtin_grids(micro_exp):
    final = builtin_grid("final_ratio", micro_exp, [1])
    assert len(final.cells) == 5
    switch = builtin_grid("switch_epoch", micro_exp, [1])
    assert [c.label for c in switch.cells] == ["0 ME", "0.25 ME", "0.5 ME", "0.75 ME", "1 ME"]
    growth = builtin_grid("growth_pattern", micro_exp, [1, 2])
    assert [c.label for c in growth.cells] == ["JT-Linear", "JT-Logistic", "JT-FT", "JT-scratch"]
    assert len(builtin_grid("encoder_kind", micro_exp, [1]).cells) == 4
    analysis = builtin_grid("analysis", micro_exp, [1])
    assert [c.label for c in analysis.cells] == ["Two-Stage", "Cascade", "JT-scratch", "JT-FT"]
    assert [cell_run_mode(c) for c in analysis.cells] == ["joint", "cascade", "joint", "pretrain-finetune"]
    with pytest.raises(ConfigError):
        builtin_grid("nope", micro_exp, [1])


@pytest.mark.parametrize("name", ["final_ratio", "growth_pattern", "switch_epoch", "encoder_kind", "analysis"])
def test_builtin_cells_resolve(micro_exp, name):
    grid = builtin_grid(name, micro_exp, [1])
    for cell in grid.cells:
        resolved = resolve_cell(micro_exp, cell, 1)
        assert resolved.train.epochs == resolved.schedule.T_max


def test_labels():
    assert fraction_label(0.25) == "0.25 ME"
    assert fraction_label(0.0) == "0 ME"
    assert sanitize_label("0.25 ME") == "0.25_ME"
    assert sanitize_label("K=0.5") == "K_0.5"
    assert sanitize_label("///") == "cell"


# ------------------------------------------------------------------------------
# Cell resolution
# ------------------------------------------------------------------------------
def test_resolve_sets_seed_and_overrides(micro_exp):
    cell = GridCell("x", (("schedule.K", "0.5"), ("train.lr", "0.002")))
    exp = resolve_cell(micro_exp, cell, 42)
    assert exp.train.seed == 42
    assert exp.schedule.K == 0.5
    assert exp.train.lr == 0.002


@pytest.mark.parametrize("fraction, t_start, regime", [("0.25", 1, JT_FT), ("0", 0, JT_SCRATCH), ("1", 4, TWO_STAGE)])
def test_switch_fraction_expands_to_step(micro_exp, fraction, t_start, regime):
    exp = resolve_cell(micro_exp, GridCell("f", (("schedule.switch_fraction", fraction),)), 1)
    assert exp.schedule == jt_ft(t_start, micro_exp.schedule.T_max)
    assert ablation.classify_schedule(exp.schedule) == regime


@pytest.mark.parametrize("fraction", ["1.5", "half"])
def test_bad_switch_fraction(micro_exp, fraction):
    with pytest.raises(ConfigError):
        resolve_cell(micro_exp, GridCell("f", (("schedule.switch_fraction", fraction),)), 1)


# ------------------------------------------------------------------------------
# Summaries
# ------------------------------------------------------------------------------
def test_summary_marks_failed_cells():
    from singshift.metrics.objective import EvalReport

    grid = GridSpec("g", (1, 2), (GridCell("a"), GridCell("b")))
    report = EvalReport(mcd=5.0, f0_rmse=0.1, vuv_e=0.2, sa=0.9, n_frames=10, n_voiced_both=8)
    results = [
        CellResult("a", 1, TWO_STAGE, "ok", report),
        CellResult("a", 2, TWO_STAGE, "ok", report),
        CellResult("b", 1, JT_FT, "failed: boom"),
        CellResult("b", 2, JT_FT, "ok", report),
    ]
    rows = summarize_grid(grid, results)
    assert rows[0] == ["a", TWO_STAGE, 5.0, 0.1, 0.2, 0.9, "2/2", "ok"]
    assert rows[1][-2:] == ["1/2", "1 failed: boom"]


# ------------------------------------------------------------------------------
# Running grids
# ------------------------------------------------------------------------------
def test_ablate_writes_one_run_per_cell(micro_exp, micro_utterances, tmp_path):
    grid = parse_grid(K_GRID)
    table = ablate(grid, micro_exp, micro_utterances, tmp_path)

    assert table == tmp_path / "final_ratio.tsv"
    rows = read_tsv(table)
    assert table.read_text().splitlines()[0].split("\t") == list(GRID_COLUMNS)
    assert [r["cell"] for r in rows] == [c.label for c in grid.cells]
    assert all(r["status"] == "ok" for r in rows)
    assert rows[0]["regime"] == TWO_STAGE
    assert all(math.isfinite(float(r["MCD"])) for r in rows)

    run_dirs = sorted(p.name for p in tmp_path.iterdir() if p.is_dir())
    assert run_dirs == ["K_0.0", "K_0.25", "K_0.5", "K_0.75", "K_1.0"]
    for name in run_dirs:
        assert (tmp_path / name / "seed_7" / "eval.txt").exists()

    session = open_session(get_engine(f"sqlite:///{tmp_path / 'results.db'}"))
    stored = fetch_results(session, "final_ratio")
    session.close()
    assert len(stored) == 5
    assert all(row["val_status"] == "ok" for row in stored)


def test_invalid_cell_is_recorded_not_raised(micro_exp, micro_utterances, tmp_path):
    grid = GridSpec("bad", (7,), (GridCell("too big", (("schedule.K", "2.0"),)),))
    results = run_grid(grid, micro_exp, micro_utterances, tmp_path)
    assert len(results) == 1
    assert results[0].status.startswith("failed:")
    assert results[0].regime == "invalid"


def test_resume_skips_recorded_cells(micro_exp, micro_utterances, tmp_path, monkeypatch):
    grid = GridSpec("resume", (7,), (GridCell("gt", (("schedule.K", "0.0"),)), GridCell("ft")))
    first = run_grid(grid, micro_exp, micro_utterances, tmp_path)
    assert all(r.ok for r in first)

    calls = []
    monkeypatch.setattr(ablation, "run_cell", lambda task: calls.append(task) or pytest.fail("rerun"))
    second = run_grid(grid, micro_exp, micro_utterances, tmp_path, resume=True)

    assert calls == []
    assert [r.label for r in second] == ["gt", "ft"]
    assert second[0].report.mcd == pytest.approx(first[0].report.mcd)


def test_parallel_workers_match_serial(micro_exp, micro_utterances, tmp_path):
    grid = GridSpec("par", (7, 8), (GridCell("gt", (("schedule.K", "0.0"),)),))
    serial = run_grid(grid, micro_exp, micro_utterances, tmp_path / "serial")
    parallel = run_grid(grid, micro_exp, micro_utterances, tmp_path / "parallel", workers=2)
    assert [(r.label, r.seed) for r in parallel] == [("gt", 7), ("gt", 8)]
    for a, b in zip(serial, parallel):
        assert a.report.mcd == pytest.approx(b.report.mcd, rel=1e-6)


# ------------------------------------------------------------------------------
# Trend check
# ------------------------------------------------------------------------------
def test_trend_report_counts_wins(micro_exp, micro_utterances, tmp_path, monkeypatch):
    from singshift.metrics.objective import EvalReport

    mcd = {"jt-ft": 5.0, "jt-scratch": 6.0, "two-stage": 5.5}

    def fake_run_grid(grid, exp, utterances, out_dir, **kwargs):
        return [
            CellResult(c.label, s, "x", "ok", EvalReport(mcd[c.label], 0.1, 0.1, 1.0, 10, 10))
            for c in grid.cells for s in grid.seeds
        ]

    monkeypatch.setattr(ablation, "run_grid", fake_run_grid)
    report = trend_check(micro_exp, micro_utterances, [1, 2, 3, 4, 5], tmp_path)
    assert report.wins == 5
    assert report.passed
    rows = read_tsv(tmp_path / "trend.tsv")
    assert [int(r["seed"]) for r in rows] == [1, 2, 3, 4, 5]


def test_trend_report_fails_below_threshold(micro_exp, micro_utterances, tmp_path, monkeypatch):
    from singshift.metrics.objective import EvalReport

    def fake_run_grid(grid, exp, utterances, out_dir, **kwargs):
        out = []
        for c in grid.cells:
            for s in grid.seeds:
                value = 7.0 if (c.label == "jt-ft" and s <= 2) else 6.0
                out.append(CellResult(c.label, s, "x", "ok", EvalReport(value, 0.1, 0.1, 1.0, 10, 10)))
        return out

    monkeypatch.setattr(ablation, "run_grid", fake_run_grid)
    report = trend_check(micro_exp, micro_utterances, [1, 2, 3, 4, 5], tmp_path)
    assert report.wins == 0
    assert not report.passed


@pytest.mark.slow
@pytest.mark.skipif(os.getenv("SINGSHIFT_RUN_SLOW", "0") != "1", reason="long multi-seed training")
def test_trend_on_desk_preset(tmp_path):
    from singshift.score.synthetic_corpus import generate_synthetic_dataset
    from singshift.trainer.config import preset

    exp = preset("desk")
    utterances = generate_synthetic_dataset(exp.data, exp.data.seed, exp.dsp)
    report = trend_check(exp, utterances, [exp.train.seed + k for k in range(5)], tmp_path, workers=5)
    assert report.passed, report


# ------------------------------------------------------------------------------
# Run modes
# ------------------------------------------------------------------------------
def test_run_mode_is_not_a_config_override(micro_exp):
    cell = GridCell("c", (("run.mode", "cascade"), ("schedule.K", "0.5")))
    assert resolve_cell(micro_exp, cell, 3).schedule.K == 0.5
    assert cell_run_mode(cell) == "cascade"
    assert cell_run_mode(GridCell("plain")) == "joint"


def test_unknown_run_mode_is_recorded_as_invalid(micro_exp, micro_utterances, tmp_path):
    grid = GridSpec("modes", (7,), (GridCell("odd", (("run.mode", "sideways"),)),))
    results = run_grid(grid, micro_exp, micro_utterances, tmp_path)
    assert results[0].regime == "invalid"
    assert "sideways" in results[0].status


@pytest.mark.parametrize(
    "mode, trainer",
    [("joint", "train"), ("cascade", "cascade_train"), ("pretrain-finetune", "pretrain_and_finetune")],
)
def test_run_cell_dispatches_on_mode(micro_exp, micro_utterances, tmp_path, monkeypatch, mode, trainer):
    calls = []

    def fake_trainer(exp, corpus, out_dir, *args, **kwargs):
        calls.append((exp, args))
        raise RuntimeError("stop here")

    for name in ("train", "cascade_train", "pretrain_and_finetune"):
        monkeypatch.setattr(ablation, name, fake_trainer if name == trainer else None)

    cell = GridCell("m", (("run.mode", mode), ("schedule.switch_fraction", "0.25")))
    task = ablation.CellTask(
        "g", "m", 7, resolve_cell(micro_exp, cell, 7), tuple(micro_utterances), tmp_path, cell_run_mode(cell)
    )
    result = ablation.run_cell(task)

    assert result.status == "failed: stop here"
    assert len(calls) == 1
    assert result.regime == ("cascade" if mode == "cascade" else JT_FT)
    if mode == "pretrain-finetune":
        assert calls[0][1] == (1,)


def test_analysis_grid_runs_every_regime(micro_exp, micro_utterances, tmp_path):
    grid = builtin_grid("analysis", micro_exp, [7])
    table = ablate(grid, micro_exp, micro_utterances, tmp_path)

    rows = {r["cell"]: r for r in read_tsv(table)}
    assert list(rows) == ["Two-Stage", "Cascade", "JT-scratch", "JT-FT"]
    assert all(r["status"] == "ok" for r in rows.values())
    assert [rows[c]["regime"] for c in rows] == [TWO_STAGE, "cascade", JT_SCRATCH, JT_FT]
    assert (tmp_path / "Cascade" / "seed_7" / "phase2_vocoder" / "log.txt").exists()
    assert (tmp_path / "JT-FT" / "seed_7" / "eval.txt").exists()


def test_trend_report_with_cascade(micro_exp, micro_utterances, tmp_path, monkeypatch):
    from singshift.metrics.objective import EvalReport

    mcd = {"jt-ft": 5.0, "jt-scratch": 6.0, "two-stage": 5.5, "cascade": 4.0}
    seen = []

    def fake_run_grid(grid, exp, utterances, out_dir, **kwargs):
        seen.append(grid)
        return [
            CellResult(c.label, s, "x", "ok", EvalReport(mcd[c.label], 0.1, 0.1, 1.0, 10, 10))
            for c in grid.cells for s in grid.seeds
        ]

    monkeypatch.setattr(ablation, "run_grid", fake_run_grid)
    report = trend_check(micro_exp, micro_utterances, [1, 2], tmp_path, with_cascade=True)

    assert [cell_run_mode(c) for c in seen[0].cells][-1] == "cascade"
    assert report.cascade == [4.0, 4.0]
    assert report.cascade_wins == 0
    assert report.passed
    rows = read_tsv(tmp_path / "trend.tsv")
    assert rows[0]["MCD_cascade"] == "4"
    assert rows[0]["jt_ft_beats_cascade"] == "0"
