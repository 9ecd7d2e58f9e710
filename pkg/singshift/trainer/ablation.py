# ==============================================================================
# ablation.py  –  Grids of training runs and their evaluation tables
# ------------------------------------------------------------------------------
# Grid file:
#
#   [grid]
#   name = final_ratio
#   seeds = 777, 778
#   axis = schedule.K              (optional shorthand: one cell per value)
#   values = 0, 0.25, 0.5
#
#   [cell:JT-FT]
#   schedule.pattern = step
#   schedule.T_start = 15
#   schedule.T_end = 15
#
#   [cell:Cascade]
#   run.mode = cascade             (joint | pretrain-finetune | cascade)
#
# Every cell runs once per seed in <out>/<cell>/seed_<s>/. A failing run is
# recorded (table + results store) and the grid carries on. Workers only train
# and evaluate; the parent process alone writes the results store.
# ==============================================================================

from __future__ import annotations

import math
import re
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from singshift.db.results_store import (
    RESULTS_TABLE,
    STATUS_OK,
    build_result_row,
    completed_cells,
    ensure_schema,
    fetch_results,
    get_engine,
    open_session,
    report_from_row,
    upsert_result,
)
from singshift.metrics.objective import EvalReport, corpus_means
from singshift.schedule.mixing_schedule import Pattern, classify_schedule, jt_ft
from singshift.score.synthetic_corpus import Utterance
from singshift.trainer.config import ConfigError, ExperimentConfig
from singshift.trainer.corpus import Corpus, build_corpus
from singshift.trainer.evaluation import evaluate_corpus, write_eval_table
from singshift.trainer.joint_trainer import TrainState, cascade_train, pretrain_and_finetune, train
from singshift.utils.env_utils import get_results_db_url
from singshift.utils.logging_utils import setup_logger
from singshift.utils.run_config import apply_overrides, format_value, parse_sections
from singshift.utils.tables import write_tsv

LOGGER = setup_logger("ablation")

GRID_COLUMNS = ("cell", "regime", "MCD", "F0_RMSE", "VUV_E", "SA", "seeds", "status")
SWITCH_FRACTION_KEY = "schedule.switch_fraction"
RUN_MODE_KEY = "run.mode"
RESERVED_KEYS = (SWITCH_FRACTION_KEY, RUN_MODE_KEY)

RUN_JOINT = "joint"
RUN_FINETUNE = "pretrain-finetune"
RUN_CASCADE = "cascade"
CELL_RUN_MODES = (RUN_JOINT, RUN_FINETUNE, RUN_CASCADE)
REGIME_CASCADE = "cascade"
SWITCH_FRACTIONS = (0.0, 0.25, 0.5, 0.75, 1.0)
FINAL_RATIOS = (0.0, 0.25, 0.5, 0.75, 1.0)

PathLike = Union[str, Path]
Overrides = Tuple[Tuple[str, str], ...]


@dataclass(frozen=True)
class GridCell:
    label: str
    overrides: Overrides = ()


@dataclass(frozen=True)
class GridSpec:
    name: str
    seeds: Tuple[int, ...]
    cells: Tuple[GridCell, ...]

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError(f"grid `{self.name}` lists no seeds")
        if not self.cells:
            raise ConfigError(f"grid `{self.name}` has no cells")
        labels = [c.label for c in self.cells]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"grid `{self.name}` repeats a cell label")


@dataclass(frozen=True)
class CellTask:
    grid: str
    label: str
    seed: int
    exp: ExperimentConfig
    utterances: Tuple[Utterance, ...]
    run_dir: Path
    mode: str = RUN_JOINT


@dataclass
class CellResult:
    label: str
    seed: int
    regime: str
    status: str
    report: Optional[EvalReport] = None
    run_dir: Optional[Path] = None

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


@dataclass
class TrendReport:
    seeds: List[int]
    jt_ft: List[float]
    jt_scratch: List[float]
    two_stage: List[float]
    wins: int = 0  # seeds where jt-ft < jt-scratch
    weak_wins: int = 0  # seeds where jt-ft <= two-stage
    passed: bool = False
    failures: List[str] = field(default_factory=list)
    cascade: List[float] = field(default_factory=list)  # empty unless requested
    cascade_wins: int = 0  # seeds where jt-ft < cascade


# ------------------------------------------------------------------------------
# Labels and overrides
# ------------------------------------------------------------------------------


def fraction_label(fraction: float) -> str:
    """0.25 → `0.25 ME` (fraction of the maximum epoch)."""
    return f"{fraction:g} ME"


def sanitize_label(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", label).strip("_") or "cell"


def _step_overrides(K: float, epoch: int) -> Overrides:
    return (
        ("schedule.pattern", Pattern.STEP.value),
        ("schedule.K", format_value(float(K))),
        ("schedule.T_start", str(epoch)),
        ("schedule.T_end", str(epoch)),
    )


def resolve_cell(exp: ExperimentConfig, cell: GridCell, seed: int) -> ExperimentConfig:
    """
    Base config + the cell's overrides + `train.seed`.

    `schedule.switch_fraction = f` expands to a step schedule with K = 1
    switching at round(f · T_max).
    """
    plain = {k: v for k, v in cell.overrides if k not in RESERVED_KEYS}
    plain["train.seed"] = str(seed)
    resolved = apply_overrides(exp, plain)

    fraction = next((v for k, v in cell.overrides if k == SWITCH_FRACTION_KEY), None)
    if fraction is None:
        return resolved
    try:
        f = float(fraction)
    except ValueError as exc:
        raise ConfigError(f"bad switch fraction `{fraction}` in cell `{cell.label}`") from exc
    if not 0.0 <= f <= 1.0:
        raise ConfigError(f"switch fraction must lie in [0, 1], got {f}")
    epoch = int(round(f * resolved.schedule.T_max))
    return apply_overrides(resolved, dict(_step_overrides(1.0, epoch)))


def cell_run_mode(cell: GridCell) -> str:
    mode = next((v for k, v in cell.overrides if k == RUN_MODE_KEY), RUN_JOINT)
    if mode not in CELL_RUN_MODES:
        raise ConfigError(
            f"unknown run mode `{mode}` in cell `{cell.label}` (choose from {', '.join(CELL_RUN_MODES)})"
        )
    return mode


# ------------------------------------------------------------------------------
# Grid files
# ------------------------------------------------------------------------------


def _axis_label(axis: str, value: str) -> str:
    if axis == SWITCH_FRACTION_KEY:
        return fraction_label(float(value))
    return f"{axis.split('.')[-1]}={value}"


def parse_grid(text: str) -> GridSpec:
    sections = parse_sections(text)
    if "grid" not in sections:
        raise ConfigError("grid file needs a [grid] section")

    header = {key: (line_no, value) for line_no, key, value in sections["grid"]}
    unknown = set(header) - {"name", "seeds", "axis", "values"}
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key `{key}` in [grid]", header[key][0])

    name = header.get("name", (0, "grid"))[1]
    try:
        seeds = tuple(int(s) for s in header.get("seeds", (0, ""))[1].split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError("seeds must be comma-separated integers", header["seeds"][0]) from exc

    cells: List[GridCell] = []
    if ("axis" in header) != ("values" in header):
        raise ConfigError("`axis` and `values` go together", (header.get("axis") or header.get("values"))[0])
    if "axis" in header:
        axis = header["axis"][1]
        for value in (v.strip() for v in header["values"][1].split(",") if v.strip()):
            cells.append(GridCell(_axis_label(axis, value), ((axis, value),)))

    for section, pairs in sections.items():
        if section == "grid":
            continue
        if not section.startswith("cell:"):
            line_no = pairs[0][0] if pairs else 0
            raise ConfigError(f"unknown section [{section}] in grid file", line_no)
        label = section.split(":", 1)[1].strip()
        for line_no, key, _ in pairs:
            if "." not in key:
                raise ConfigError(f"cell override `{key}` must look like section.key", line_no)
        cells.append(GridCell(label, tuple((key, value) for _, key, value in pairs)))

    return GridSpec(name=name, seeds=seeds, cells=tuple(cells))


def load_grid(path: PathLike) -> GridSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_grid(text)


# ------------------------------------------------------------------------------
# Built-in grids
# ------------------------------------------------------------------------------


def final_ratio_grid(exp: ExperimentConfig, seeds: Sequence[int]) -> GridSpec:
    cells = tuple(GridCell(f"K={k:g}", _step_overrides(k, 0)) for k in FINAL_RATIOS)
    return GridSpec("final_ratio", tuple(seeds), cells)


def growth_pattern_grid(exp: ExperimentConfig, seeds: Sequence[int]) -> GridSpec:
    t_max = exp.schedule.T_max
    ramp_end = str(t_max // 2)
    cells = (
        GridCell("JT-Linear", (
            ("schedule.pattern", Pattern.LINEAR.value), ("schedule.K", "1.0"),
            ("schedule.T_start", "0"), ("schedule.T_end", ramp_end),
        )),
        GridCell("JT-Logistic", (
            ("schedule.pattern", Pattern.LOGISTIC.value), ("schedule.K", "1.0"), ("schedule.r", "10.0"),
            ("schedule.T_start", "0"), ("schedule.T_end", ramp_end),
        )),
        GridCell("JT-FT", ((SWITCH_FRACTION_KEY, "0.25"),)),
        GridCell("JT-scratch", ((SWITCH_FRACTION_KEY, "0"),)),
    )
    return GridSpec("growth_pattern", tuple(seeds), cells)


def switch_epoch_grid(exp: ExperimentConfig, seeds: Sequence[int]) -> GridSpec:
    cells = tuple(
        GridCell(fraction_label(f), ((SWITCH_FRACTION_KEY, format_value(f)),)) for f in SWITCH_FRACTIONS
    )
    return GridSpec("switch_epoch", tuple(seeds), cells)


def encoder_kind_grid(exp: ExperimentConfig, seeds: Sequence[int]) -> GridSpec:
    cells = []
    for kind in ("recurrent", "self_attention"):
        cells.append(GridCell(f"{kind} two-stage", (("am.encoder_kind", kind), ("schedule.K", "0.0"))))
        cells.append(GridCell(f"{kind} jt-ft", (("am.encoder_kind", kind), (SWITCH_FRACTION_KEY, "0.25"))))
    return GridSpec("encoder_kind", tuple(seeds), tuple(cells))


def analysis_grid(exp: ExperimentConfig, seeds: Sequence[int]) -> GridSpec:
    """Separate training, the cascade, joint training from scratch and pretrain-finetune."""
    cells = (
        GridCell("Two-Stage", (("schedule.K", "0.0"),)),
        GridCell("Cascade", ((RUN_MODE_KEY, RUN_CASCADE),)),
        GridCell("JT-scratch", ((SWITCH_FRACTION_KEY, "0"),)),
        GridCell("JT-FT", ((RUN_MODE_KEY, RUN_FINETUNE), (SWITCH_FRACTION_KEY, "0.25"))),
    )
    return GridSpec("analysis", tuple(seeds), cells)


BUILTIN_GRIDS: Dict[str, Callable[[ExperimentConfig, Sequence[int]], GridSpec]] = {
    "final_ratio": final_ratio_grid,
    "growth_pattern": growth_pattern_grid,
    "switch_epoch": switch_epoch_grid,
    "encoder_kind": encoder_kind_grid,
    "analysis": analysis_grid,
}


def builtin_grid(name: str, exp: ExperimentConfig, seeds: Sequence[int]) -> GridSpec:
    try:
        return BUILTIN_GRIDS[name](exp, seeds)
    except KeyError as exc:
        raise ConfigError(f"unknown built-in grid `{name}` (choose from {', '.join(BUILTIN_GRIDS)})") from exc


# ------------------------------------------------------------------------------
# Running cells
# ------------------------------------------------------------------------------


def cell_regime(task: CellTask) -> str:
    if task.mode == RUN_CASCADE:
        return REGIME_CASCADE
    if task.mode == RUN_FINETUNE:
        return classify_schedule(jt_ft(task.exp.schedule.T_start, task.exp.schedule.T_max))
    return classify_schedule(task.exp.schedule)


def train_cell(task: CellTask, corpus: Corpus) -> TrainState:
    if task.mode == RUN_CASCADE:
        return cascade_train(task.exp, corpus, task.run_dir)
    if task.mode == RUN_FINETUNE:
        return pretrain_and_finetune(task.exp, corpus, task.run_dir, task.exp.schedule.T_start)
    return train(task.exp, corpus, task.run_dir)


def run_cell(task: CellTask) -> CellResult:
    """Train + evaluate one (cell, seed); never raises."""
    regime = cell_regime(task)
    LOGGER.info("Cell %s / seed %d (%s, %s) – started", task.label, task.seed, regime, task.mode)
    try:
        corpus = build_corpus(task.utterances, task.exp)
        state = train_cell(task, corpus)
        items = corpus.val or corpus.train
        rows = evaluate_corpus(state.models, items, task.exp)
        write_eval_table(task.run_dir / "eval.txt", rows)
        report = corpus_means(r for _, r in rows)
    except Exception as exc:
        LOGGER.error(
            "Cell %s / seed %d – failed: %s\n%s", task.label, task.seed, exc, traceback.format_exc()
        )
        return CellResult(task.label, task.seed, regime, f"failed: {exc}", None, task.run_dir)

    LOGGER.info("Cell %s / seed %d – finished (MCD %.4g dB)", task.label, task.seed, report.mcd)
    return CellResult(task.label, task.seed, regime, STATUS_OK, report, task.run_dir)


def _tasks(
    grid: GridSpec, exp: ExperimentConfig, utterances: Sequence[Utterance], out_dir: Path
) -> Tuple[List[CellTask], List[CellResult]]:
    """Runnable tasks plus results for cells whose config does not resolve."""
    tasks: List[CellTask] = []
    invalid: List[CellResult] = []
    shared = tuple(utterances)
    for cell in grid.cells:
        for seed in grid.seeds:
            run_dir = out_dir / sanitize_label(cell.label) / f"seed_{seed}"
            try:
                cell_exp = resolve_cell(exp, cell, seed)
                mode = cell_run_mode(cell)
            except ValueError as exc:
                LOGGER.error("Cell %s / seed %d – invalid config: %s", cell.label, seed, exc)
                invalid.append(CellResult(cell.label, seed, "invalid", f"failed: {exc}", None, run_dir))
                continue
            tasks.append(CellTask(grid.name, cell.label, seed, cell_exp, shared, run_dir, mode))
    return tasks, invalid


def run_grid(
    grid: GridSpec,
    exp: ExperimentConfig,
    utterances: Sequence[Utterance],
    out_dir: PathLike,
    *,
    workers: int = 1,
    resume: bool = False,
    db_url: Optional[str] = None,
) -> List[CellResult]:
    """
    Run every (cell, seed) of `grid` and record each outcome in the results store.

    With `resume`, pairs already stored as ok are loaded instead of rerun.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    engine = get_engine(db_url or get_results_db_url(out_dir))
    ensure_schema(engine)
    session = open_session(engine)

    try:
        tasks, results = _tasks(grid, exp, utterances, out_dir)
        for res in results:
            upsert_result(session, RESULTS_TABLE, build_result_row(grid.name, res.label, res.seed, res.regime, res.status))

        if resume:
            done = completed_cells(session, grid.name)
            stored = {(row["val_cell"], row["val_seed"]): row for row in fetch_results(session, grid.name)}
            for task in [t for t in tasks if (t.label, t.seed) in done]:
                row = stored[(task.label, task.seed)]
                results.append(CellResult(
                    task.label, task.seed, row["val_regime"], STATUS_OK,
                    report_from_row(row), Path(row["val_run_dir"]) if row["val_run_dir"] else None,
                ))
            skipped = len(tasks)
            tasks = [t for t in tasks if (t.label, t.seed) not in done]
            LOGGER.info("Resume: %d of %d run(s) already recorded", skipped - len(tasks), skipped)

        def _record(res: CellResult) -> None:
            results.append(res)
            row = build_result_row(
                grid.name, res.label, res.seed, res.regime, res.status, res.report,
                str(res.run_dir) if res.run_dir else None,
            )
            upsert_result(session, RESULTS_TABLE, row)

        if workers <= 1 or len(tasks) <= 1:
            for task in tasks:
                _record(run_cell(task))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for res in pool.map(run_cell, tasks):
                    _record(res)
    finally:
        session.close()
        engine.dispose()

    order = {(c.label, s): i for i, (c, s) in enumerate((c, s) for c in grid.cells for s in grid.seeds)}
    return sorted(results, key=lambda r: order.get((r.label, r.seed), len(order)))


def summarize_grid(grid: GridSpec, results: Sequence[CellResult]) -> List[list]:
    """One table row per cell: metric means over its successful seeds."""
    rows: List[list] = []
    for cell in grid.cells:
        mine = [r for r in results if r.label == cell.label]
        good = [r for r in mine if r.ok and r.report is not None]
        regime = next((r.regime for r in mine), "invalid")

        if good:
            mean = corpus_means(r.report for r in good)
            metrics = [mean.mcd, mean.f0_rmse, mean.vuv_e, mean.sa]
        else:
            metrics = [math.nan] * 4

        failed = [r for r in mine if not r.ok]
        status = STATUS_OK if not failed else f"{len(failed)} failed: {failed[0].status.split(': ', 1)[-1]}"
        rows.append([cell.label, regime, *metrics, f"{len(good)}/{len(grid.seeds)}", status])
    return rows


def write_grid_table(path: PathLike, grid: GridSpec, results: Sequence[CellResult]) -> Path:
    return write_tsv(path, GRID_COLUMNS, summarize_grid(grid, results))


def ablate(
    grid: GridSpec,
    exp: ExperimentConfig,
    utterances: Sequence[Utterance],
    out_dir: PathLike,
    *,
    workers: int = 1,
    resume: bool = False,
    db_url: Optional[str] = None,
) -> Path:
    """Run `grid` and write `<out_dir>/<grid name>.tsv`; returns the table path."""
    LOGGER.info(
        "Ablation %s: %d cell(s) × %d seed(s), %d worker(s)",
        grid.name, len(grid.cells), len(grid.seeds), workers,
    )
    results = run_grid(grid, exp, utterances, out_dir, workers=workers, resume=resume, db_url=db_url)
    table = write_grid_table(Path(out_dir) / f"{grid.name}.tsv", grid, results)
    LOGGER.info("Ablation table written: %s", table)
    return table


# ------------------------------------------------------------------------------
# Trend check
# ------------------------------------------------------------------------------


TREND_CELLS = (
    GridCell("jt-ft", ((SWITCH_FRACTION_KEY, "0.25"),)),
    GridCell("jt-scratch", ((SWITCH_FRACTION_KEY, "0"),)),
    GridCell("two-stage", (("schedule.K", "0.0"),)),
)
TREND_CASCADE_CELL = GridCell("cascade", ((RUN_MODE_KEY, RUN_CASCADE),))
TREND_COLUMNS = ("seed", "MCD_jt_ft", "MCD_jt_scratch", "MCD_two_stage", "jt_ft_beats_scratch", "jt_ft_le_two_stage")
TREND_CASCADE_COLUMNS = ("MCD_cascade", "jt_ft_beats_cascade")


def trend_check(
    exp: ExperimentConfig,
    utterances: Sequence[Utterance],
    seeds: Sequence[int],
    out_dir: PathLike,
    *,
    workers: int = 1,
    db_url: Optional[str] = None,
    with_cascade: bool = False,
) -> TrendReport:
    """
    Validation MCD of jt-ft (switch at 0.25 · T_max), jt-scratch and two-stage
    per seed. Passes when jt-ft beats jt-scratch on at least 80 % of the seeds;
    the jt-ft ≤ two-stage count is reported only, as is the jt-ft < cascade
    count when `with_cascade` adds the cascade runs.
    """
    cells = TREND_CELLS + ((TREND_CASCADE_CELL,) if with_cascade else ())
    grid = GridSpec("trend", tuple(seeds), cells)
    results = run_grid(grid, exp, utterances, out_dir, workers=workers, db_url=db_url)
    by_key = {(r.label, r.seed): r for r in results}

    def _mcd(label: str, seed: int) -> float:
        res = by_key.get((label, seed))
        return res.report.mcd if res is not None and res.ok and res.report else math.nan

    report = TrendReport(seeds=list(seeds), jt_ft=[], jt_scratch=[], two_stage=[])
    for seed in seeds:
        report.jt_ft.append(_mcd("jt-ft", seed))
        report.jt_scratch.append(_mcd("jt-scratch", seed))
        report.two_stage.append(_mcd("two-stage", seed))
        if with_cascade:
            report.cascade.append(_mcd("cascade", seed))
    report.failures = [f"{r.label}/seed_{r.seed}: {r.status}" for r in results if not r.ok]

    report.wins = sum(ft < sc for ft, sc in zip(report.jt_ft, report.jt_scratch))
    report.weak_wins = sum(ft <= ts for ft, ts in zip(report.jt_ft, report.two_stage))
    report.cascade_wins = sum(ft < ca for ft, ca in zip(report.jt_ft, report.cascade))
    report.passed = report.wins >= math.ceil(0.8 * len(report.seeds))

    columns = TREND_COLUMNS + (TREND_CASCADE_COLUMNS if with_cascade else ())
    rows = []
    for k, seed in enumerate(report.seeds):
        ft, sc, ts = report.jt_ft[k], report.jt_scratch[k], report.two_stage[k]
        row = [seed, ft, sc, ts, int(ft < sc), int(ft <= ts)]
        if with_cascade:
            row += [report.cascade[k], int(ft < report.cascade[k])]
        rows.append(row)
    write_tsv(Path(out_dir) / "trend.tsv", columns, rows)

    LOGGER.info(
        "Trend check: jt-ft < jt-scratch on %d/%d seed(s) (%s); jt-ft <= two-stage on %d/%d",
        report.wins, len(seeds), "pass" if report.passed else "fail", report.weak_wins, len(seeds),
    )
    if with_cascade:
        LOGGER.info("Trend check: jt-ft < cascade on %d/%d seed(s)", report.cascade_wins, len(seeds))
    return report
