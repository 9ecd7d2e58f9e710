# ==============================================================================
# test_results_store.py  –  Tests for the ablation results ledger
#   Uses a throwaway SQLite file per test.
# ==============================================================================

import math
from dataclasses import fields
from datetime import timezone

import pytest

from singshift.db.results_store import (
    RESULTS_TABLE,
    STATUS_OK,
    ResultsStoreError,
    build_result_row,
    completed_cells,
    ensure_schema,
    fetch_results,
    get_engine,
    open_session,
    report_from_row,
    result_id,
    upsert_result,
)
from singshift.metrics.objective import EvalReport

REPORT = EvalReport(mcd=6.5, f0_rmse=float("nan"), vuv_e=0.25, sa=0.0, n_frames=40, n_voiced_both=0)


# ------------------------------------------------------------------------------
# Fixtures
# ------------------------------------------------------------------------------
@pytest.fixture(scope="function")
def session(tmp_path):
    engine = get_engine(f"sqlite:///{tmp_path / 'results.db'}")
    ensure_schema(engine)
    s = open_session(engine)
    yield s
    s.close()
    engine.dispose()


# ------------------------------------------------------------------------------
# Tests
# ------------------------------------------------------------------------------
def test_row_building():
    row = build_result_row("g", "K=0.5", 3, "mixed", STATUS_OK, REPORT, "/runs/x")
    assert row["id_result"] == result_id("g", "K=0.5", 3) == "g|K=0.5|3"
    assert row["val_mcd"] == 6.5
    assert row["val_f0_rmse"] is None
    assert row["val_n_frames"] == 40
    assert row["val_run_dir"] == "/runs/x"
    assert row["tm_recorded"].tzinfo is timezone.utc


def test_row_has_a_column_per_report_field():
    row = build_result_row("g", "a", 1, "mixed", STATUS_OK, REPORT)
    for f in fields(EvalReport):
        assert f"val_{f.name}" in row
    assert set(row) == {c.name for c in RESULTS_TABLE.columns}


def test_failed_row_has_no_metrics():
    row = build_result_row("g", "a", 1, "jt-ft", "failed: boom")
    assert row["val_mcd"] is None and row["val_n_frames"] is None


def test_insert_then_update(session):
    row = build_result_row("g", "a", 1, "jt-ft", "failed: boom")
    assert upsert_result(session, RESULTS_TABLE, row) is False
    row = build_result_row("g", "a", 1, "jt-ft", STATUS_OK, REPORT)
    assert upsert_result(session, RESULTS_TABLE, row) is True

    stored = fetch_results(session, "g")
    assert len(stored) == 1
    assert stored[0]["val_status"] == STATUS_OK


def test_missing_id_is_skipped(session):
    assert upsert_result(session, RESULTS_TABLE, {"val_grid": "g"}) is False
    assert fetch_results(session, "g") == []


def test_write_failure_is_raised(session):
    with pytest.raises(ResultsStoreError, match=r"g\|a\|1"):
        upsert_result(session, RESULTS_TABLE, {"id_result": "g|a|1", "val_grid": "g"})
    assert fetch_results(session, "g") == []


def test_completed_cells_only_lists_ok_rows(session):
    upsert_result(session, RESULTS_TABLE, build_result_row("g", "a", 1, "x", STATUS_OK, REPORT))
    upsert_result(session, RESULTS_TABLE, build_result_row("g", "a", 2, "x", "failed: nan"))
    upsert_result(session, RESULTS_TABLE, build_result_row("other", "a", 1, "x", STATUS_OK, REPORT))
    assert completed_cells(session, "g") == {("a", 1)}


def test_report_round_trip(session):
    upsert_result(session, RESULTS_TABLE, build_result_row("g", "a", 1, "x", STATUS_OK, REPORT))
    report = report_from_row(fetch_results(session, "g")[0])
    assert report.mcd == 6.5
    assert math.isnan(report.f0_rmse)
    assert report.n_frames == 40


def test_failed_row_has_no_report():
    assert report_from_row(build_result_row("g", "a", 1, "x", "failed: boom")) is None
