# ==============================================================================
# results_store.py  –  Idempotent ledger of ablation results
# ------------------------------------------------------------------------------
# Responsibilities:
#   • Define the ablation_results table (one row per grid / cell / seed)
#   • Normalise an EvalReport → dictionary ready for SQLAlchemy
#   • Insert a new row if id not present, otherwise update it
#   • Return True on update, False on insert; raise ResultsStoreError on failure
# ==============================================================================

from __future__ import annotations

import math
from dataclasses import fields
from datetime import datetime, timezone
from typing import Dict, List, Optional, Set, Tuple

from sqlalchemy import (
    Column,
    DateTime,
    Float,
    Integer,
    MetaData,
    String,
    Table,
    create_engine,
    select,
    update,
)
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, sessionmaker

from singshift.metrics.objective import EvalReport
from singshift.utils.logging_utils import setup_logger

LOGGER = setup_logger("results_store")

STATUS_OK = "ok"


class ResultsStoreError(RuntimeError):
    """A result row could not be written."""


METADATA = MetaData()

RESULTS_TABLE = Table(
    "ablation_results",
    METADATA,
    Column("id_result", String, primary_key=True),
    Column("val_grid", String, nullable=False),
    Column("val_cell", String, nullable=False),
    Column("val_seed", Integer, nullable=False),
    Column("val_regime", String, nullable=True),
    Column("val_status", String, nullable=False),
    Column("val_mcd", Float, nullable=True),
    Column("val_f0_rmse", Float, nullable=True),
    Column("val_vuv_e", Float, nullable=True),
    Column("val_sa", Float, nullable=True),
    Column("val_n_frames", Integer, nullable=True),
    Column("val_n_voiced_both", Integer, nullable=True),
    Column("val_run_dir", String, nullable=True),
    Column("tm_recorded", DateTime, nullable=False),
)

# ------------------------------------------------------------------------------
# Engine helpers
# ------------------------------------------------------------------------------


def get_engine(url: str) -> Engine:
    return create_engine(url)


def ensure_schema(engine: Engine) -> None:
    METADATA.create_all(engine, tables=[RESULTS_TABLE])


def open_session(engine: Engine) -> Session:
    return sessionmaker(bind=engine)()


# ------------------------------------------------------------------------------
# Row building
# ------------------------------------------------------------------------------


def _finite_or_none(value: Optional[float]) -> Optional[float]:
    if value is None or math.isnan(value):
        return None
    return float(value)


def result_id(grid: str, cell: str, seed: int) -> str:
    return f"{grid}|{cell}|{seed}"


def build_result_row(
    grid: str,
    cell: str,
    seed: int,
    regime: str,
    status: str,
    report: Optional[EvalReport] = None,
    run_dir: Optional[str] = None,
) -> Dict[str, object]:
    """NaN metrics (and failed cells) are stored as NULL."""
    metrics: Dict[str, object] = {f"val_{f.name}": None for f in fields(EvalReport)}
    if report is not None:
        for key, value in report.as_row().items():
            metrics[f"val_{key}"] = _finite_or_none(value) if isinstance(value, float) else value
    return {
        "id_result": result_id(grid, cell, seed),
        "val_grid": grid,
        "val_cell": cell,
        "val_seed": int(seed),
        "val_regime": regime,
        "val_status": status,
        **metrics,
        "val_run_dir": run_dir,
        "tm_recorded": datetime.now(timezone.utc),
    }


# ------------------------------------------------------------------------------
# Public API
# ------------------------------------------------------------------------------


def upsert_result(session: Session, table: Table, row: Dict[str, object]) -> bool:
    result_key = row.get("id_result")
    if not result_key:
        LOGGER.warning("Missing result ID – skipping row.")
        return False

    try:
        with session.begin():
            exists = session.execute(
                select(table.c.id_result).where(table.c.id_result == result_key)
            ).first()

            if exists:
                session.execute(
                    update(table).where(table.c.id_result == result_key).values(row)
                )
                LOGGER.info("Updated result %s", result_key)
                return True
            else:
                session.execute(table.insert().values(row))
                LOGGER.info("Inserted new result %s", result_key)
                return False

    except Exception as exc:
        LOGGER.error("Error upserting result %s – %s", result_key, exc)
        session.rollback()
        raise ResultsStoreError(f"cannot record result {result_key}: {exc}") from exc


def completed_cells(session: Session, grid: str) -> Set[Tuple[str, int]]:
    """(cell, seed) pairs of `grid` recorded with status ok."""
    rows = session.execute(
        select(RESULTS_TABLE.c.val_cell, RESULTS_TABLE.c.val_seed).where(
            (RESULTS_TABLE.c.val_grid == grid) & (RESULTS_TABLE.c.val_status == STATUS_OK)
        )
    ).all()
    session.rollback()  # end the implicit read transaction
    return {(cell, int(seed)) for cell, seed in rows}


def fetch_results(session: Session, grid: str) -> List[Dict[str, object]]:
    rows = session.execute(
        select(RESULTS_TABLE).where(RESULTS_TABLE.c.val_grid == grid).order_by(RESULTS_TABLE.c.id_result)
    ).mappings().all()
    session.rollback()
    return [dict(r) for r in rows]


def report_from_row(row: Dict[str, object]) -> Optional[EvalReport]:
    """EvalReport back from a stored ok row (NULL metrics → NaN)."""
    if row.get("val_status") != STATUS_OK:
        return None

    def _f(key: str) -> float:
        value = row.get(key)
        return float("nan") if value is None else float(value)

    return EvalReport(
        mcd=_f("val_mcd"),
        f0_rmse=_f("val_f0_rmse"),
        vuv_e=_f("val_vuv_e"),
        sa=_f("val_sa"),
        n_frames=int(row.get("val_n_frames") or 0),
        n_voiced_both=int(row.get("val_n_voiced_both") or 0),
    )
