# ==============================================================================
# env_utils.py  –  Tiny helper for environment lookups
#
# Centralizes:
#   • .env loading (repo root, never overriding the real environment)
#   • boolean / integer env parsing
#   • torch thread count and results-ledger URL
# ==============================================================================

from __future__ import annotations

import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

ROOT_ENV = Path(__file__).resolve().parents[2] / ".env"
load_dotenv(dotenv_path=ROOT_ENV, override=False)  # env values override file


# ------------------------------------------------------------------------------
# Public API
# ------------------------------------------------------------------------------


def env_str(var_name: str, default: Optional[str] = None) -> Optional[str]:
    """Return a stripped env value, or `default` when unset or blank."""
    value = os.getenv(var_name)
    if value is None or not value.strip():
        return default
    return value.strip()


def bool_env(var_name: str, default: str = "false") -> bool:
    """Convert TRUE / true / 1 style env vars to bool."""
    return os.getenv(var_name, default).strip().lower() in {"1", "true", "yes"}


def int_env(var_name: str, default: int) -> int:
    raw = env_str(var_name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise RuntimeError(f"{var_name} must be an integer, got `{raw}`") from exc


def configure_torch_threads() -> Optional[int]:
    """
    Apply SINGSHIFT_NUM_THREADS to torch, if set.

    A fixed thread count keeps CPU reductions reproducible across runs.
    """
    threads = int_env("SINGSHIFT_NUM_THREADS", 0)
    if threads <= 0:
        return None

    import torch

    torch.set_num_threads(threads)
    return threads


def get_results_db_url(out_dir: Path) -> str:
    """
    SQLAlchemy URL of the ablation ledger.

    Example
    -------
    sqlite:////runs/ablation/results.db
    """
    return env_str("SINGSHIFT_RESULTS_DB") or f"sqlite:///{Path(out_dir).resolve() / 'results.db'}"
