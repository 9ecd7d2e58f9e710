#!/usr/bin/env python3
# ==============================================================================
# run_desk_pipeline.py  –  One-shot desk run
#   data-synth → train (joint, desk preset, writes run/eval.txt) → metric self-check
#   Calls: singshift.main subcommands
# ==============================================================================

import sys
from pathlib import Path

CURRENT_FILE = Path(__file__).resolve()
PROJECT_ROOT = CURRENT_FILE.parents[2]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from singshift.main import EXIT_OK, main  # noqa: E402
from singshift.trainer.config import preset  # noqa: E402
from singshift.utils.env_utils import env_str  # noqa: E402
from singshift.utils.logging_utils import setup_logger  # noqa: E402
from singshift.utils.run_config import render_run_config  # noqa: E402

LOGGER = setup_logger("run_desk_pipeline")

# ------------------------------------------------------------------------------
# Stage Wrapper
# ------------------------------------------------------------------------------


def _stage(title, fn):
    """
    Run a pipeline stage with start → finish logging and full stacktrace on error.
    """
    LOGGER.info("%s – started", title)
    try:
        code = fn()
        if code != EXIT_OK:
            raise RuntimeError(f"{title} exited with code {code}")
        LOGGER.info("%s – finished", title)
    except Exception:  # pragma: no cover
        LOGGER.exception("%s – failed", title)
        raise


def run_desk_pipeline(work_dir: Path, preset_name: str = "desk") -> Path:
    """Returns the training run directory (holding config, log, checkpoints, eval)."""
    work_dir = Path(work_dir)
    data_dir, run_dir = work_dir / "data", work_dir / "run"
    config_path = work_dir / f"{preset_name}.txt"

    work_dir.mkdir(parents=True, exist_ok=True)
    config_path.write_text(render_run_config(preset(preset_name)), encoding="utf-8")

    _stage("Synthetic Corpus", lambda: main(["data-synth", "--config", str(config_path), "--out", str(data_dir)]))
    _stage(
        "Joint Training",
        lambda: main(["train", "--config", str(config_path), "--data", str(data_dir), "--out", str(run_dir)]),
    )
    _stage(
        "Metric Self-Check",
        lambda: main(["eval", "--ref", str(data_dir), "--gen", str(data_dir), "--out", str(work_dir / "self_eval.txt")]),
    )
    return run_dir


if __name__ == "__main__":
    run_desk_pipeline(Path(env_str("SINGSHIFT_WORK_DIR") or PROJECT_ROOT / "runs" / "desk"))
