# ==============================================================================
# plots.py  –  Schedule curves and mel comparisons as PNG + text twins
#
# Every figure is written next to a plain-text twin (TSV or mel text) holding
# the plotted numbers, so comparisons never depend on pixels.
# ==============================================================================

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from singshift.dsp.features import MelSpectrogram, write_mel_text  # noqa: E402
from singshift.schedule.mixing_schedule import ScheduleConfig, classify_schedule, schedule_curve  # noqa: E402
from singshift.utils.logging_utils import setup_logger  # noqa: E402
from singshift.utils.tables import write_tsv  # noqa: E402

LOGGER = setup_logger("plots")

PathLike = Union[str, Path]


def tsv_twin(image_path: PathLike) -> Path:
    return Path(image_path).with_suffix(".tsv")


def schedule_table(curves: Dict[str, ScheduleConfig], resolution: int) -> Tuple[List[str], List[list]]:
    """
    Header and rows of the curve table.

    One curve gives `epoch p`; several give one column per name, sampled at
    the epochs of the first curve (all must share T_max).
    """
    names = list(curves)
    sampled = {name: schedule_curve(cfg, resolution) for name, cfg in curves.items()}
    t_maxes = {cfg.T_max for cfg in curves.values()}
    if len(t_maxes) > 1:
        raise ValueError(f"overlaid schedules must share T_max, got {sorted(t_maxes)}")

    epochs = [t for t, _ in sampled[names[0]]]
    header = ["epoch", "p"] if len(names) == 1 else ["epoch", *names]
    rows = [[t, *(sampled[name][i][1] for name in names)] for i, t in enumerate(epochs)]
    return header, rows


def write_schedule_plot(out_path: PathLike, curves: Dict[str, ScheduleConfig], resolution: int = 200) -> Path:
    """Plot p(t) for each schedule; returns the TSV twin's path."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    header, rows = schedule_table(curves, resolution)

    fig, ax = plt.subplots(figsize=(6, 3.5))
    try:
        epochs = [row[0] for row in rows]
        for col, name in enumerate(curves, start=1):
            label = f"{name} ({classify_schedule(curves[name])})"
            ax.plot(epochs, [row[col] for row in rows], linewidth=2, label=label)
        ax.set_xlabel("epoch")
        ax.set_ylabel("p(t)")
        ax.set_ylim(-0.05, 1.05)
        ax.grid(alpha=0.3)
        ax.legend(loc="lower right")
        fig.tight_layout()
        fig.savefig(out_path, dpi=120)
    finally:
        plt.close(fig)

    twin = write_tsv(tsv_twin(out_path), header, rows)
    LOGGER.info("Schedule plot saved to %s (table %s)", out_path, twin)
    return twin


def write_mel_plot(out_path: PathLike, panels: Sequence[Tuple[str, MelSpectrogram]]) -> List[Path]:
    """
    Stack mel panels vertically; each panel also goes to
    `<stem>_<title>.mel.txt`. Returns the twin paths.
    """
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)

    fig, axes = plt.subplots(len(panels), 1, figsize=(7, 2.2 * len(panels)), squeeze=False)
    twins: List[Path] = []
    try:
        for ax, (title, mel) in zip(axes[:, 0], panels):
            ax.imshow(mel.values.T, origin="lower", aspect="auto", interpolation="nearest")
            ax.set_title(title)
            ax.set_ylabel("mel bin")
            twin = out_path.with_name(f"{out_path.stem}_{title}.mel.txt")
            write_mel_text(twin, mel)
            twins.append(twin)
        axes[-1, 0].set_xlabel("frame")
        fig.tight_layout()
        fig.savefig(out_path, dpi=120)
    finally:
        plt.close(fig)

    LOGGER.info("Mel comparison saved to %s", out_path)
    return twins
