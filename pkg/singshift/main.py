#!/usr/bin/env python3
# ==============================================================================
#  SingShift - main.py
#  Purpose: command-line entry point
#           data-synth · train · synth · eval · schedule-plot · ablate · trend
#           · mel-plot
#
#  Exit codes: 0 success, 1 bad arguments / inputs / config, 2 divergence.
#  Tables go to stdout, logs to stderr.
# ==============================================================================

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import List, Optional, Sequence

# ------------------------------------------------------------------------------
# Paths & Imports
# ------------------------------------------------------------------------------

SRC_DIR = Path(__file__).resolve().parent
PROJECT_ROOT = SRC_DIR.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from singshift.dsp.features import MelSpectrogram, mel_spectrogram  # noqa: E402
from singshift.losses.loss_algebra import DivergenceError  # noqa: E402
from singshift.score.dataset_io import (  # noqa: E402
    read_dataset,
    read_dataset_config,
    write_dataset,
    write_wav,
)
from singshift.score.score_format import parse_score  # noqa: E402
from singshift.score.synthetic_corpus import Utterance, generate_synthetic_dataset  # noqa: E402
from singshift.trainer import ablation, joint_trainer  # noqa: E402
from singshift.trainer.checkpoint import load_models  # noqa: E402
from singshift.trainer.config import PRESETS, ConfigError, ExperimentConfig, preset  # noqa: E402
from singshift.trainer.corpus import build_corpus, prepare_item  # noqa: E402
from singshift.trainer.evaluation import (  # noqa: E402
    EVAL_COLUMNS,
    copy_synthesis,
    eval_rows,
    evaluate_corpus,
    evaluate_directories,
    synthesize,
    synthesize_score,
    write_eval_table,
)
from singshift.utils.env_utils import configure_torch_threads  # noqa: E402
from singshift.utils.logging_utils import setup_logger  # noqa: E402
from singshift.utils.plots import write_mel_plot, write_schedule_plot  # noqa: E402
from singshift.utils.run_config import load_run_config  # noqa: E402
from singshift.utils.tables import format_tsv  # noqa: E402

LOGGER = setup_logger("main")

EXIT_OK, EXIT_ERROR, EXIT_DIVERGED = 0, 1, 2
TRAIN_MODES = ("joint", "pretrain-finetune", "cascade", "vocoder-only", "am-only")


class CliParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


# ------------------------------------------------------------------------------
# Shared helpers
# ------------------------------------------------------------------------------


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    if getattr(args, "config", None):
        return load_run_config(args.config)
    return preset(getattr(args, "preset", "desk"))


def _load_utterances(args: argparse.Namespace, exp: ExperimentConfig) -> List[Utterance]:
    """The dataset at --data, or a fresh synthetic corpus from [data]."""
    if getattr(args, "data", None):
        return read_dataset(args.data, exp.data.inventory)
    LOGGER.info("No --data given; generating the synthetic corpus from [data]")
    return generate_synthetic_dataset(exp.data, exp.data.seed, exp.dsp)


def _seeds(raw: Optional[str], default: Sequence[int]) -> List[int]:
    if not raw:
        return list(default)
    try:
        return [int(s) for s in raw.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"--seeds must be comma-separated integers, got `{raw}`") from exc


def _positive(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


# ------------------------------------------------------------------------------
# Subcommands
# ------------------------------------------------------------------------------


def cmd_data_synth(args: argparse.Namespace) -> int:
    exp = _load_config(args)
    data = exp.data
    count = data.count if args.n is None else args.n
    data = dataclasses.replace(
        data,
        count=count,
        n_val=min(data.n_val, count),
        seed=data.seed if args.seed is None else args.seed,
    )
    utterances = generate_synthetic_dataset(data, data.seed, exp.dsp)
    write_dataset(args.out, utterances, data, exp.dsp)
    print(f"{len(utterances)} utterance(s) written to {args.out}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    exp = load_run_config(args.config)
    utterances = _load_utterances(args, exp)
    corpus = build_corpus(utterances, exp)
    out = Path(args.out)

    if args.mode == "joint":
        state = joint_trainer.train(exp, corpus, out, resume_from=args.resume)
    elif args.mode == "pretrain-finetune":
        t_start = exp.schedule.T_start if args.t_start is None else args.t_start
        state = joint_trainer.pretrain_and_finetune(exp, corpus, out, t_start, resume_from=args.resume)
    elif args.mode == "cascade":
        if args.resume:
            raise ConfigError("--resume is not supported for cascade runs")
        state = joint_trainer.cascade_train(exp, corpus, out)
    elif args.mode == "vocoder-only":
        state = joint_trainer.train_vocoder_on_ground_truth(exp, corpus, out, resume_from=args.resume)
    else:
        state = joint_trainer.train_acoustic_model(exp, corpus, out, resume_from=args.resume)

    if state.train_vocoder:
        items = corpus.val or corpus.train
        write_eval_table(out / "eval.txt", evaluate_corpus(state.models, items, state.exp))
    print(f"training finished after {state.epoch} epoch(s); run directory {out}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    exp, models = load_models(args.ckpt)
    score = parse_score(Path(args.score).read_bytes(), exp.data.inventory)
    result = synthesize_score(models, score, exp)
    write_wav(args.out, result.waveform, exp.dsp.sample_rate)
    print(f"{len(result.waveform)} sample(s) at {exp.dsp.sample_rate} Hz written to {args.out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    if (Path(args.ref) / "dataset.txt").exists():
        stft_cfg = read_dataset_config(args.ref)[1]
    else:
        stft_cfg = _load_config(args).dsp
    rows = evaluate_directories(args.ref, args.gen, stft_cfg)
    if args.out:
        write_eval_table(args.out, rows)
    sys.stdout.write(format_tsv(EVAL_COLUMNS, eval_rows(rows)))
    return EXIT_OK


def cmd_schedule_plot(args: argparse.Namespace) -> int:
    curves = {Path(path).stem: load_run_config(path).schedule for path in args.config}
    if len(curves) != len(args.config):
        raise ConfigError("config files must have distinct names")
    twin = write_schedule_plot(args.out, curves, args.resolution)
    print(f"schedule curve written to {args.out} and {twin}")
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    exp = _load_config(args)
    if args.grid:
        grid = ablation.load_grid(args.grid)
    else:
        grid = ablation.builtin_grid(args.builtin, exp, _seeds(args.seeds, [exp.train.seed]))
    utterances = _load_utterances(args, exp)
    table = ablation.ablate(grid, exp, utterances, args.out, workers=args.workers, resume=args.resume)
    sys.stdout.write(table.read_text(encoding="utf-8"))
    return EXIT_OK


def cmd_trend(args: argparse.Namespace) -> int:
    exp = _load_config(args)
    seeds = _seeds(args.seeds, [exp.train.seed + k for k in range(5)])
    report = ablation.trend_check(
        exp, _load_utterances(args, exp), seeds, args.out, workers=args.workers, with_cascade=args.cascade
    )
    sys.stdout.write((Path(args.out) / "trend.tsv").read_text(encoding="utf-8"))
    print(
        f"jt-ft < jt-scratch on {report.wins}/{len(seeds)} seed(s): {'pass' if report.passed else 'fail'}; "
        f"jt-ft <= two-stage on {report.weak_wins}/{len(seeds)}"
    )
    if args.cascade:
        print(f"jt-ft < cascade on {report.cascade_wins}/{len(seeds)} seed(s)")
    return EXIT_OK if report.passed else EXIT_ERROR


def cmd_mel_plot(args: argparse.Namespace) -> int:
    exp, models = load_models(args.ckpt)
    by_id = {utt.id: utt for utt in read_dataset(args.data, exp.data.inventory)}
    if args.id not in by_id:
        raise ConfigError(f"utterance `{args.id}` is not in {args.data}")
    item = prepare_item(by_id[args.id], exp)

    if models.am is not None:
        result = synthesize(models, item.phoneme_ids, item.pitch_ids, item.durations)
        predicted, wave = result.mel, result.waveform
    else:
        predicted, wave = item.mel.double().numpy(), copy_synthesis(models, item.mel)

    panels = [
        ("ground_truth", mel_spectrogram(item.waveform.double().numpy(), exp.dsp)),
        ("predicted", MelSpectrogram(values=predicted, config=exp.dsp)),
        ("vocoder_output", mel_spectrogram(wave, exp.dsp)),
    ]
    write_mel_plot(args.out, panels)
    print(f"mel comparison for {args.id} written to {args.out}")
    return EXIT_OK


# ------------------------------------------------------------------------------
# Parser
# ------------------------------------------------------------------------------


def build_parser() -> CliParser:
    parser = CliParser(prog="singshift", description="Scheduled joint training for singing voice synthesis.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("data-synth", help="generate the synthetic singing corpus")
    p.add_argument("--out", required=True, help="dataset directory")
    p.add_argument("--n", type=_positive, default=None, help="number of utterances")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", help="run config whose [data] and [dsp] sections to use")
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    p.set_defaults(func=cmd_data_synth)

    p = sub.add_parser("train", help="train a run directory")
    p.add_argument("--config", required=True)
    p.add_argument("--data", help="dataset directory (default: synthesize from [data])")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=TRAIN_MODES, default="joint")
    p.add_argument("--t-start", type=int, default=None, help="switch epoch for pretrain-finetune")
    p.add_argument("--resume", help="checkpoint directory to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("synth", help="synthesize a score with a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--score", required=True)
    p.add_argument("--out", required=True, help="output .wav")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="objective metrics between two waveform directories")
    p.add_argument("--ref", required=True)
    p.add_argument("--gen", required=True)
    p.add_argument("--out", help="also write the table here")
    p.add_argument("--config")
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk", help="analysis preset when --ref has no dataset.txt")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("schedule-plot", help="plot p(t) of one or more run configs")
    p.add_argument("--config", required=True, nargs="+")
    p.add_argument("--out", required=True, help="image path; the TSV twin sits next to it")
    p.add_argument("--resolution", type=_positive, default=200)
    p.set_defaults(func=cmd_schedule_plot)

    p = sub.add_parser("ablate", help="run an ablation grid")
    grid = p.add_mutually_exclusive_group(required=True)
    grid.add_argument("--grid", help="grid file")
    grid.add_argument("--builtin", choices=sorted(ablation.BUILTIN_GRIDS))
    p.add_argument("--config")
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    p.add_argument("--data")
    p.add_argument("--seeds", help="comma-separated seeds for built-in grids")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--resume", action="store_true", help="skip runs already recorded as ok")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("trend", help="jt-ft vs jt-scratch vs two-stage over several seeds")
    p.add_argument("--config")
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    p.add_argument("--data")
    p.add_argument("--seeds")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--cascade", action="store_true", help="also run the cascade and report jt-ft vs cascade")
    p.set_defaults(func=cmd_trend)

    p = sub.add_parser("mel-plot", help="ground-truth vs predicted vs vocoder mel for one utterance")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mel_plot)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_torch_threads()
    try:
        return args.func(args)
    except DivergenceError as exc:
        LOGGER.error("Training diverged: %s (last good checkpoint: %s)", exc, exc.last_checkpoint)
        print(f"error: training diverged: {exc}; last good checkpoint: {exc.last_checkpoint}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ValueError, RuntimeError, OSError) as exc:
        LOGGER.error("%s failed: %s", args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
