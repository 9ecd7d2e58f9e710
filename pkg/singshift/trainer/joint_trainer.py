# ==============================================================================
# joint_trainer.py  –  Scheduled joint training of acoustic model and vocoder
# ------------------------------------------------------------------------------
# Run directory:
#   config.txt              resolved run config
#   log.txt                 one LossBreakdown line per iteration
#   checkpoints/epoch_N/    state after N completed epochs
#
# All randomness after model initialisation (batch order, crops, bernoulli
# branch draws) comes from one numpy Generator seeded with train.seed, whose
# state travels with every checkpoint.
# ==============================================================================

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import torch
from torch.optim import AdamW, Optimizer
from torch.optim.lr_scheduler import ExponentialLR

from singshift.losses.loss_algebra import DivergenceError, LossBreakdown, format_log_line
from singshift.schedule.mixing_schedule import (
    ScheduleConfig,
    evaluate_schedule,
    jt_ft,
    two_stage,
)
from singshift.trainer.checkpoint import (
    Snapshot,
    checkpoint_dir,
    instantiate_models,
    load_checkpoint,
    numpy_rng_state,
    restore_numpy_rng,
    save_checkpoint,
)
from singshift.trainer.config import ConfigError, ExperimentConfig, JointGradient
from singshift.trainer.corpus import Corpus
from singshift.trainer.steps import (
    AM_ABSENT,
    AM_FROZEN,
    AM_TRAIN,
    TrainModels,
    branch_plan,
    crop_starts,
    train_step,
)
from singshift.utils.logging_utils import setup_logger
from singshift.utils.run_config import render_run_config

LOGGER = setup_logger("joint_trainer")

PathLike = Union[str, Path]
AM_MODES = (AM_TRAIN, AM_FROZEN, AM_ABSENT)


@dataclass
class TrainCounters:
    pred_inputs: int = 0  # iterations whose vocoder consumed x̂
    gt_inputs: int = 0  # iterations whose vocoder consumed x
    iterations: int = 0


@dataclass
class TrainState:
    exp: ExperimentConfig
    models: TrainModels
    optimizers: Dict[str, Optimizer]
    schedulers: Dict[str, ExponentialLR]
    rng: np.random.Generator
    out_dir: Path
    am_mode: str = AM_TRAIN
    train_vocoder: bool = True
    epoch: int = 0  # completed epochs
    counters: TrainCounters = field(default_factory=TrainCounters)
    log: List[str] = field(default_factory=list)
    last_checkpoint: Optional[Path] = None

    @property
    def log_path(self) -> Path:
        return self.out_dir / "log.txt"


# ------------------------------------------------------------------------------
# Setup
# ------------------------------------------------------------------------------


def build_optimizers(models: TrainModels, exp: ExperimentConfig, am_mode: str) -> Dict[str, Optimizer]:
    """AdamW per trainable model: `am` (when training), `gen` and `disc`."""
    cfg = exp.train

    def _adamw(module: torch.nn.Module) -> Optimizer:
        return AdamW(
            module.parameters(),
            lr=cfg.lr,
            betas=(cfg.adam_b1, cfg.adam_b2),
            weight_decay=cfg.weight_decay,
        )

    optimizers = {"gen": _adamw(models.generator), "disc": _adamw(models.discriminators)}
    if am_mode == AM_TRAIN:
        optimizers["am"] = _adamw(models.am)
    return optimizers


def _snapshot(state: TrainState) -> Snapshot:
    models = {
        "generator": state.models.generator.state_dict(),
        "discriminators": state.models.discriminators.state_dict(),
    }
    if state.models.am is not None:
        models["am"] = state.models.am.state_dict()
    return Snapshot(
        exp=state.exp,
        epoch=state.epoch,
        am_mode=state.am_mode,
        train_vocoder=state.train_vocoder,
        models=models,
        optimizers={k: opt.state_dict() for k, opt in state.optimizers.items()},
        schedulers={k: sch.state_dict() for k, sch in state.schedulers.items()},
        numpy_rng=numpy_rng_state(state.rng),
        torch_rng=torch.get_rng_state(),
        counters=asdict(state.counters),
    )


def init_state(
    exp: ExperimentConfig,
    out_dir: PathLike,
    *,
    am_mode: str = AM_TRAIN,
    train_vocoder: bool = True,
    models: Optional[TrainModels] = None,
    dtype: torch.dtype = torch.float32,
) -> TrainState:
    if am_mode not in AM_MODES:
        raise ConfigError(f"unknown acoustic model mode `{am_mode}`")
    if am_mode == AM_ABSENT and not train_vocoder:
        raise ConfigError("nothing to train: acoustic model absent and vocoder idle")

    if models is None:
        models = instantiate_models(exp, with_am=am_mode != AM_ABSENT, dtype=dtype)
    if am_mode == AM_ABSENT:
        models = replace(models, am=None)
    elif models.am is None:
        raise ConfigError(f"acoustic model mode `{am_mode}` needs an acoustic model")

    optimizers = build_optimizers(models, exp, am_mode)
    schedulers = {k: ExponentialLR(opt, gamma=exp.train.lr_decay_gamma) for k, opt in optimizers.items()}

    return TrainState(
        exp=exp,
        models=models,
        optimizers=optimizers,
        schedulers=schedulers,
        rng=np.random.default_rng(exp.train.seed),
        out_dir=Path(out_dir),
        am_mode=am_mode,
        train_vocoder=train_vocoder,
    )


def restore_state(snapshot: Snapshot, out_dir: PathLike, dtype: torch.dtype = torch.float32) -> TrainState:
    """TrainState positioned right after the snapshot's last completed epoch."""
    state = init_state(
        snapshot.exp, out_dir,
        am_mode=snapshot.am_mode, train_vocoder=snapshot.train_vocoder, dtype=dtype,
    )
    if state.models.am is not None:
        state.models.am.load_state_dict(snapshot.models["am"])
    state.models.generator.load_state_dict(snapshot.models["generator"])
    state.models.discriminators.load_state_dict(snapshot.models["discriminators"])
    for key, opt in state.optimizers.items():
        opt.load_state_dict(snapshot.optimizers[key])
    for key, sch in state.schedulers.items():
        sch.load_state_dict(snapshot.schedulers[key])

    state.rng = restore_numpy_rng(snapshot.numpy_rng)
    torch.set_rng_state(snapshot.torch_rng)
    state.epoch = snapshot.epoch
    state.counters = TrainCounters(**snapshot.counters)
    return state


def _prepare_run_dir(state: TrainState, resumed: bool) -> None:
    state.out_dir.mkdir(parents=True, exist_ok=True)
    (state.out_dir / "config.txt").write_text(render_run_config(state.exp), encoding="utf-8")

    kept: List[str] = []
    if resumed and state.log_path.exists():
        for line in state.log_path.read_text(encoding="utf-8").splitlines():
            if line and int(line.split()[0]) < state.epoch:
                kept.append(line)
    state.log = kept
    state.log_path.write_text("".join(f"{line}\n" for line in kept), encoding="utf-8")


# ------------------------------------------------------------------------------
# Loop
# ------------------------------------------------------------------------------


def epoch_batches(n_items: int, batch_size: int, iters: int, rng: np.random.Generator) -> List[np.ndarray]:
    """`iters` batches of indices drawn from concatenated permutations."""
    needed = batch_size * iters
    order: List[int] = []
    while len(order) < needed:
        order.extend(int(i) for i in rng.permutation(n_items))
    return [np.asarray(order[k * batch_size : (k + 1) * batch_size]) for k in range(iters)]


def run_epoch(state: TrainState, corpus: Corpus) -> List[LossBreakdown]:
    exp = state.exp
    epoch = state.epoch
    p = evaluate_schedule(exp.schedule, epoch)
    batches = epoch_batches(len(corpus.train), exp.train.batch_size, exp.train.iters_per_epoch, state.rng)

    breakdowns: List[LossBreakdown] = []
    with state.log_path.open("a", encoding="utf-8") as log_file:
        for iteration, batch in enumerate(batches):
            items = [corpus.train[i] for i in batch]
            plan = branch_plan(p, exp.train.mix_mode, state.rng)
            starts = crop_starts(items, exp.voc.segment_frames, state.rng)

            breakdown = train_step(
                state.models, state.optimizers, items, starts, plan, exp,
                am_mode=state.am_mode, train_vocoder=state.train_vocoder,
            )

            if state.train_vocoder:
                state.counters.pred_inputs += int(plan.forward_pred)
                state.counters.gt_inputs += int(plan.forward_gt)
            state.counters.iterations += 1

            line = format_log_line(epoch, iteration, breakdown)
            log_file.write(line + "\n")
            state.log.append(line)
            breakdowns.append(breakdown)

    for scheduler in state.schedulers.values():
        scheduler.step()
    state.epoch += 1

    lr = next(iter(state.optimizers.values())).param_groups[0]["lr"]
    LOGGER.info(
        "epoch %d/%d | p %.4g | L_tot %.5g | L_D_mix %.5g | lr %.4g",
        epoch + 1, exp.train.epochs, p.p,
        float(np.mean([float(b.l_tot) for b in breakdowns])),
        float(np.mean([float(b.l_disc_mix) for b in breakdowns])),
        lr,
    )
    return breakdowns


def train(
    exp: ExperimentConfig,
    corpus: Corpus,
    out_dir: PathLike,
    *,
    resume_from: Optional[PathLike] = None,
    stop_epoch: Optional[int] = None,
    am_mode: str = AM_TRAIN,
    train_vocoder: bool = True,
    models: Optional[TrainModels] = None,
) -> TrainState:
    """
    Train for `exp.train.epochs` epochs (or until `stop_epoch` completed epochs).

    Parameters
    ----------
    resume_from : PathLike | None
        Checkpoint directory; its config and modes must match this call.
    models : TrainModels | None
        Pre-built models (the frozen acoustic model of a cascade); fresh
        seeded models otherwise.

    Raises
    ------
    DivergenceError
        A loss became non-finite; `last_checkpoint` names the newest good state.
    ConfigError
        Empty corpus or a checkpoint that belongs to another configuration.
    """
    if not corpus.train:
        raise ConfigError("training split is empty")
    dtype = corpus.train[0].mel.dtype

    if resume_from is not None:
        snapshot = load_checkpoint(resume_from)
        if render_run_config(snapshot.exp) != render_run_config(exp):
            raise ConfigError(f"checkpoint {resume_from} was written for a different configuration")
        if (snapshot.am_mode, snapshot.train_vocoder) != (am_mode, train_vocoder):
            raise ConfigError(
                f"checkpoint {resume_from} was written in mode "
                f"({snapshot.am_mode}, vocoder={snapshot.train_vocoder})"
            )
        state = restore_state(snapshot, out_dir, dtype)
        state.last_checkpoint = Path(resume_from)
        LOGGER.info("Resuming from %s after epoch %d", resume_from, state.epoch)
    else:
        state = init_state(exp, out_dir, am_mode=am_mode, train_vocoder=train_vocoder, models=models, dtype=dtype)

    _prepare_run_dir(state, resumed=resume_from is not None)

    last_epoch = exp.train.epochs if stop_epoch is None else min(stop_epoch, exp.train.epochs)
    LOGGER.info(
        "Training %s → %s | epochs %d..%d | am %s | vocoder %s",
        exp.preset, state.out_dir, state.epoch, last_epoch, state.am_mode, state.train_vocoder,
    )

    while state.epoch < last_epoch:
        try:
            run_epoch(state, corpus)
        except DivergenceError as exc:
            LOGGER.error(
                "Divergence in epoch %d: %s (last good checkpoint: %s)",
                state.epoch, exc, state.last_checkpoint,
            )
            raise DivergenceError(str(exc), state.last_checkpoint) from exc
        state.last_checkpoint = save_checkpoint(checkpoint_dir(state.out_dir, state.epoch), _snapshot(state))

    return state


# ------------------------------------------------------------------------------
# Training regimes
# ------------------------------------------------------------------------------


def train_acoustic_model(exp: ExperimentConfig, corpus: Corpus, out_dir: PathLike, **kwargs) -> TrainState:
    """Acoustic model on L_AM alone; the vocoder never runs."""
    return train(exp, corpus, out_dir, am_mode=AM_TRAIN, train_vocoder=False, **kwargs)


def train_vocoder_on_ground_truth(exp: ExperimentConfig, corpus: Corpus, out_dir: PathLike, **kwargs) -> TrainState:
    """Vocoder on ground-truth mels; the acoustic model is never built."""
    gt_exp = exp.with_schedule(two_stage(exp.schedule.T_max))
    return train(gt_exp, corpus, out_dir, am_mode=AM_ABSENT, train_vocoder=True, **kwargs)


def pretrain_and_finetune(
    exp: ExperimentConfig, corpus: Corpus, out_dir: PathLike, t_start: int, **kwargs
) -> TrainState:
    """Both models pretrain on ground truth, then switch to x̂ at epoch `t_start`."""
    return train(exp.with_schedule(jt_ft(t_start, exp.schedule.T_max)), corpus, out_dir, **kwargs)


def cascade_phase2_config(exp: ExperimentConfig) -> ExperimentConfig:
    """Vocoder on x̂ from epoch 0 with no gradient into the acoustic model."""
    schedule: ScheduleConfig = jt_ft(0, exp.schedule.T_max)
    phase2 = exp.with_schedule(schedule)
    return replace(phase2, train=replace(phase2.train, joint_gradient=JointGradient.DETACH.value))


def cascade_train(exp: ExperimentConfig, corpus: Corpus, out_dir: PathLike) -> TrainState:
    """
    Phase 1 trains the acoustic model fully; phase 2 freezes it and trains a
    fresh vocoder exclusively on its output.
    """
    out_dir = Path(out_dir)
    phase1 = train_acoustic_model(exp, corpus, out_dir / "phase1_am")

    phase2_exp = cascade_phase2_config(exp)
    models = instantiate_models(phase2_exp, with_am=True, dtype=corpus.train[0].mel.dtype)
    models.am.load_state_dict(phase1.models.am.state_dict())
    models.am.requires_grad_(False)

    LOGGER.info("Cascade phase 2: vocoder on frozen acoustic model output")
    return train(phase2_exp, corpus, out_dir / "phase2_vocoder", am_mode=AM_FROZEN, models=models)
