# ==============================================================================
# steps.py  –  One joint-training iteration
# ------------------------------------------------------------------------------
# Order inside an iteration:
#   1. acoustic model, teacher-forced → x̂ and L_AM
#   2. vocoder on x̂ (pred branch) and/or x (gt branch), same crops for both
#   3. discriminator update on L_D_mix
#   4. generator (+ acoustic model) update on L_tot = L_AM + L_v
#
# A branch is forwarded only when its weight is non-zero; the skipped branch
# contributes 0 terms.
# ==============================================================================

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import Tensor
from torch.optim import Optimizer

from singshift.am.acoustic_model import AcousticModel, am_loss
from singshift.dsp.features import StftConfig
from singshift.losses.loss_algebra import (
    LossBreakdown,
    adversarial_generator_loss,
    check_finite,
    compose,
    discriminator_loss,
    feature_matching_loss,
    mel_reconstruction_loss,
    mix,
)
from singshift.schedule.mixing_schedule import MixWeight
from singshift.trainer.config import ExperimentConfig, MixMode
from singshift.trainer.corpus import TrainItem
from singshift.voc.discriminators import Discriminators
from singshift.voc.generator import Generator

AM_TRAIN = "train"
AM_FROZEN = "frozen"
AM_ABSENT = "absent"


@dataclass
class TrainModels:
    am: Optional[AcousticModel]
    generator: Generator
    discriminators: Discriminators


@dataclass(frozen=True)
class BranchPlan:
    weight: MixWeight  # schedule value
    applied: float  # weight used in the mixes
    forward_pred: bool
    forward_gt: bool


@dataclass
class AcousticPass:
    l_d: Tensor
    l_ma: Tensor
    xhat_seg: Optional[Tensor]  # (B, S, n_mels)


# ------------------------------------------------------------------------------
# Planning
# ------------------------------------------------------------------------------


def branch_plan(p: MixWeight, mix_mode: str, rng: np.random.Generator) -> BranchPlan:
    if mix_mode == MixMode.BERNOULLI.value:
        use_pred = bool(rng.random() < p.p)
        return BranchPlan(p, 1.0 if use_pred else 0.0, use_pred, not use_pred)
    return BranchPlan(p, p.p, p.p > 0.0, p.p < 1.0)


def crop_starts(items: Sequence[TrainItem], segment_frames: int, rng: np.random.Generator) -> List[int]:
    return [int(rng.integers(0, item.n_frames - segment_frames + 1)) for item in items]


def segment_targets(
    items: Sequence[TrainItem], starts: Sequence[int], segment_frames: int, hop: int
) -> Tuple[Tensor, Tensor]:
    """(x_seg (B, S, n_mels), w_seg (B, S · hop))."""
    x = torch.stack([it.mel[s : s + segment_frames] for it, s in zip(items, starts)])
    w = torch.stack(
        [it.waveform[s * hop : (s + segment_frames) * hop] for it, s in zip(items, starts)]
    )
    return x, w


# ------------------------------------------------------------------------------
# Forward pieces
# ------------------------------------------------------------------------------


def acoustic_forward(
    am: Optional[AcousticModel],
    items: Sequence[TrainItem],
    starts: Sequence[int],
    segment_frames: int,
    am_mode: str,
    exp: ExperimentConfig,
    dtype: torch.dtype,
) -> AcousticPass:
    if am is None or am_mode == AM_ABSENT:
        zero = torch.zeros((), dtype=dtype)
        return AcousticPass(zero, zero, None)

    l_d: List[Tensor] = []
    l_ma: List[Tensor] = []
    segs: List[Tensor] = []
    with torch.set_grad_enabled(am_mode == AM_TRAIN):
        for item, start in zip(items, starts):
            out = am(item.phoneme_ids, item.pitch_ids, item.durations)
            d, m, _ = am_loss(
                out, item.mel, item.durations,
                exp.train.weights.lambda_d, exp.train.weights.lambda_ma,
            )
            l_d.append(d)
            l_ma.append(m)
            segs.append(out.mel_pred[start : start + segment_frames])

    return AcousticPass(torch.stack(l_d).mean(), torch.stack(l_ma).mean(), torch.stack(segs))


def vocoder_forward(
    generator: Generator,
    x_seg: Tensor,
    xhat_seg: Optional[Tensor],
    plan: BranchPlan,
    detach: bool,
) -> Tuple[Optional[Tensor], Optional[Tensor]]:
    """(ŵ_pred, ŵ_gt); a branch is None when not forwarded."""
    w_pred = None
    if plan.forward_pred:
        if xhat_seg is None:
            raise RuntimeError("predicted branch requested without an acoustic model")
        w_pred = generator(xhat_seg.detach() if detach else xhat_seg)
    w_gt = generator(x_seg) if plan.forward_gt else None
    return w_pred, w_gt


def discriminator_terms(
    discs: Discriminators, w_seg: Tensor, w_pred: Optional[Tensor], w_gt: Optional[Tensor]
) -> Tuple[Tensor, Tensor]:
    real = discs(w_seg)
    zero = torch.zeros((), dtype=w_seg.dtype)
    l_pred = discriminator_loss(real.scores, discs(w_pred.detach()).scores) if w_pred is not None else zero
    l_gt = discriminator_loss(real.scores, discs(w_gt.detach()).scores) if w_gt is not None else zero
    return l_pred, l_gt


def generator_terms(
    discs: Discriminators,
    w_seg: Tensor,
    w_pred: Optional[Tensor],
    w_gt: Optional[Tensor],
    dsp: StftConfig,
) -> Dict[str, Tensor]:
    """adv / f / m terms for both branches (0 for a branch that was not forwarded)."""
    with torch.no_grad():
        real = discs(w_seg)

    zero = torch.zeros((), dtype=w_seg.dtype)
    terms: Dict[str, Tensor] = {}
    for branch, wave in (("pred", w_pred), ("gt", w_gt)):
        if wave is None:
            terms.update({f"l_adv_{branch}": zero, f"l_f_{branch}": zero, f"l_m_{branch}": zero})
            continue
        fake = discs(wave)
        terms[f"l_adv_{branch}"] = adversarial_generator_loss(fake.scores)
        terms[f"l_f_{branch}"] = feature_matching_loss(real.features, fake.features)
        terms[f"l_m_{branch}"] = mel_reconstruction_loss(wave, w_seg, dsp)
    return terms


# ------------------------------------------------------------------------------
# Full iteration
# ------------------------------------------------------------------------------


def train_step(
    models: TrainModels,
    optimizers: Dict[str, Optimizer],
    items: Sequence[TrainItem],
    starts: Sequence[int],
    plan: BranchPlan,
    exp: ExperimentConfig,
    am_mode: str = AM_TRAIN,
    train_vocoder: bool = True,
) -> LossBreakdown:
    """
    Run one iteration and update parameters in place.

    Raises
    ------
    DivergenceError
        Before any update that would consume a non-finite loss.
    """
    dtype = items[0].mel.dtype
    segment = exp.voc.segment_frames
    zero = torch.zeros((), dtype=dtype)

    acoustic = acoustic_forward(models.am, items, starts, segment, am_mode, exp, dtype)

    if not train_vocoder:
        breakdown = compose(
            plan.weight, exp.train.weights,
            l_d=acoustic.l_d, l_ma=acoustic.l_ma,
            l_adv_pred=zero, l_adv_gt=zero, l_f_pred=zero, l_f_gt=zero,
            l_m_pred=zero, l_m_gt=zero, l_disc_pred=zero, l_disc_gt=zero,
            applied=plan.applied,
        )
        if am_mode == AM_TRAIN:
            optimizers["am"].zero_grad(set_to_none=True)
            breakdown.l_tot.backward()
            optimizers["am"].step()
        return breakdown

    x_seg, w_seg = segment_targets(items, starts, segment, exp.dsp.hop)
    detach = exp.train.detach or am_mode != AM_TRAIN
    w_pred, w_gt = vocoder_forward(models.generator, x_seg, acoustic.xhat_seg, plan, detach)

    # discriminator
    l_disc_pred, l_disc_gt = discriminator_terms(models.discriminators, w_seg, w_pred, w_gt)
    l_disc_mix = mix(plan.applied, l_disc_pred, l_disc_gt)
    check_finite("L_D_mix", l_disc_mix)
    optimizers["disc"].zero_grad(set_to_none=True)
    l_disc_mix.backward()
    optimizers["disc"].step()

    # generator (+ acoustic model)
    terms = generator_terms(models.discriminators, w_seg, w_pred, w_gt, exp.dsp)
    breakdown = compose(
        plan.weight, exp.train.weights,
        l_d=acoustic.l_d, l_ma=acoustic.l_ma,
        l_disc_pred=l_disc_pred.detach(), l_disc_gt=l_disc_gt.detach(),
        applied=plan.applied,
        **terms,
    )

    optimizers["gen"].zero_grad(set_to_none=True)
    if am_mode == AM_TRAIN:
        optimizers["am"].zero_grad(set_to_none=True)
    breakdown.l_tot.backward()
    optimizers["gen"].step()
    if am_mode == AM_TRAIN:
        optimizers["am"].step()

    return breakdown
