# ==============================================================================
# loss_algebra.py  –  LSGAN, feature matching, mel reconstruction and the
#                     p-weighted compositions of the joint objective
# ------------------------------------------------------------------------------
#   L_AM      = λ_d L_d + λ_ma L_ma
#   L_*_mix   = p · L_*_pred + (1 - p) · L_*_gt        (* ∈ adv, f, m, D)
#   L_v       = λ_adv L_adv_mix + λ_f L_f_mix + λ_m L_m_mix
#   L_G       = L_tot = L_AM + L_v
#
# "pred" terms use the vocoder output on predicted mels x̂, "gt" terms the output
# on ground-truth mels x. A branch that is not forwarded contributes a 0 term.
# ==============================================================================

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import List, Optional, Sequence, Union

import torch
import torch.nn.functional as F
from torch import Tensor

from singshift.dsp.features import StftConfig, log_mel
from singshift.schedule.mixing_schedule import MixWeight


class LossError(ValueError):
    """Misaligned loss inputs."""


class DivergenceError(RuntimeError):
    """A loss term became non-finite."""

    def __init__(self, message: str, last_checkpoint: Optional[Path] = None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint


@dataclass(frozen=True)
class LossWeights:
    lambda_d: float = 1.0
    lambda_ma: float = 1.0
    lambda_adv: float = 1.0
    lambda_f: float = 2.0
    lambda_m: float = 45.0

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value) or value < 0:
                raise LossError(f"{f.name} must be a finite value >= 0, got {value}")


@dataclass
class LossBreakdown:
    l_d: Tensor
    l_ma: Tensor
    l_am: Tensor
    l_adv_pred: Tensor
    l_adv_gt: Tensor
    l_adv_mix: Tensor
    l_f_pred: Tensor
    l_f_gt: Tensor
    l_f_mix: Tensor
    l_m_pred: Tensor
    l_m_gt: Tensor
    l_m_mix: Tensor
    l_disc_pred: Tensor
    l_disc_gt: Tensor
    l_disc_mix: Tensor
    l_v: Tensor
    l_g: Tensor
    l_tot: Tensor
    p_used: MixWeight
    applied: float  # weight actually used in the mixes

    def scalars(self) -> dict:
        return {
            f.name: float(getattr(self, f.name))
            for f in fields(self)
            if f.name.startswith("l_")
        }


# ------------------------------------------------------------------------------
# Elementary terms
# ------------------------------------------------------------------------------


def mix(p: Union[MixWeight, float], pred_term, gt_term):
    """p · pred_term + (1 - p) · gt_term."""
    weight = p.p if isinstance(p, MixWeight) else float(p)
    if not 0.0 <= weight <= 1.0:
        raise LossError(f"mixing weight must lie in [0, 1], got {weight}")
    return weight * pred_term + (1.0 - weight) * gt_term


def adversarial_generator_loss(scores: Sequence[Tensor]) -> Tensor:
    """LSGAN generator term: mean over discriminators of mean((D(ŵ) - 1)²)."""
    if not scores:
        raise LossError("no discriminator scores")
    return torch.stack([torch.mean((s - 1.0) ** 2) for s in scores]).mean()


def discriminator_loss(real_scores: Sequence[Tensor], fake_scores: Sequence[Tensor]) -> Tensor:
    """Mean over discriminators of mean((D(w) - 1)²) + mean(D(ŵ)²)."""
    if len(real_scores) != len(fake_scores) or not real_scores:
        raise LossError("real and generated score lists differ in length")

    terms: List[Tensor] = []
    for dr, dg in zip(real_scores, fake_scores):
        if dr.shape != dg.shape:
            raise LossError(f"score map shapes differ: {tuple(dr.shape)} vs {tuple(dg.shape)}")
        terms.append(torch.mean((dr - 1.0) ** 2) + torch.mean(dg**2))
    return torch.stack(terms).mean()


def feature_matching_loss(
    features_real: Sequence[Sequence[Tensor]], features_gen: Sequence[Sequence[Tensor]]
) -> Tensor:
    """L1 per layer, averaged over layers then discriminators; real maps carry no gradient."""
    if len(features_real) != len(features_gen) or not features_real:
        raise LossError("feature lists differ in discriminator count")

    per_disc: List[Tensor] = []
    for fr, fg in zip(features_real, features_gen):
        if len(fr) != len(fg) or not fr:
            raise LossError("feature lists differ in layer count")
        layers = []
        for real, gen in zip(fr, fg):
            if real.shape != gen.shape:
                raise LossError(f"feature shapes differ: {tuple(real.shape)} vs {tuple(gen.shape)}")
            layers.append(torch.mean(torch.abs(real.detach() - gen)))
        per_disc.append(torch.stack(layers).mean())
    return torch.stack(per_disc).mean()


def mel_reconstruction_loss(generated: Tensor, w: Tensor, cfg: StftConfig) -> Tensor:
    """
    L1(φ(ŵ), φ(w)) in the log-mel domain.

    `generated` is the vocoder output G(input_mel); the target is always φ(w).
    """
    mel_gen = log_mel(generated, cfg)
    mel_ref = log_mel(w.to(generated.dtype), cfg)
    if mel_gen.shape != mel_ref.shape:
        raise LossError(
            f"frame mismatch: generated {tuple(mel_gen.shape)} vs reference {tuple(mel_ref.shape)}"
        )
    return F.l1_loss(mel_gen, mel_ref)


def check_finite(name: str, value: Tensor) -> None:
    if not torch.isfinite(value).all():
        raise DivergenceError(f"{name} is not finite ({float(value)})")


# ------------------------------------------------------------------------------
# Composition
# ------------------------------------------------------------------------------


def compose(
    p: MixWeight,
    weights: LossWeights,
    *,
    l_d: Tensor,
    l_ma: Tensor,
    l_adv_pred: Tensor,
    l_adv_gt: Tensor,
    l_f_pred: Tensor,
    l_f_gt: Tensor,
    l_m_pred: Tensor,
    l_m_gt: Tensor,
    l_disc_pred: Tensor,
    l_disc_gt: Tensor,
    applied: Optional[float] = None,
) -> LossBreakdown:
    """
    Fill every term of the joint objective.

    Parameters
    ----------
    p : MixWeight
        Schedule value for the current epoch (logged as is).
    applied : float | None
        Weight used in the mixes; defaults to p.p. In bernoulli mode it is the
        sampled branch indicator.

    Raises
    ------
    DivergenceError
        If any component is non-finite.
    """
    components = {
        "L_d": l_d, "L_ma": l_ma,
        "L_adv_pred": l_adv_pred, "L_adv_gt": l_adv_gt,
        "L_f_pred": l_f_pred, "L_f_gt": l_f_gt,
        "L_m_pred": l_m_pred, "L_m_gt": l_m_gt,
        "L_D_pred": l_disc_pred, "L_D_gt": l_disc_gt,
    }
    for name, value in components.items():
        check_finite(name, value)

    weight = p.p if applied is None else float(applied)

    l_am = weights.lambda_d * l_d + weights.lambda_ma * l_ma
    l_adv_mix = mix(weight, l_adv_pred, l_adv_gt)
    l_f_mix = mix(weight, l_f_pred, l_f_gt)
    l_m_mix = mix(weight, l_m_pred, l_m_gt)
    l_disc_mix = mix(weight, l_disc_pred, l_disc_gt)

    l_v = weights.lambda_adv * l_adv_mix + weights.lambda_f * l_f_mix + weights.lambda_m * l_m_mix
    l_tot = l_am + l_v

    return LossBreakdown(
        l_d=l_d, l_ma=l_ma, l_am=l_am,
        l_adv_pred=l_adv_pred, l_adv_gt=l_adv_gt, l_adv_mix=l_adv_mix,
        l_f_pred=l_f_pred, l_f_gt=l_f_gt, l_f_mix=l_f_mix,
        l_m_pred=l_m_pred, l_m_gt=l_m_gt, l_m_mix=l_m_mix,
        l_disc_pred=l_disc_pred, l_disc_gt=l_disc_gt, l_disc_mix=l_disc_mix,
        l_v=l_v, l_g=l_tot, l_tot=l_tot,
        p_used=p, applied=weight,
    )


LOG_COLUMNS = ("epoch", "iter", "p", "L_AM", "L_adv_mix", "L_f_mix", "L_m_mix", "L_D_mix", "L_v", "L_tot")


def format_log_line(epoch: int, iteration: int, b: LossBreakdown) -> str:
    """Shortest round-trip floats, so `parse_log_line` returns the logged values exactly."""
    values = (b.p_used.p, b.l_am, b.l_adv_mix, b.l_f_mix, b.l_m_mix, b.l_disc_mix, b.l_v, b.l_tot)
    return " ".join([str(epoch), str(iteration)] + [repr(float(v)) for v in values])


def parse_log_line(line: str) -> dict:
    tokens = line.split()
    if len(tokens) != len(LOG_COLUMNS):
        raise LossError(f"expected {len(LOG_COLUMNS)} fields, got {len(tokens)}")
    row = {name: float(tok) for name, tok in zip(LOG_COLUMNS[2:], tokens[2:])}
    row["epoch"], row["iter"] = int(tokens[0]), int(tokens[1])
    return row
