# ==============================================================================
# config.py  –  Training configuration and named presets
# ------------------------------------------------------------------------------
# TrainConfig     optimizer, schedule, loss weights and loop sizes
# ExperimentConfig every section of a run (train, am, voc, dsp, data) plus the
#                  cross-section consistency rules
#
# Presets:
#   desk   8 kHz toy run, minutes on a laptop CPU
#   paper  the published recipe (24 kHz, 500 × 500 iterations, lr 1.25e-5, …)
#   micro  2 kHz miniature used by the test-suite
# ==============================================================================

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict

from singshift.am.acoustic_model import AmConfig
from singshift.dsp.features import STFT_PRESETS, StftConfig
from singshift.dsp.pitch import PitchConfig
from singshift.losses.loss_algebra import LossWeights
from singshift.schedule.mixing_schedule import ScheduleConfig, jt_ft
from singshift.score.synthetic_corpus import DataConfig
from singshift.voc.generator import VocConfig


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration; `line_no` is 1-based when known."""

    def __init__(self, message: str, line_no: int = 0):
        self.line_no = line_no
        prefix = f"line {line_no}: " if line_no else ""
        super().__init__(f"{prefix}{message}")


class JointGradient(str, Enum):
    FLOW = "flow"
    DETACH = "detach"


class MixMode(str, Enum):
    DETERMINISTIC = "deterministic"
    BERNOULLI = "bernoulli"


@dataclass(frozen=True)
class TrainConfig:
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    lr: float = 2e-4
    weight_decay: float = 0.0
    adam_b1: float = 0.8
    adam_b2: float = 0.99
    lr_decay_gamma: float = 0.99
    batch_size: int = 4
    epochs: int = 60
    iters_per_epoch: int = 25
    seed: int = 777
    joint_gradient: str = JointGradient.FLOW.value
    mix_mode: str = MixMode.DETERMINISTIC.value

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lr) and self.lr > 0):
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0.0 < self.lr_decay_gamma <= 1.0:
            raise ConfigError(f"lr_decay_gamma must lie in (0, 1], got {self.lr_decay_gamma}")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")
        if not (0.0 <= self.adam_b1 < 1.0 and 0.0 <= self.adam_b2 < 1.0):
            raise ConfigError("Adam betas must lie in [0, 1)")
        if self.batch_size < 1 or self.iters_per_epoch < 1:
            raise ConfigError("batch_size and iters_per_epoch must be >= 1")
        if self.epochs != self.schedule.T_max:
            raise ConfigError(f"epochs ({self.epochs}) must equal schedule T_max ({self.schedule.T_max})")
        try:
            JointGradient(self.joint_gradient)
            MixMode(self.mix_mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def detach(self) -> bool:
        return self.joint_gradient == JointGradient.DETACH.value


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str = "desk"
    train: TrainConfig = field(default_factory=TrainConfig)
    am: AmConfig = field(default_factory=AmConfig)
    voc: VocConfig = field(default_factory=VocConfig)
    dsp: StftConfig = field(default_factory=StftConfig)
    data: DataConfig = field(default_factory=DataConfig)

    def __post_init__(self) -> None:
        if not self.am.n_mels == self.voc.n_mels == self.dsp.n_mels:
            raise ConfigError(
                f"n_mels disagree: am {self.am.n_mels}, voc {self.voc.n_mels}, dsp {self.dsp.n_mels}"
            )
        if self.voc.hop != self.dsp.hop:
            raise ConfigError(
                f"product of upsample factors {self.voc.upsample_factors} = {self.voc.hop} "
                f"must equal dsp hop {self.dsp.hop}"
            )
        if self.am.phoneme_vocab != len(self.data.inventory) + 1:
            raise ConfigError(
                f"am.phoneme_vocab ({self.am.phoneme_vocab}) must be len(inventory) + 1 "
                f"({len(self.data.inventory) + 1})"
            )
        if self.voc.segment_frames * self.dsp.hop < max(self.dsp.win, self.voc.min_disc_samples):
            raise ConfigError("training segments are shorter than one analysis window")
        if self.data.notes_min * self.data.min_note_frames < self.voc.segment_frames:
            raise ConfigError("shortest generated utterance is shorter than one training segment")

    @property
    def schedule(self) -> ScheduleConfig:
        return self.train.schedule

    @property
    def pitch(self) -> PitchConfig:
        return PitchConfig.from_stft(self.dsp)

    def with_schedule(self, schedule: ScheduleConfig) -> "ExperimentConfig":
        return replace(self, train=replace(self.train, schedule=schedule, epochs=schedule.T_max))


# ------------------------------------------------------------------------------
# Presets
# ------------------------------------------------------------------------------


def desk_preset() -> ExperimentConfig:
    return ExperimentConfig(
        preset="desk",
        train=TrainConfig(schedule=jt_ft(15, 60)),
        am=AmConfig(),
        voc=VocConfig(),
        dsp=STFT_PRESETS["desk"],
        data=DataConfig(),
    )


def paper_preset() -> ExperimentConfig:
    return ExperimentConfig(
        preset="paper",
        train=TrainConfig(
            schedule=jt_ft(125, 500),
            lr=1.25e-5,
            weight_decay=0.0,
            lr_decay_gamma=0.999875,
            batch_size=16,
            epochs=500,
            iters_per_epoch=500,
            seed=777,
        ),
        am=AmConfig(hidden_dim=256, n_layers=3, n_heads=4, n_mels=80),
        voc=VocConfig(
            n_mels=80,
            upsample_factors=(5, 5, 4, 3),
            channels=128,
            periods=(2, 3, 5, 7, 11),
            n_scales=3,
            resblock_kernel=3,
            resblock_dilations=(1, 3, 5),
            disc_channels=32,
            segment_frames=32,
        ),
        dsp=STFT_PRESETS["paper"],
        data=DataConfig(),
    )


def micro_preset() -> ExperimentConfig:
    return ExperimentConfig(
        preset="micro",
        train=TrainConfig(
            schedule=jt_ft(2, 4),
            lr=1e-3,
            lr_decay_gamma=0.9,
            batch_size=2,
            epochs=4,
            iters_per_epoch=2,
            seed=7,
        ),
        am=AmConfig(hidden_dim=8, n_layers=1, n_heads=2, n_mels=16),
        voc=VocConfig(
            n_mels=16,
            upsample_factors=(5, 5),
            channels=8,
            periods=(2, 3),
            n_scales=2,
            resblock_dilations=(1,),
            disc_channels=4,
            segment_frames=8,
        ),
        dsp=STFT_PRESETS["micro"],
        data=DataConfig(
            count=6,
            n_val=2,
            pitch_low=55,
            pitch_high=67,
            min_note_frames=4,
            max_note_frames=8,
            notes_min=2,
            notes_max=3,
            seed=7,
        ),
    )


PRESETS: Dict[str, Callable[[], ExperimentConfig]] = {
    "desk": desk_preset,
    "paper": paper_preset,
    "micro": micro_preset,
}


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]()
    except KeyError as exc:
        raise ConfigError(f"unknown preset `{name}` (choose from {', '.join(PRESETS)})") from exc
