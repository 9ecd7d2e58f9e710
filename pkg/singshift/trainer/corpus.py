# ==============================================================================
# corpus.py  –  Utterances → training tensors
#
# Each TrainItem holds the token ids, ground-truth frame durations, the aligned
# log-mel target x (N frames) and the waveform w (N · hop samples).
# ==============================================================================

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import torch
from torch import Tensor

from singshift.dsp.features import aligned_mel
from singshift.score.dataset_io import split_ids
from singshift.score.frame_targets import score_to_frame_targets
from singshift.score.synthetic_corpus import Utterance
from singshift.trainer.config import ConfigError, ExperimentConfig
from singshift.utils.logging_utils import setup_logger

LOGGER = setup_logger("corpus")


@dataclass
class TrainItem:
    id: str
    phoneme_ids: Tensor  # (n,)
    pitch_ids: Tensor  # (n,)
    durations: Tensor  # (n,) frames
    mel: Tensor  # (N, n_mels)
    waveform: Tensor  # (N · hop,)

    @property
    def n_frames(self) -> int:
        return int(self.mel.shape[0])


@dataclass
class Corpus:
    train: List[TrainItem]
    val: List[TrainItem]


def prepare_item(utt: Utterance, exp: ExperimentConfig, dtype: torch.dtype = torch.float32) -> TrainItem:
    cfg = exp.dsp
    if utt.sample_rate != cfg.sample_rate:
        raise ConfigError(
            f"{utt.id}: dataset sample rate {utt.sample_rate} Hz differs from config {cfg.sample_rate} Hz"
        )

    targets = score_to_frame_targets(utt.score, cfg.frame_period, exp.data.inventory)
    n = targets.n_frames
    expected = n * cfg.hop
    wave = np.asarray(utt.waveform, dtype=np.float64)
    if abs(len(wave) - expected) > cfg.hop:
        raise ConfigError(
            f"{utt.id}: waveform has {len(wave)} samples, score implies {expected} "
            f"at hop {cfg.hop}; frame rates disagree"
        )
    wave = np.pad(wave, (0, max(0, expected - len(wave))))[:expected]

    w64 = torch.from_numpy(wave)
    with torch.no_grad():
        mel = aligned_mel(w64, cfg, n)

    return TrainItem(
        id=utt.id,
        phoneme_ids=torch.from_numpy(targets.phoneme_ids),
        pitch_ids=torch.from_numpy(targets.pitch_ids),
        durations=torch.from_numpy(targets.durations),
        mel=mel.to(dtype),
        waveform=w64.to(dtype),
    )


def build_corpus(
    utterances: Sequence[Utterance], exp: ExperimentConfig, dtype: torch.dtype = torch.float32
) -> Corpus:
    """
    Split by sorted id (last `data.n_val` are validation) and tensorize.

    Raises
    ------
    ConfigError
        Empty training split, frame-rate mismatch, or a training utterance
        shorter than one segment.
    """
    by_id = {utt.id: utt for utt in utterances}
    train_ids, val_ids = split_ids(list(by_id), exp.data.n_val)
    if not train_ids:
        raise ConfigError("training split is empty")

    train = [prepare_item(by_id[i], exp, dtype) for i in train_ids]
    val = [prepare_item(by_id[i], exp, dtype) for i in val_ids]

    short = [item.id for item in train if item.n_frames < exp.voc.segment_frames]
    if short:
        raise ConfigError(
            f"{len(short)} training utterance(s) shorter than {exp.voc.segment_frames} frames: {short[:3]}"
        )

    LOGGER.info("Corpus ready: %d train / %d validation utterance(s)", len(train), len(val))
    return Corpus(train=train, val=val)
