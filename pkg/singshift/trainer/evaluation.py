# ==============================================================================
# evaluation.py  –  Synthesis and objective evaluation of trained models
#
#   synthesize_score    score → AM (predicted durations) → vocoder → waveform
#   evaluate_corpus     validation items with ground-truth durations, scored
#                       against the reference recordings
#   evaluate_directories  reference vs generated waveform directories
# ==============================================================================

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from singshift.am.acoustic_model import score_tokens
from singshift.dsp.features import StftConfig
from singshift.dsp.pitch import PitchConfig
from singshift.metrics.objective import EvalReport, corpus_means, evaluate_pair
from singshift.score.dataset_io import DatasetError, read_waveforms
from singshift.score.score_format import MusicScore
from singshift.trainer.checkpoint import CheckpointError
from singshift.trainer.config import ExperimentConfig
from singshift.trainer.corpus import TrainItem
from singshift.trainer.steps import TrainModels
from singshift.utils.logging_utils import setup_logger
from singshift.utils.tables import write_tsv

LOGGER = setup_logger("evaluation")

EVAL_COLUMNS = ("id", "MCD", "F0_RMSE", "VUV_E", "SA", "n_frames", "n_voiced_both")
MEAN_ROW_ID = "mean"

PathLike = Union[str, Path]


@dataclass(frozen=True)
class Synthesis:
    mel: np.ndarray  # (frames, n_mels)
    waveform: np.ndarray  # (frames · hop,)


# ------------------------------------------------------------------------------
# Synthesis
# ------------------------------------------------------------------------------


def synthesize(
    models: TrainModels,
    phoneme_ids: torch.Tensor,
    pitch_ids: torch.Tensor,
    durations: Optional[torch.Tensor] = None,
) -> Synthesis:
    """Durations default to the model's own rounded predictions."""
    if models.am is None:
        raise CheckpointError("these models carry no acoustic model; synthesis needs one")

    with torch.no_grad():
        out = models.am(phoneme_ids, pitch_ids, durations)
        wave = models.generator(out.mel_pred)
    return Synthesis(mel=out.mel_pred.double().numpy(), waveform=wave.double().numpy())


def synthesize_score(models: TrainModels, score: MusicScore, exp: ExperimentConfig) -> Synthesis:
    phoneme_ids, pitch_ids = score_tokens(score, exp.data.inventory)
    return synthesize(models, phoneme_ids, pitch_ids)


def copy_synthesis(models: TrainModels, mel: torch.Tensor) -> np.ndarray:
    """Vocoder on a ground-truth mel."""
    with torch.no_grad():
        return models.generator(mel).double().numpy()


# ------------------------------------------------------------------------------
# Evaluation
# ------------------------------------------------------------------------------


def evaluate_corpus(
    models: TrainModels, items: Sequence[TrainItem], exp: ExperimentConfig
) -> List[Tuple[str, EvalReport]]:
    """
    Per-utterance reports for `items`.

    With an acoustic model the vocoder consumes its mel under ground-truth
    durations; without one it consumes the ground-truth mel.
    """
    pitch_cfg = exp.pitch
    rows: List[Tuple[str, EvalReport]] = []
    for item in items:
        if models.am is not None:
            gen = synthesize(models, item.phoneme_ids, item.pitch_ids, item.durations).waveform
        else:
            gen = copy_synthesis(models, item.mel)
        ref = item.waveform.double().numpy()
        rows.append((item.id, evaluate_pair(ref, gen, exp.dsp, pitch_cfg)))

    if rows:
        mean = corpus_means(r for _, r in rows)
        LOGGER.info(
            "Evaluated %d utterance(s): MCD %.4g dB | F0 RMSE %.4g (log Hz) | VUV_E %.4g | SA %.4g",
            len(rows), mean.mcd, mean.f0_rmse, mean.vuv_e, mean.sa,
        )
    return rows


def evaluate_directories(
    ref_dir: PathLike, gen_dir: PathLike, stft_cfg: StftConfig, pitch_cfg: Optional[PitchConfig] = None
) -> List[Tuple[str, EvalReport]]:
    """
    Pair waveforms by id across two directories (dataset layout or flat .wav).

    Raises
    ------
    DatasetError
        No common ids, or a sample rate that differs from `stft_cfg`.
    """
    pitch_cfg = pitch_cfg or PitchConfig.from_stft(stft_cfg)
    refs, gens = read_waveforms(ref_dir), read_waveforms(gen_dir)
    common = sorted(set(refs) & set(gens))
    if not common:
        raise DatasetError(f"{ref_dir} and {gen_dir} share no utterance ids")

    missing = sorted(set(refs) - set(gens))
    if missing:
        LOGGER.warning("%d reference id(s) have no generated counterpart, e.g. %s", len(missing), missing[0])

    rows: List[Tuple[str, EvalReport]] = []
    for utt_id in common:
        (ref, ref_sr), (gen, gen_sr) = refs[utt_id], gens[utt_id]
        if ref_sr != stft_cfg.sample_rate or gen_sr != stft_cfg.sample_rate:
            raise DatasetError(
                f"{utt_id}: sample rates {ref_sr}/{gen_sr} Hz, analysis expects {stft_cfg.sample_rate} Hz"
            )
        rows.append((utt_id, evaluate_pair(ref, gen, stft_cfg, pitch_cfg)))
    return rows


def eval_rows(rows: Sequence[Tuple[str, EvalReport]]) -> List[list]:
    """Table rows (per utterance, then the mean row)."""
    table = [_row(utt_id, report) for utt_id, report in rows]
    if rows:
        table.append(_row(MEAN_ROW_ID, corpus_means(r for _, r in rows)))
    return table


def _row(utt_id: str, r: EvalReport) -> list:
    return [utt_id, *r.as_row().values()]


def write_eval_table(path: PathLike, rows: Sequence[Tuple[str, EvalReport]]) -> Path:
    return write_tsv(path, EVAL_COLUMNS, eval_rows(rows))
