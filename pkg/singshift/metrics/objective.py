# ==============================================================================
# objective.py  –  MCD, F0 RMSE, VUV error, semitone accuracy
#
# Conventions:
#   • mel-cepstra = orthonormal DCT-II of the log-mel frames, c0 dropped, order 13
#   • F0 RMSE in natural-log Hz over frames voiced in both tracks
#   • streams are compared frame by frame (no DTW); callers crop to equal length
# ==============================================================================

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, Sequence

import numpy as np
from scipy.fft import dct

from singshift.dsp.features import StftConfig, mel_spectrogram
from singshift.dsp.pitch import PitchConfig, PitchTrack, estimate_f0

MCD_ORDER = 13
_DB_FACTOR = 10.0 / math.log(10.0)


class MetricError(ValueError):
    """Metric undefined for the given inputs."""


@dataclass(frozen=True)
class EvalReport:
    mcd: float
    f0_rmse: float  # NaN when no frame is voiced in both tracks
    vuv_e: float
    sa: float
    n_frames: int
    n_voiced_both: int

    def as_row(self) -> Dict[str, float]:
        return asdict(self)


# ------------------------------------------------------------------------------
# Spectral distance
# ------------------------------------------------------------------------------


def mel_cepstrum(log_mel_frames: np.ndarray, order: int = MCD_ORDER) -> np.ndarray:
    """(frames, n_mels) → (frames, order) cepstra c_1..c_order."""
    if order >= log_mel_frames.shape[1]:
        raise MetricError(f"cepstral order {order} needs more than {log_mel_frames.shape[1]} mel bins")
    return dct(log_mel_frames, type=2, norm="ortho", axis=1)[:, 1 : order + 1]


def mcd_from_cepstra(c_ref: np.ndarray, c_gen: np.ndarray) -> float:
    """Mean over frames of (10 / ln 10) · sqrt(2 · Σ_d (c_d - ĉ_d)²)."""
    c_ref = np.atleast_2d(np.asarray(c_ref, dtype=np.float64))
    c_gen = np.atleast_2d(np.asarray(c_gen, dtype=np.float64))
    if c_ref.shape != c_gen.shape:
        raise MetricError(f"cepstra shapes differ: {c_ref.shape} vs {c_gen.shape}")
    if c_ref.shape[0] == 0:
        raise MetricError("no aligned frames")

    per_frame = _DB_FACTOR * np.sqrt(2.0 * np.sum((c_ref - c_gen) ** 2, axis=1))
    return float(np.mean(per_frame))


def mcd(
    ref_wave: np.ndarray, gen_wave: np.ndarray, cfg: StftConfig, order: int = MCD_ORDER
) -> float:
    ref = mel_spectrogram(ref_wave, cfg).values
    gen = mel_spectrogram(gen_wave, cfg).values
    n = min(len(ref), len(gen))
    return mcd_from_cepstra(mel_cepstrum(ref[:n], order), mel_cepstrum(gen[:n], order))


# ------------------------------------------------------------------------------
# Pitch metrics
# ------------------------------------------------------------------------------


def _check_pair(ref: PitchTrack, gen: PitchTrack) -> None:
    if len(ref) != len(gen):
        raise MetricError(f"track lengths differ: {len(ref)} vs {len(gen)}")
    if len(ref) == 0:
        raise MetricError("zero frames")


def _voiced_both(ref: PitchTrack, gen: PitchTrack) -> np.ndarray:
    _check_pair(ref, gen)
    mask = ref.voiced & gen.voiced
    if not mask.any():
        raise MetricError("no mutually voiced frames")
    return mask


def f0_rmse(ref: PitchTrack, gen: PitchTrack) -> float:
    mask = _voiced_both(ref, gen)
    diff = np.log(ref.f0[mask]) - np.log(gen.f0[mask])
    return float(np.sqrt(np.mean(diff**2)))


def vuv_error(ref: PitchTrack, gen: PitchTrack) -> float:
    _check_pair(ref, gen)
    return float(np.mean(ref.voiced != gen.voiced))


def semitone_accuracy(ref: PitchTrack, gen: PitchTrack) -> float:
    mask = _voiced_both(ref, gen)
    semitones = 12.0 * np.log2(gen.f0[mask] / ref.f0[mask])
    return float(np.mean(np.abs(semitones) < 0.5))


# ------------------------------------------------------------------------------
# Reports
# ------------------------------------------------------------------------------


def evaluate_pair(
    ref_wave: np.ndarray,
    gen_wave: np.ndarray,
    stft_cfg: StftConfig,
    pitch_cfg: PitchConfig,
) -> EvalReport:
    """
    All four metrics for one reference/generated pair.

    Both waveforms are cropped to the shorter one. With no mutually voiced frame
    the report carries f0_rmse = NaN and sa = 0.0.
    """
    n = min(len(ref_wave), len(gen_wave))
    if n < stft_cfg.win:
        raise MetricError(f"need at least {stft_cfg.win} samples, got {n}")
    ref_wave, gen_wave = np.asarray(ref_wave[:n]), np.asarray(gen_wave[:n])

    ref_track = estimate_f0(ref_wave, pitch_cfg)
    gen_track = estimate_f0(gen_wave, pitch_cfg)
    both = int(np.sum(ref_track.voiced & gen_track.voiced))

    return EvalReport(
        mcd=mcd(ref_wave, gen_wave, stft_cfg),
        f0_rmse=f0_rmse(ref_track, gen_track) if both else float("nan"),
        vuv_e=vuv_error(ref_track, gen_track),
        sa=semitone_accuracy(ref_track, gen_track) if both else 0.0,
        n_frames=len(ref_track),
        n_voiced_both=both,
    )


def corpus_means(reports: Iterable[EvalReport]) -> EvalReport:
    """NaN-aware average of per-utterance reports; frame counts are summed."""
    reports = list(reports)
    if not reports:
        raise MetricError("no reports to average")

    def _mean(values: Sequence[float]) -> float:
        finite = [v for v in values if not math.isnan(v)]
        return float(np.mean(finite)) if finite else float("nan")

    return EvalReport(
        mcd=_mean([r.mcd for r in reports]),
        f0_rmse=_mean([r.f0_rmse for r in reports]),
        vuv_e=_mean([r.vuv_e for r in reports]),
        sa=_mean([r.sa for r in reports]),
        n_frames=sum(r.n_frames for r in reports),
        n_voiced_both=sum(r.n_voiced_both for r in reports),
    )
