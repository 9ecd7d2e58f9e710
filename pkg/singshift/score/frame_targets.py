# ==============================================================================
# frame_targets.py  –  Score → frame-level supervision
#
# Per-event frame counts use cumulative rounding: event k ends at frame
# round(cumulative_duration_k / frame_period), so the counts always sum to
# round(total_duration / frame_period).
# ==============================================================================

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from singshift.score.score_format import DEFAULT_INVENTORY, MusicScore, ScoreParseError

REST_PHONEME_ID = 0
REST_PITCH_ID = 128
PITCH_VOCAB = 129


@dataclass(frozen=True)
class FrameTargets:
    phoneme_ids: np.ndarray  # per event
    pitch_ids: np.ndarray  # per event
    durations: np.ndarray  # per event, frames
    frame_phoneme_ids: np.ndarray  # per frame
    f0: np.ndarray  # per frame, Hz (0 when unvoiced)
    voiced: np.ndarray  # per frame

    @property
    def n_frames(self) -> int:
        return int(self.durations.sum())

    @property
    def log_f0(self) -> np.ndarray:
        out = np.zeros_like(self.f0)
        out[self.voiced] = np.log(self.f0[self.voiced])
        return out


def midi_to_hz(midi: float) -> float:
    return 440.0 * 2.0 ** ((midi - 69.0) / 12.0)


def phoneme_vocabulary(inventory: Sequence[str]) -> dict:
    """Symbol → id, with REST at id 0."""
    return {"REST": REST_PHONEME_ID, **{ph: i + 1 for i, ph in enumerate(inventory)}}


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def frame_counts(durations: Sequence[float], frame_period: float) -> np.ndarray:
    """Cumulative-rounding frame counts for a sequence of durations (seconds)."""
    if frame_period <= 0:
        raise ValueError(f"frame_period must be positive, got {frame_period}")

    boundaries = [0]
    for k in range(1, len(durations) + 1):
        elapsed = math.fsum(durations[:k])
        boundaries.append(_round_half_up(elapsed / frame_period))
    return np.diff(np.asarray(boundaries, dtype=np.int64))


def score_to_frame_targets(
    score: MusicScore,
    frame_period: float,
    inventory: Sequence[str] = DEFAULT_INVENTORY,
) -> FrameTargets:
    """
    Expand a score to frame-level targets.

    Raises
    ------
    ValueError
        If the score spans zero frames or a phoneme is not in `inventory`.
    """
    vocab = phoneme_vocabulary(inventory)
    counts = frame_counts([ev.duration for ev in score.events], frame_period)
    if counts.sum() == 0:
        raise ValueError("score spans zero frames at this frame period")

    try:
        phoneme_ids = np.asarray([vocab[ev.phoneme] for ev in score.events], dtype=np.int64)
    except KeyError as exc:
        raise ScoreParseError(f"phoneme {exc.args[0]!r} not in inventory") from exc

    pitch_ids = np.asarray(
        [REST_PITCH_ID if ev.is_rest else ev.midi_pitch for ev in score.events], dtype=np.int64
    )
    event_f0 = np.asarray(
        [0.0 if ev.is_rest else midi_to_hz(ev.midi_pitch) for ev in score.events]
    )

    f0 = np.repeat(event_f0, counts)
    return FrameTargets(
        phoneme_ids=phoneme_ids,
        pitch_ids=pitch_ids,
        durations=counts,
        frame_phoneme_ids=np.repeat(phoneme_ids, counts),
        f0=f0,
        voiced=f0 > 0,
    )
