# ==============================================================================
# synthetic_corpus.py
# ------------------------------------------------------------------------------
# Deterministic singing-like corpus with exact labels.
#
# Each utterance is a random score rendered as:
#   • a harmonic source following the score's F0 (phase-continuous across notes)
#   • a fixed resonance pattern per phoneme shaping the harmonic amplitudes
#   • a per-note level with short raised-cosine fades
#   • digital silence for REST events
# Note durations are whole frames, so waveform length = frames · hop exactly.
# ==============================================================================

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from singshift.dsp.features import StftConfig
from singshift.score.frame_targets import midi_to_hz, score_to_frame_targets
from singshift.score.score_format import DEFAULT_INVENTORY, REST, MusicScore, ScoreEvent
from singshift.utils.logging_utils import setup_logger

LOGGER = setup_logger("synthetic_corpus")

# first two resonances (Hz) of the vowel-like default inventory
_RESONANCES = {
    "a": (800.0, 1200.0),
    "e": (500.0, 1900.0),
    "i": (300.0, 2300.0),
    "o": (500.0, 900.0),
    "u": (350.0, 800.0),
}
_RESONANCE_WIDTH = 120.0  # Hz
_ENVELOPE_FLOOR = 0.25
_FADE_SECONDS = 0.01


@dataclass(frozen=True)
class DataConfig:
    count: int = 70
    n_val: int = 10
    inventory: Tuple[str, ...] = DEFAULT_INVENTORY
    pitch_low: int = 55
    pitch_high: int = 72
    min_note_frames: int = 12
    max_note_frames: int = 32
    notes_min: int = 4
    notes_max: int = 8
    rest_probability: float = 0.15
    level_low: float = 0.3
    level_high: float = 0.6
    seed: int = 777

    def __post_init__(self) -> None:
        if not self.inventory:
            raise ValueError("phoneme inventory is empty")
        if self.pitch_low > self.pitch_high:
            raise ValueError(f"inverted pitch range [{self.pitch_low}, {self.pitch_high}]")
        if self.pitch_low < 0 or self.pitch_high > 127:
            raise ValueError("pitch range must lie in MIDI [0, 127]")
        if not 1 <= self.min_note_frames <= self.max_note_frames:
            raise ValueError("need 1 <= min_note_frames <= max_note_frames")
        if not 1 <= self.notes_min <= self.notes_max:
            raise ValueError("need 1 <= notes_min <= notes_max")
        if not 0 <= self.n_val <= self.count:
            raise ValueError("n_val must lie in [0, count]")
        if not 0 < self.level_low <= self.level_high < 1:
            raise ValueError("levels must satisfy 0 < level_low <= level_high < 1")


@dataclass(frozen=True)
class Utterance:
    id: str
    score: MusicScore
    waveform: np.ndarray  # float64 in (-1, 1)
    sample_rate: int


# ------------------------------------------------------------------------------
# Rendering helpers
# ------------------------------------------------------------------------------


def phoneme_resonances(phoneme: str, inventory: Sequence[str]) -> Tuple[float, float]:
    """Fixed resonance pair per phoneme; symbols outside the vowel table get a derived pair."""
    if phoneme in _RESONANCES:
        return _RESONANCES[phoneme]
    index = list(inventory).index(phoneme)
    rng = np.random.default_rng(10_007 + index)
    return float(rng.uniform(250.0, 900.0)), float(rng.uniform(1000.0, 2600.0))


def _harmonic_gains(f0: float, resonances: Tuple[float, float], nyquist: float) -> np.ndarray:
    n_harm = max(1, int(0.9 * nyquist // f0))
    freqs = f0 * np.arange(1, n_harm + 1)
    envelope = _ENVELOPE_FLOOR + sum(
        np.exp(-0.5 * ((freqs - fc) / _RESONANCE_WIDTH) ** 2) for fc in resonances
    )
    gains = envelope / np.arange(1, n_harm + 1)
    return gains / gains.sum()


def _fade(n: int, fade_len: int) -> np.ndarray:
    env = np.ones(n)
    k = min(fade_len, n // 2)
    if k > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * (np.arange(k) + 0.5) / k)
        env[:k] = ramp
        env[n - k :] = ramp[::-1]
    return env


def render_score(
    score: MusicScore,
    stft_cfg: StftConfig,
    rng: np.random.Generator,
    inventory: Sequence[str] = DEFAULT_INVENTORY,
    level_range: Tuple[float, float] = (0.3, 0.6),
) -> np.ndarray:
    """Render a score to exactly (total frames · hop) samples."""
    targets = score_to_frame_targets(score, stft_cfg.frame_period, inventory)
    sr, hop = stft_cfg.sample_rate, stft_cfg.hop
    samples_per_event = targets.durations * hop

    f0_per_sample = np.repeat(
        [0.0 if ev.is_rest else midi_to_hz(ev.midi_pitch) for ev in score.events],
        samples_per_event,
    )
    phase = np.concatenate([[0.0], np.cumsum(2.0 * np.pi * f0_per_sample / sr)[:-1]])

    out = np.zeros(int(samples_per_event.sum()))
    fade_len = int(round(_FADE_SECONDS * sr))
    start = 0
    for ev, n in zip(score.events, samples_per_event):
        level = rng.uniform(*level_range)
        if ev.is_rest or n == 0:
            start += n
            continue

        f0 = midi_to_hz(ev.midi_pitch)
        gains = _harmonic_gains(f0, phoneme_resonances(ev.phoneme, inventory), sr / 2)
        seg_phase = phase[start : start + n]
        harmonics = np.sin(np.outer(seg_phase, np.arange(1, len(gains) + 1)))
        out[start : start + n] = level * _fade(n, fade_len) * (harmonics @ gains)
        start += n

    return out


def random_score(cfg: DataConfig, frame_period: float, rng: np.random.Generator) -> MusicScore:
    n_notes = int(rng.integers(cfg.notes_min, cfg.notes_max + 1))
    events: List[ScoreEvent] = []
    for k in range(n_notes):
        frames = int(rng.integers(cfg.min_note_frames, cfg.max_note_frames + 1))
        duration = frames * frame_period
        # never start or end on a rest, never two rests in a row
        can_rest = 0 < k < n_notes - 1 and not events[-1].is_rest
        if can_rest and rng.random() < cfg.rest_probability:
            events.append(ScoreEvent(REST, None, duration))
            continue
        phoneme = cfg.inventory[int(rng.integers(len(cfg.inventory)))]
        pitch = int(rng.integers(cfg.pitch_low, cfg.pitch_high + 1))
        events.append(ScoreEvent(phoneme, pitch, duration))
    return MusicScore(tuple(events))


# ------------------------------------------------------------------------------
# Public API
# ------------------------------------------------------------------------------


def generate_synthetic_dataset(
    cfg: DataConfig, seed: int, stft_cfg: StftConfig
) -> List[Utterance]:
    """
    Generate `cfg.count` utterances, bit-identical for a given (cfg, seed, stft_cfg).

    Returns
    -------
    List[Utterance]
        Sorted by id (`utt_0000`, `utt_0001`, …).
    """
    rng = np.random.default_rng(seed)
    utterances: List[Utterance] = []

    for k in range(cfg.count):
        score = random_score(cfg, stft_cfg.frame_period, rng)
        wave = render_score(
            score, stft_cfg, rng, cfg.inventory, (cfg.level_low, cfg.level_high)
        )
        utterances.append(Utterance(f"utt_{k:04d}", score, wave, stft_cfg.sample_rate))

    LOGGER.info(
        "Generated %d utterance(s) at %d Hz (seed=%d)", len(utterances), stft_cfg.sample_rate, seed
    )
    return utterances
