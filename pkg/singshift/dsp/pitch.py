# ==============================================================================
# pitch.py  –  Autocorrelation F0 tracker
#
# Frames follow the log-mel convention (centered, floor(len / hop) + 1 frames,
# reflect padding) so pitch tracks and mel frames line up one-to-one.
# ==============================================================================

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from singshift.dsp.features import DspError, StftConfig


@dataclass(frozen=True)
class PitchConfig:
    sample_rate: int = 8000
    hop: int = 100
    win: int = 400
    f_lo: float = 60.0
    f_hi: float = 1000.0
    clarity: float = 0.5
    octave_ratio: float = 0.9

    def __post_init__(self) -> None:
        if not 0 < self.f_lo < self.f_hi <= self.sample_rate / 2:
            raise DspError(f"search band [{self.f_lo}, {self.f_hi}] must lie below Nyquist")
        if self.sample_rate / self.f_lo + 1 >= self.win:
            raise DspError("window too short for the lowest searched pitch")

    @classmethod
    def from_stft(cls, cfg: StftConfig, **overrides) -> "PitchConfig":
        base = cls(
            sample_rate=cfg.sample_rate,
            hop=cfg.hop,
            win=cfg.win,
            f_lo=60.0,
            f_hi=min(1000.0, cfg.sample_rate / 2),
        )
        return replace(base, **overrides) if overrides else base


@dataclass(frozen=True)
class PitchTrack:
    f0: np.ndarray  # Hz, 0 when unvoiced
    voiced: np.ndarray

    def __post_init__(self) -> None:
        if self.f0.shape != self.voiced.shape:
            raise DspError("f0 and voiced must have the same length")
        if np.any((self.f0 > 0) != self.voiced):
            raise DspError("f0 must be positive exactly on voiced frames")

    def __len__(self) -> int:
        return int(self.f0.shape[0])

    def trim(self, n_frames: int) -> "PitchTrack":
        return PitchTrack(self.f0[:n_frames], self.voiced[:n_frames])

    @classmethod
    def from_f0(cls, f0: np.ndarray) -> "PitchTrack":
        f0 = np.asarray(f0, dtype=np.float64)
        return cls(f0=f0, voiced=f0 > 0)


# ------------------------------------------------------------------------------
# Internal helpers
# ------------------------------------------------------------------------------


def _frames(w: np.ndarray, cfg: PitchConfig) -> np.ndarray:
    half = cfg.win // 2
    padded = np.pad(w, (half, cfg.win - half), mode="reflect")
    windows = sliding_window_view(padded, cfg.win)[:: cfg.hop]
    return windows[: len(w) // cfg.hop + 1]


def _normalized_autocorrelation(frames: np.ndarray, lags: np.ndarray) -> np.ndarray:
    """(n_frames, n_lags) normalized cross-correlation of each frame with its lagged self."""
    width = frames.shape[1]
    out = np.zeros((frames.shape[0], len(lags)))
    for j, lag in enumerate(lags):
        head = frames[:, : width - lag]
        tail = frames[:, lag:]
        num = np.einsum("ij,ij->i", head, tail)
        den = np.sqrt(np.einsum("ij,ij->i", head, head) * np.einsum("ij,ij->i", tail, tail))
        out[:, j] = np.divide(num, den, out=np.zeros_like(num), where=den > 1e-12)
    return out


def _pick_lag(r: np.ndarray, cfg: PitchConfig) -> tuple:
    """Return (interior index, peak value) of the chosen peak, or (-1, best) if none."""
    inner = r[1:-1]
    is_peak = (inner > r[:-2]) & (inner >= r[2:])
    if not is_peak.any():
        return -1, float(inner.max())

    peak_idx = np.flatnonzero(is_peak)
    best = float(inner[peak_idx].max())
    # smallest lag close enough to the best peak (avoids octave-down picks)
    chosen = peak_idx[np.argmax(inner[peak_idx] >= cfg.octave_ratio * best)]
    return int(chosen), best


# ------------------------------------------------------------------------------
# Public API
# ------------------------------------------------------------------------------


def estimate_f0(waveform: np.ndarray, cfg: PitchConfig) -> PitchTrack:
    """
    Per-frame F0 by normalized autocorrelation peak picking.

    A frame is voiced when its best peak reaches `clarity`; the chosen lag is
    refined by parabolic interpolation. Silent or aperiodic frames come back unvoiced.
    """
    w = np.asarray(waveform, dtype=np.float64)
    if w.ndim != 1 or len(w) < cfg.win:
        raise DspError(f"need a 1-D waveform of at least {cfg.win} samples")

    lag_min = max(2, int(np.floor(cfg.sample_rate / cfg.f_hi)))
    lag_max = int(np.ceil(cfg.sample_rate / cfg.f_lo))
    lags = np.arange(lag_min - 1, lag_max + 2)

    r_all = _normalized_autocorrelation(_frames(w, cfg), lags)
    f0 = np.zeros(r_all.shape[0])

    for i, r in enumerate(r_all):
        idx, best = _pick_lag(r, cfg)
        if idx < 0 or best < cfg.clarity:
            continue

        left, mid, right = r[idx], r[idx + 1], r[idx + 2]
        curvature = left - 2.0 * mid + right
        delta = 0.5 * (left - right) / curvature if curvature < 0 else 0.0
        lag = lags[idx + 1] + float(np.clip(delta, -0.5, 0.5))

        f0[i] = float(np.clip(cfg.sample_rate / lag, cfg.f_lo, cfg.f_hi))

    return PitchTrack.from_f0(f0)
