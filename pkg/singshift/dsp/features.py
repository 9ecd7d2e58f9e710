# ==============================================================================
# features.py  –  Log-mel analysis (φ)
#
# Convention (pinned; every loss and metric depends on it):
#   • centered frames, reflect padding → floor(len / hop) + 1 frames
#   • Hann window of `win` samples inside an `n_fft` FFT
#   • power spectrum → HTK triangular mel filterbank (unnormalized)
#   • natural log with floor `log_floor`
# ==============================================================================

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, Union

import numpy as np
import torch
from torchaudio.functional import melscale_fbanks


class DspError(ValueError):
    """Invalid analysis configuration or input."""


@dataclass(frozen=True)
class StftConfig:
    sample_rate: int = 8000
    n_fft: int = 512
    hop: int = 100
    win: int = 400
    n_mels: int = 40
    fmin: float = 0.0
    fmax: float = 4000.0
    log_floor: float = 1e-5

    def __post_init__(self) -> None:
        if self.n_fft <= 0 or self.n_fft & (self.n_fft - 1):
            raise DspError(f"n_fft must be a power of two, got {self.n_fft}")
        if not 0 < self.hop <= self.win <= self.n_fft:
            raise DspError(f"need 0 < hop <= win <= n_fft, got {self.hop}, {self.win}, {self.n_fft}")
        if not 0 <= self.fmin < self.fmax <= self.sample_rate / 2:
            raise DspError(f"need fmin < fmax <= Nyquist, got {self.fmin}, {self.fmax}")
        if self.n_mels < 1 or self.log_floor <= 0:
            raise DspError("n_mels must be >= 1 and log_floor > 0")

    @property
    def frame_period(self) -> float:
        return self.hop / self.sample_rate


STFT_PRESETS: Dict[str, StftConfig] = {
    "desk": StftConfig(),
    "paper": StftConfig(
        sample_rate=24000, n_fft=2048, hop=300, win=1200, n_mels=80, fmin=0.0, fmax=12000.0
    ),
    "micro": StftConfig(
        sample_rate=2000, n_fft=128, hop=25, win=100, n_mels=16, fmin=0.0, fmax=1000.0
    ),
}


@dataclass(frozen=True)
class MelSpectrogram:
    values: np.ndarray  # frames × n_mels
    config: StftConfig

    @property
    def n_frames(self) -> int:
        return int(self.values.shape[0])


# ------------------------------------------------------------------------------
# Internal helpers
# ------------------------------------------------------------------------------


@lru_cache(maxsize=16)
def _filterbank(cfg: StftConfig) -> torch.Tensor:
    """(n_fft // 2 + 1, n_mels) HTK filterbank in float64."""
    return melscale_fbanks(
        n_freqs=cfg.n_fft // 2 + 1,
        f_min=float(cfg.fmin),
        f_max=float(cfg.fmax),
        n_mels=cfg.n_mels,
        sample_rate=cfg.sample_rate,
        norm=None,
        mel_scale="htk",
    ).to(torch.float64)


def hz_to_mel(hz: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    return 2595.0 * np.log10(1.0 + np.asarray(hz) / 700.0)


def mel_to_hz(mel: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


def mel_band_centers(cfg: StftConfig) -> np.ndarray:
    """Center frequency (Hz) of every mel band."""
    edges = np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2)
    return mel_to_hz(edges[1:-1])


# ------------------------------------------------------------------------------
# Public API
# ------------------------------------------------------------------------------


def log_mel(waveform: torch.Tensor, cfg: StftConfig) -> torch.Tensor:
    """
    Differentiable φ.

    Parameters
    ----------
    waveform : Tensor
        (T,) or (B, T).

    Returns
    -------
    Tensor
        (frames, n_mels) or (B, frames, n_mels).
    """
    squeeze = waveform.dim() == 1
    batch = waveform.unsqueeze(0) if squeeze else waveform
    if batch.shape[-1] < cfg.win:
        raise DspError(f"waveform of {batch.shape[-1]} samples is shorter than one window ({cfg.win})")

    spec = torch.stft(
        batch,
        n_fft=cfg.n_fft,
        hop_length=cfg.hop,
        win_length=cfg.win,
        window=torch.hann_window(cfg.win, dtype=batch.dtype, device=batch.device),
        center=True,
        pad_mode="reflect",
        return_complex=True,
    )
    power = spec.real.pow(2) + spec.imag.pow(2)  # (B, freq, frames)
    fbank = _filterbank(cfg).to(dtype=batch.dtype, device=batch.device)
    mel = torch.matmul(power.transpose(1, 2), fbank)  # (B, frames, n_mels)
    out = torch.log(torch.clamp(mel, min=cfg.log_floor))

    return out.squeeze(0) if squeeze else out


def mel_spectrogram(waveform: Union[np.ndarray, torch.Tensor], cfg: StftConfig) -> MelSpectrogram:
    """φ for a single waveform, returned as a MelSpectrogram."""
    w = torch.as_tensor(np.asarray(waveform, dtype=np.float64))
    if w.dim() != 1:
        raise DspError("mel_spectrogram expects a 1-D waveform")
    with torch.no_grad():
        values = log_mel(w, cfg).cpu().numpy()
    return MelSpectrogram(values=values, config=cfg)


def aligned_mel(waveform: torch.Tensor, cfg: StftConfig, n_frames: int) -> torch.Tensor:
    """
    Acoustic target for a waveform of n_frames · hop samples.

    The centered framing yields one trailing frame past the last hop boundary;
    it is dropped so the target has exactly `n_frames` rows.
    """
    mel = log_mel(waveform, cfg)
    if mel.shape[-2] < n_frames:
        raise DspError(f"waveform gives {mel.shape[-2]} frames, need {n_frames}")
    return mel[..., :n_frames, :]


def write_mel_text(path: Union[str, Path], mel: MelSpectrogram) -> None:
    """One frame per line, space-separated shortest round-trip floats."""
    lines = (" ".join(repr(float(v)) for v in row) for row in mel.values)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_mel_text(path: Union[str, Path], cfg: StftConfig) -> MelSpectrogram:
    rows = [
        [float(tok) for tok in line.split()]
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    return MelSpectrogram(values=np.asarray(rows, dtype=np.float64), config=cfg)
