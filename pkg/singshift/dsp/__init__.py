from singshift.dsp.features import (
    STFT_PRESETS,
    DspError,
    MelSpectrogram,
    StftConfig,
    aligned_mel,
    log_mel,
    mel_spectrogram,
)
from singshift.dsp.pitch import PitchConfig, PitchTrack, estimate_f0

__all__ = [
    "STFT_PRESETS",
    "DspError",
    "MelSpectrogram",
    "PitchConfig",
    "PitchTrack",
    "StftConfig",
    "aligned_mel",
    "estimate_f0",
    "log_mel",
    "mel_spectrogram",
]
