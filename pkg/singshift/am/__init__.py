from singshift.am.acoustic_model import (
    AcousticModel,
    AmConfig,
    AmError,
    AmOutput,
    am_loss,
    length_regulate,
)

__all__ = ["AcousticModel", "AmConfig", "AmError", "AmOutput", "am_loss", "length_regulate"]
