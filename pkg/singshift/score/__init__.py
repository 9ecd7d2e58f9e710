from singshift.score.frame_targets import FrameTargets, midi_to_hz, score_to_frame_targets
from singshift.score.score_format import (
    DEFAULT_INVENTORY,
    REST,
    MusicScore,
    ScoreEvent,
    ScoreParseError,
    parse_score,
    serialize_score,
)

__all__ = [
    "DEFAULT_INVENTORY",
    "REST",
    "FrameTargets",
    "MusicScore",
    "ScoreEvent",
    "ScoreParseError",
    "midi_to_hz",
    "parse_score",
    "score_to_frame_targets",
    "serialize_score",
]
