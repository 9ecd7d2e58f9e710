# ==============================================================================
# score_format.py  –  Line-oriented music score format
#
#   # comment
#   @tempo 120          (optional, first content line)
#   a 60 0.25           phoneme, MIDI pitch, duration in seconds
#   REST - 0.5          rest
#
# parse_score returns a MusicScore; serialize_score writes the normalized form.
# ==============================================================================

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

REST = "REST"
DEFAULT_INVENTORY: Tuple[str, ...] = ("a", "e", "i", "o", "u")


class ScoreParseError(ValueError):
    """Malformed score text; `line_no` is 1-based (0 for whole-file errors)."""

    def __init__(self, message: str, line_no: int = 0):
        self.line_no = line_no
        prefix = f"line {line_no}: " if line_no else ""
        super().__init__(f"{prefix}{message}")


@dataclass(frozen=True)
class ScoreEvent:
    phoneme: str
    midi_pitch: Optional[int]
    duration: float

    @property
    def is_rest(self) -> bool:
        return self.phoneme == REST


@dataclass(frozen=True)
class MusicScore:
    events: Tuple[ScoreEvent, ...]
    tempo: Optional[float] = None

    @property
    def total_duration(self) -> float:
        return math.fsum(ev.duration for ev in self.events)


# ------------------------------------------------------------------------------
# Parsing helpers
# ------------------------------------------------------------------------------


def _parse_duration(raw: str, line_no: int) -> float:
    try:
        value = float(raw)
    except ValueError as exc:
        raise ScoreParseError(f"bad duration `{raw}`", line_no) from exc
    if not math.isfinite(value) or value <= 0:
        raise ScoreParseError(f"duration must be positive, got `{raw}`", line_no)
    return value


def _parse_pitch(raw: str, line_no: int) -> int:
    try:
        value = int(raw)
    except ValueError as exc:
        raise ScoreParseError(f"bad MIDI pitch `{raw}`", line_no) from exc
    if not 0 <= value <= 127:
        raise ScoreParseError(f"MIDI pitch out of range: {value}", line_no)
    return value


def _parse_event(fields: List[str], inventory: Sequence[str], line_no: int) -> ScoreEvent:
    if len(fields) != 3:
        raise ScoreParseError(f"expected 3 fields, got {len(fields)}", line_no)

    phoneme, pitch, duration = fields
    if phoneme == REST:
        if pitch != "-":
            raise ScoreParseError("REST events take `-` as pitch", line_no)
        return ScoreEvent(REST, None, _parse_duration(duration, line_no))

    if phoneme not in inventory:
        raise ScoreParseError(f"unknown phoneme `{phoneme}`", line_no)
    return ScoreEvent(phoneme, _parse_pitch(pitch, line_no), _parse_duration(duration, line_no))


# ------------------------------------------------------------------------------
# Public API
# ------------------------------------------------------------------------------


def parse_score(
    data: Union[bytes, str], inventory: Sequence[str] = DEFAULT_INVENTORY
) -> MusicScore:
    """
    Parse score text into a MusicScore.

    Parameters
    ----------
    data : bytes | str
        UTF-8 score text.
    inventory : Sequence[str]
        Allowed phoneme symbols (REST is always allowed).

    Raises
    ------
    ScoreParseError
        With the offending line number.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            line_no = data.count(b"\n", 0, exc.start) + 1
            raise ScoreParseError(f"not UTF-8 at byte {exc.start}", line_no) from exc
    else:
        text = data

    events: List[ScoreEvent] = []
    tempo: Optional[float] = None

    for line_no, raw_line in enumerate(text.splitlines(), 1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue

        fields = line.split()
        if fields[0] == "@tempo":
            if events or tempo is not None or len(fields) != 2:
                raise ScoreParseError("`@tempo <bpm>` must be the first content line", line_no)
            tempo = _parse_duration(fields[1], line_no)
            continue

        events.append(_parse_event(fields, inventory, line_no))

    if not events:
        raise ScoreParseError("empty score")

    return MusicScore(tuple(events), tempo)


def serialize_score(score: MusicScore) -> str:
    """Normalized text: no comments, single spaces, shortest round-trip durations."""
    lines: List[str] = []
    if score.tempo is not None:
        lines.append(f"@tempo {score.tempo!r}")

    for ev in score.events:
        pitch = "-" if ev.is_rest else str(ev.midi_pitch)
        lines.append(f"{ev.phoneme} {pitch} {float(ev.duration)!r}")

    return "\n".join(lines) + "\n"


def make_score(events: Iterable[Tuple[str, Optional[int], float]]) -> MusicScore:
    """Build a score from (phoneme, pitch, duration) triples."""
    return MusicScore(tuple(ScoreEvent(ph, pitch, float(dur)) for ph, pitch, dur in events))
