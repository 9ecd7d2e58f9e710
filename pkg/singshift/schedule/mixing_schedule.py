# ==============================================================================
# mixing_schedule.py
# ------------------------------------------------------------------------------
# Weight p(t) on predicted acoustic features during vocoder training.
#
#   p(t) = 0                      t <  T_start
#   p(t) = K · s(u)               T_start <= t < T_end,  u = (t - T_start)/(T_end - T_start)
#   p(t) = K                      t >= T_end
#
# s is the growth shape: linear s(u) = u, or the logistic curve rescaled so that
# s(0) = 0 and s(1) = 1. Step schedules have T_end == T_start (empty interior).
# ==============================================================================

from __future__ import annotations

import operator
from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import numpy as np


class ScheduleError(ValueError):
    """Invalid schedule configuration or epoch."""


class Pattern(str, Enum):
    TWO_STAGE = "two_stage"
    JT_SCRATCH = "jt_scratch"
    STEP = "step"
    LINEAR = "linear"
    LOGISTIC = "logistic"


# regime names, as reported by classify_schedule
TWO_STAGE = "two-stage"
JT_SCRATCH = "jt-scratch"
JT_FT = "jt-ft"
MIXED = "mixed"


@dataclass(frozen=True)
class ScheduleConfig:
    pattern: str = Pattern.STEP.value
    K: float = 1.0
    r: float = 10.0
    T_start: int = 15
    T_end: int = 15
    T_max: int = 60

    def __post_init__(self) -> None:
        validate_schedule(self)


@dataclass(frozen=True)
class MixWeight:
    """Coefficient of the predicted-feature terms; 1 - p weighs the ground-truth terms."""

    p: float
    epoch: int


# ------------------------------------------------------------------------------
# Validation
# ------------------------------------------------------------------------------


def validate_schedule(cfg: ScheduleConfig) -> None:
    try:
        pattern = Pattern(cfg.pattern)
    except ValueError as exc:
        raise ScheduleError(f"unknown schedule pattern `{cfg.pattern}`") from exc

    if not 0.0 <= cfg.K <= 1.0:
        raise ScheduleError(f"K must lie in [0, 1], got {cfg.K}")
    if cfg.T_max <= 0:
        raise ScheduleError(f"T_max must be positive, got {cfg.T_max}")
    if not 0 <= cfg.T_start <= cfg.T_end <= cfg.T_max:
        raise ScheduleError(
            f"need 0 <= T_start <= T_end <= T_max, got "
            f"{cfg.T_start}, {cfg.T_end}, {cfg.T_max}"
        )

    if pattern is Pattern.STEP and cfg.T_end != cfg.T_start:
        raise ScheduleError("step schedules switch instantly: T_end must equal T_start")
    if pattern is Pattern.TWO_STAGE and cfg.K != 0.0:
        raise ScheduleError("two_stage schedules require K = 0")
    if pattern is Pattern.JT_SCRATCH and (cfg.K != 1.0 or cfg.T_start != 0 or cfg.T_end != 0):
        raise ScheduleError("jt_scratch schedules require K = 1 and T_start = T_end = 0")
    if pattern is Pattern.LOGISTIC and cfg.r <= 0:
        raise ScheduleError(f"logistic growth needs r > 0, got {cfg.r}")


# ------------------------------------------------------------------------------
# Shapes
# ------------------------------------------------------------------------------


def _logistic_shape(u: float, r: float) -> float:
    def g(v: float) -> float:
        return 1.0 / (1.0 + np.exp(-r * (v - 0.5)))

    g0, g1 = g(0.0), g(1.0)
    return float((g(u) - g0) / (g1 - g0))


def _weight_at(cfg: ScheduleConfig, t: float) -> float:
    """p at a (possibly fractional) time t; the caller validates t."""
    if cfg.pattern == Pattern.TWO_STAGE.value:
        return 0.0
    if t < cfg.T_start:
        return 0.0
    if t >= cfg.T_end:
        return float(cfg.K)

    u = (t - cfg.T_start) / (cfg.T_end - cfg.T_start)
    if cfg.pattern == Pattern.LINEAR.value:
        shape = u
    else:
        shape = _logistic_shape(u, cfg.r)
    return float(cfg.K * shape)


# ------------------------------------------------------------------------------
# Public API
# ------------------------------------------------------------------------------


def evaluate_schedule(cfg: ScheduleConfig, t: int) -> MixWeight:
    """
    Mixing weight for training epoch `t`.

    Raises
    ------
    ScheduleError
        If `t` is not an integer epoch in [0, T_max).
    """
    try:
        epoch = operator.index(t)
    except TypeError as exc:
        raise ScheduleError(f"epoch must be an integer, got {t!r}") from exc

    if not 0 <= epoch < cfg.T_max:
        raise ScheduleError(f"epoch {epoch} outside [0, {cfg.T_max})")

    return MixWeight(p=_weight_at(cfg, epoch), epoch=epoch)


def classify_schedule(cfg: ScheduleConfig) -> str:
    """Name the training regime a schedule degenerates into."""
    if cfg.K == 0.0 or cfg.pattern == Pattern.TWO_STAGE.value:
        return TWO_STAGE
    if cfg.pattern == Pattern.JT_SCRATCH.value:
        return JT_SCRATCH
    if cfg.pattern == Pattern.STEP.value and cfg.K == 1.0:
        if cfg.T_start == 0:
            return JT_SCRATCH
        if cfg.T_start >= cfg.T_max:
            return TWO_STAGE  # never switches
        return JT_FT
    return MIXED


def schedule_curve(cfg: ScheduleConfig, resolution: int) -> List[Tuple[float, float]]:
    """Sample p over [0, T_max) at `resolution` evenly spaced times."""
    if resolution < 2:
        raise ScheduleError(f"resolution must be >= 2, got {resolution}")

    times = np.linspace(0.0, float(cfg.T_max), num=resolution, endpoint=False)
    return [(float(t), _weight_at(cfg, float(t))) for t in times]


# ------------------------------------------------------------------------------
# Constructors for the named regimes
# ------------------------------------------------------------------------------


def two_stage(T_max: int) -> ScheduleConfig:
    return ScheduleConfig(Pattern.TWO_STAGE.value, 0.0, 10.0, 0, 0, T_max)


def jt_scratch(T_max: int) -> ScheduleConfig:
    return ScheduleConfig(Pattern.JT_SCRATCH.value, 1.0, 10.0, 0, 0, T_max)


def jt_ft(T_start: int, T_max: int) -> ScheduleConfig:
    return ScheduleConfig(Pattern.STEP.value, 1.0, 10.0, T_start, T_start, T_max)


def linear(K: float, T_start: int, T_end: int, T_max: int) -> ScheduleConfig:
    return ScheduleConfig(Pattern.LINEAR.value, K, 10.0, T_start, T_end, T_max)


def logistic(K: float, r: float, T_start: int, T_end: int, T_max: int) -> ScheduleConfig:
    return ScheduleConfig(Pattern.LOGISTIC.value, K, r, T_start, T_end, T_max)
