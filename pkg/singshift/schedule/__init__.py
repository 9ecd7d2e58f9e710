from singshift.schedule.mixing_schedule import (
    JT_FT,
    JT_SCRATCH,
    MIXED,
    TWO_STAGE,
    MixWeight,
    Pattern,
    ScheduleConfig,
    ScheduleError,
    classify_schedule,
    evaluate_schedule,
    schedule_curve,
)

__all__ = [
    "JT_FT",
    "JT_SCRATCH",
    "MIXED",
    "TWO_STAGE",
    "MixWeight",
    "Pattern",
    "ScheduleConfig",
    "ScheduleError",
    "classify_schedule",
    "evaluate_schedule",
    "schedule_curve",
]
