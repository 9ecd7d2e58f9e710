from singshift.metrics.objective import (
    EvalReport,
    MetricError,
    corpus_means,
    evaluate_pair,
    f0_rmse,
    mcd,
    semitone_accuracy,
    vuv_error,
)

__all__ = [
    "EvalReport",
    "MetricError",
    "corpus_means",
    "evaluate_pair",
    "f0_rmse",
    "mcd",
    "semitone_accuracy",
    "vuv_error",
]
