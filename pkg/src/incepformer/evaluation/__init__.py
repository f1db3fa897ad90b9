"""Training loop, leave-one-block-out protocol, metrics and reports."""

from .metrics import AccuracyResult, accuracy_from_predictions, confusion_matrix, itr
from .protocol import (
    EvalReport,
    Fold,
    FoldPlan,
    FoldResult,
    evaluate_accuracy,
    evaluate_model_report,
    fingerprint,
    fit_model_config,
    lobo_split,
    run_baseline,
    run_fold,
    run_subject,
)
from .reporting import (
    ablation_sweep,
    export_features,
    read_report,
    report_json,
    write_ablation_csv,
    write_features_csv,
    write_report,
)
from .training import TrainResult, TrainSchedule, batch_loss, stratified_split, train_run

__all__ = [
    "AccuracyResult",
    "EvalReport",
    "Fold",
    "FoldPlan",
    "FoldResult",
    "TrainResult",
    "TrainSchedule",
    "ablation_sweep",
    "accuracy_from_predictions",
    "batch_loss",
    "confusion_matrix",
    "evaluate_accuracy",
    "evaluate_model_report",
    "export_features",
    "fingerprint",
    "fit_model_config",
    "itr",
    "lobo_split",
    "read_report",
    "report_json",
    "run_baseline",
    "run_fold",
    "run_subject",
    "stratified_split",
    "train_run",
    "write_ablation_csv",
    "write_features_csv",
    "write_report",
]
