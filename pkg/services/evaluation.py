import logging
import warnings
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics import f1_score

from rules.errors import ConfigError, InputError
from rules.schema import (
    Averaging,
    ChangeRecord,
    ClassLabel,
    Dataset,
    EvalOptions,
    EvalReport,
    F1Target,
    LabelVector,
    RuleModel,
    sorted_classes,
)
from services.inference import applicability_matrix, ambiguous_mask, predict_many

logger = logging.getLogger(__name__)

CHANGE_METRICS = ("f1", "f1_reference", "size", "ambiguity")


def per_class_f1(pred: LabelVector, truth: LabelVector, classes: Sequence[ClassLabel]) -> Dict[ClassLabel, float]:
    if len(pred) != len(truth):
        raise InputError(f"Predictions ({len(pred)}) and labels ({len(truth)}) differ in length")
    classes = list(classes)
    if not classes:
        return {}
    seen = set(pred.labels) | set(truth.labels)
    for c in classes:
        if c not in seen:
            warnings.warn(f"Class {c!r} is absent from both predictions and labels; its F1 counts as 0")
    scores = f1_score(truth.array, pred.array, labels=classes, average=None, zero_division=0)
    return {c: float(s) for c, s in zip(classes, scores)}


def average_f1(
    scores: Dict[ClassLabel, float],
    truth: LabelVector,
    average: Averaging = Averaging.MACRO,
) -> float:
    """Unweighted mean of per-class scores (or support-weighted with ``Averaging.WEIGHTED``)."""
    if not scores:
        raise ConfigError("F1 needs at least one class")
    classes = list(scores)
    values = [scores[c] for c in classes]
    if average == Averaging.WEIGHTED:
        support = np.array([(truth.array == c).sum() for c in classes], dtype=float)
        if support.sum() == 0:
            return 0.0
        return float(np.average(values, weights=support))
    return float(np.mean(values))


def macro_f1(
    pred: LabelVector,
    truth: LabelVector,
    classes: Sequence[ClassLabel],
    average: Averaging = Averaging.MACRO,
) -> float:
    return average_f1(per_class_f1(pred, truth, classes), truth, average)


def evaluate(
    E: RuleModel,
    X_test: Dataset,
    Yhat_test: LabelVector,
    *,
    options: Optional[EvalOptions] = None,
    Y_true: Optional[LabelVector] = None,
    reference: Optional[Tuple[Dataset, LabelVector]] = None,
) -> EvalReport:
    """F1, size, ambiguity and coverage of ``E`` on a held-out set.

    ``Yhat_test`` are the black-box predictions (fidelity target). ``Y_true``
    adds a ground-truth F1 column; ``reference`` adds the F1 on the
    extraction/reference set.
    """
    options = options or EvalOptions()
    if X_test.n_samples == 0:
        raise ConfigError("Cannot evaluate on an empty test set")
    Yhat_test.check_paired(X_test, "test predictions")

    # labels the model never saw still count as classes with F1 = 0
    def classes_with(labels: LabelVector) -> List[ClassLabel]:
        return sorted_classes([*E.classes, *labels.classes])

    pred = predict_many(E, X_test)
    fidelity_scores = per_class_f1(pred, Yhat_test, classes_with(Yhat_test))
    f1_fidelity = average_f1(fidelity_scores, Yhat_test, options.average)

    f1_truth: Optional[float] = None
    if Y_true is not None:
        Y_true.check_paired(X_test, "ground-truth labels")
        f1_truth = macro_f1(pred, Y_true, classes_with(Y_true), options.average)

    f1_ref: Optional[float] = None
    if reference is not None:
        X_ref, Y_ref = reference
        Y_ref.check_paired(X_ref, "reference predictions")
        f1_ref = macro_f1(predict_many(E, X_ref), Y_ref, classes_with(Y_ref), options.average)

    if options.f1_target == F1Target.GROUND_TRUTH:
        if f1_truth is None:
            raise ConfigError("f1_target=ground_truth needs ground-truth labels")
        headline = f1_truth
    else:
        headline = f1_fidelity

    app = applicability_matrix(E, X_test)
    return EvalReport(
        f1_macro=headline,
        size=E.size,
        ambiguity=float(ambiguous_mask(E, X_test).mean()),
        coverage=float(app.any(axis=1).mean()),
        per_class_f1={str(c): s for c, s in fidelity_scores.items()},
        f1_ground_truth=f1_truth,
        f1_reference=f1_ref,
        n_samples=X_test.n_samples,
    )


def compare(before: EvalReport, after: EvalReport) -> List[ChangeRecord]:
    """Relative changes from ``before`` to ``after`` for F1, F1 on X (when both have it), Size and Amb."""
    if before.n_samples != after.n_samples:
        logger.warning("Comparing reports computed on %d and %d samples", before.n_samples, after.n_samples)
    records = [ChangeRecord.between("f1", before.f1_macro, after.f1_macro)]
    if before.f1_reference is not None and after.f1_reference is not None:
        records.append(ChangeRecord.between("f1_reference", before.f1_reference, after.f1_reference))
    records.append(ChangeRecord.between("size", before.size, after.size))
    records.append(ChangeRecord.between("ambiguity", before.ambiguity, after.ambiguity))
    return records


def summarize_changes(runs: Iterable[Sequence[ChangeRecord]]) -> pd.DataFrame:
    """Mean and std of relative changes per metric across runs.

    n/a entries (zero baselines) are skipped and counted in ``n_skipped``.
    """
    rows = [
        {"metric": r.metric, "rel_change_pct": r.rel_change_pct}
        for records in runs
        for r in records
    ]
    columns = ["metric", "mean_pct", "std_pct", "n", "n_skipped"]
    if not rows:
        return pd.DataFrame(columns=columns)
    frame = pd.DataFrame(rows)
    out = []
    for metric in [m for m in CHANGE_METRICS if m in set(frame["metric"])]:
        values = frame.loc[frame["metric"] == metric, "rel_change_pct"]
        valid = values.dropna().astype(float)
        out.append({
            "metric": metric,
            "mean_pct": float(valid.mean()) if len(valid) else float("nan"),
            "std_pct": float(valid.std(ddof=0)) if len(valid) else float("nan"),
            "n": int(len(valid)),
            "n_skipped": int(values.isna().sum()),
        })
    return pd.DataFrame(out, columns=columns)


def tradeoff_points(
    task: str,
    original: EvalReport,
    settings: Dict[str, EvalReport],
) -> List[Dict[str, object]]:
    """Rows for the F1 vs. relative Size/Amb trade-off plot, one per setting.

    The original model is its own row with zero relative change.
    """
    points: List[Dict[str, object]] = []
    for setting, report in [("original", original), *settings.items()]:
        size = ChangeRecord.between("size", original.size, report.size)
        amb = ChangeRecord.between("ambiguity", original.ambiguity, report.ambiguity)
        points.append({
            "task": task,
            "setting": setting,
            "f1_test": report.f1_macro,
            "size": report.size,
            "ambiguity": report.ambiguity,
            "size_rel_change_pct": size.rel_change_pct,
            "ambiguity_rel_change_pct": amb.rel_change_pct,
        })
    return points
