import logging
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field

from rules.schema import Dataset, LabelVector, PruneConfig, PruningRecord, RuleModel
from services.inference import WinTable, predict_many, win_counts

logger = logging.getLogger(__name__)


class PruneStep(BaseModel):
    k: int
    removed_term_ids: List[int] = []
    accuracy_after: float = Field(ge=0.0, le=1.0)
    accepted: bool = False


class PruneTrace(BaseModel):
    """Audit trail of the pruning loop: one step per value of k that was tried."""

    steps: List[PruneStep] = []
    final_k: int = 0
    baseline_accuracy: float = 0.0
    threshold: float = 0.0
    wins: WinTable = WinTable()


def model_accuracy(E: RuleModel, X: Dataset, Y: LabelVector) -> float:
    """Fraction of X where predict(E, x) equals the reference label."""
    Y.check_paired(X)
    pred = predict_many(E, X)
    return float((pred.array == Y.array).mean())


def threshold_prune(
    E: RuleModel,
    X: Dataset,
    Y: LabelVector,
    cfg: Optional[PruneConfig] = None,
) -> Tuple[RuleModel, PruneTrace]:
    """Remove low-win terms while reference accuracy stays >= (1 - theta) * baseline.

    Wins and term accuracies come from the original model and are never
    recomputed. At step k every surviving term with Wins <= k is removed at
    once. The loop stops at the first candidate that is rejected, or once k
    exceeds max(Wins); the last accepted model is returned.

    With theta = 0 a candidate is accepted only when its predictions on X
    equal the original model's on every sample, so safe pruning never changes
    a reference prediction even where a swap of winners would keep accuracy.
    """
    cfg = cfg or PruneConfig()
    Y.check_paired(X)
    E.check_dimensions(X.n_features)

    wins = win_counts(E, X, Y)
    original = predict_many(E, X)
    baseline = float((original.array == Y.array).mean())
    threshold = (1.0 - cfg.theta) * baseline
    trace = PruneTrace(baseline_accuracy=baseline, threshold=threshold, wins=wins)

    current = E
    current_accuracy = baseline
    for k in range(wins.max_wins + 1):
        removed = [tid for tid in current.term_ids if wins.wins[tid] <= k]
        if not removed:
            trace.steps.append(PruneStep(k=k, accuracy_after=current_accuracy, accepted=True))
            continue
        candidate = current.without(removed)
        pred = predict_many(candidate, X)
        accuracy = float((pred.array == Y.array).mean())
        if cfg.theta == 0.0:
            accepted = pred.labels == original.labels
        else:
            accepted = accuracy >= threshold
        trace.steps.append(PruneStep(k=k, removed_term_ids=removed, accuracy_after=accuracy, accepted=accepted))
        logger.debug("k=%d: removing %d terms -> accuracy %.6f (%s)", k, len(removed), accuracy, "kept" if accepted else "rejected")
        if not accepted:
            break
        current, current_accuracy = candidate, accuracy

    accepted_steps = [s for s in trace.steps if s.accepted]
    trace.final_k = accepted_steps[-1].k if accepted_steps else -1

    provenance = current.provenance.model_copy(deep=True)
    provenance.pruning.append(
        PruningRecord(
            theta=cfg.theta,
            baseline_accuracy=baseline,
            final_accuracy=current_accuracy,
            original_size=E.size,
            final_k=trace.final_k,
        )
    )
    pruned = current.model_copy(update={"provenance": provenance})
    logger.info("Pruned %d -> %d terms (theta=%g, accuracy %.4f -> %.4f)", E.size, pruned.size, cfg.theta, baseline, current_accuracy)
    return pruned, trace
