from typing import Dict, List, Set, Tuple

import numpy as np
from pydantic import BaseModel, Field

from rules.errors import ConfigError, InputError, InternalError
from rules.schema import ClassLabel, Dataset, LabelVector, RuleModel, Term, term_applies


class WinTable(BaseModel):
    """How often each term is the tie-break winner on a reference set."""

    wins: Dict[int, int] = {}
    reference_size: int = Field(default=0, ge=0)

    @property
    def total(self) -> int:
        return sum(self.wins.values())

    @property
    def max_wins(self) -> int:
        return max(self.wins.values(), default=0)

    def zero_win_terms(self) -> List[int]:
        return sorted(t for t, w in self.wins.items() if w == 0)


def term_mask(t: Term, features: np.ndarray) -> np.ndarray:
    """Boolean vector: does ``t`` apply to each row of ``features``."""
    features = np.asarray(features, dtype=float)
    if features.ndim == 1:
        features = features.reshape(1, -1)
    mask = np.ones(features.shape[0], dtype=bool)
    for c in t.constraints:
        column = features[:, c.dim]
        mask &= (column >= c.lo) & (column <= c.hi)
    return mask


def applicability_matrix(E: RuleModel, X: Dataset) -> np.ndarray:
    """n x |E| boolean matrix; column j belongs to ``E.terms[j]``."""
    E.check_dimensions(X.n_features)
    app = np.zeros((X.n_samples, E.size), dtype=bool)
    for j, t in enumerate(E.terms):
        app[:, j] = term_mask(t, X.features)
    return app


def _check_sample(E: RuleModel, x) -> np.ndarray:
    row = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(row)):
        raise InputError("Sample contains non-finite values")
    E.check_dimensions(row.shape[0])
    return row


def applicable_terms(E: RuleModel, x) -> Set[int]:
    """App(x): ids of the terms whose constraints all hold for ``x``."""
    row = _check_sample(E, x)
    return {t.term_id for t in E.terms if term_applies(t, row)}


def term_accuracy(t: Term, X: Dataset, Y: LabelVector) -> float:
    """Fraction of the samples covered by ``t`` labelled c(t); 0 when ``t`` covers nothing."""
    Y.check_paired(X)
    fires = term_mask(t, X.features)
    n = int(fires.sum())
    if n == 0:
        return 0.0
    return float((Y.array[fires] == t.class_label).sum() / n)


def predict(E: RuleModel, x) -> ClassLabel:
    """Class of the most accurate applicable term (lowest id on ties), else the default class."""
    app = applicable_terms(E, x)
    if not app:
        return E.default_class
    winner = min(app, key=lambda tid: (-E.accuracies[tid], tid))
    return next(t.class_label for t in E.terms if t.term_id == winner)


def select_winners(E: RuleModel, X: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """Position in ``E.terms`` of each sample's winning term, and the nonempty-App mask.

    Terms are stored in ascending id order, so argmax's first-maximum rule is
    the lowest-id tie-break.
    """
    app = applicability_matrix(E, X)
    covered = app.any(axis=1)
    if E.size == 0:
        return np.zeros(X.n_samples, dtype=int), covered
    scores = np.where(app, E.accuracy_array()[None, :], -np.inf)
    return np.argmax(scores, axis=1), covered


def predict_many(E: RuleModel, X: Dataset) -> LabelVector:
    winners, covered = select_winners(E, X)
    labels = [E.terms[w].class_label if hit else E.default_class for w, hit in zip(winners, covered)]
    return LabelVector(tuple(labels))


def coverage(E: RuleModel, X: Dataset) -> float:
    if X.n_samples == 0:
        raise ConfigError("Coverage is undefined on an empty sample set")
    return float(applicability_matrix(E, X).any(axis=1).mean())


def ambiguous_mask(E: RuleModel, X: Dataset) -> np.ndarray:
    """Samples whose applicable terms span more than one class."""
    app = applicability_matrix(E, X)
    classes_hit = np.zeros(X.n_samples, dtype=int)
    labels = [t.class_label for t in E.terms]
    for c in E.classes:
        cols = [j for j, label in enumerate(labels) if label == c]
        if cols:
            classes_hit += app[:, cols].any(axis=1)
    return classes_hit > 1


def ambiguity(E: RuleModel, X: Dataset) -> float:
    """Amb(E; X): fraction of samples that are inter-class ambiguous."""
    if X.n_samples == 0:
        raise ConfigError("Ambiguity is undefined on an empty sample set")
    return float(ambiguous_mask(E, X).mean())


def win_counts(E: RuleModel, X: Dataset, Y: LabelVector) -> WinTable:
    """Count, per term, the samples where it is the tie-break-selected predictor.

    ``Y`` is not used for counting; it is accepted so the reference set is
    always passed as a labelled pair.
    """
    Y.check_paired(X)
    winners, covered = select_winners(E, X)
    counts = np.bincount(winners[covered], minlength=E.size) if E.size else np.zeros(0, dtype=int)
    table = WinTable(
        wins={t.term_id: int(counts[j]) for j, t in enumerate(E.terms)},
        reference_size=X.n_samples,
    )
    if table.total != int(covered.sum()):
        raise InternalError(f"Win total {table.total} differs from the {int(covered.sum())} covered samples")
    return table
