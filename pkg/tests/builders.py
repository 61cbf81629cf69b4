"""Helpers that build small models and random (model, reference set) cases for the tests."""

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from rules.schema import ClassLabel, Dataset, IntervalConstraint, LabelVector, RuleModel, Term
from services.inference import term_accuracy
from services.induction import majority_class


def box(class_label: ClassLabel, term_id: int, *bounds: Tuple[int, float, float]) -> Term:
    return Term(
        constraints=[IntervalConstraint(dim=d, lo=lo, hi=hi) for d, lo, hi in bounds],
        class_label=class_label,
        term_id=term_id,
    )


def model_of(
    terms: Sequence[Term],
    accuracies: Optional[Dict[int, float]] = None,
    classes: Optional[List[ClassLabel]] = None,
    default_class: Optional[ClassLabel] = None,
) -> RuleModel:
    if classes is None:
        classes = sorted({t.class_label for t in terms}) or [0]
    if accuracies is None:
        accuracies = {t.term_id: 1.0 for t in terms}
    return RuleModel(
        classes=classes,
        terms=list(terms),
        default_class=classes[0] if default_class is None else default_class,
        accuracies=accuracies,
    )


def column(*values: float) -> Dataset:
    return Dataset.from_array(np.array(values, dtype=float).reshape(-1, 1))


def labels(*values: ClassLabel) -> LabelVector:
    return LabelVector(tuple(values))


def random_case(rng: np.random.Generator) -> Tuple[RuleModel, Dataset, LabelVector, Dataset]:
    """Random rule model with accuracies frozen on a random reference set, plus a held-out set."""
    d = int(rng.integers(1, 5))
    n = int(rng.integers(20, 61))
    n_classes = int(rng.integers(2, 4))
    X = Dataset.from_array(rng.uniform(0, 10, size=(n, d)))
    Y = LabelVector(tuple(int(v) for v in rng.integers(0, n_classes, size=n)))
    X_prime = Dataset.from_array(rng.uniform(0, 10, size=(int(rng.integers(10, 41)), d)))

    terms: List[Term] = []
    for term_id in range(int(rng.integers(1, 13))):
        dims = rng.choice(d, size=int(rng.integers(1, d + 1)), replace=False)
        bounds = []
        for dim in sorted(int(v) for v in dims):
            lo, hi = sorted(rng.choice(X.features[:, dim], size=2))
            bounds.append((dim, float(lo), float(hi)))
        terms.append(box(int(rng.integers(0, n_classes)), term_id, *bounds))

    classes = sorted(set(Y.classes) | {t.class_label for t in terms})
    model = RuleModel(
        classes=classes,
        terms=terms,
        default_class=majority_class(Y),
        accuracies={t.term_id: term_accuracy(t, X, Y) for t in terms},
    )
    return model, X, Y, X_prime
