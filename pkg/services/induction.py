import hashlib
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from rules import bitset
from rules.errors import InternalError
from rules.schema import (
    AttributionMatrix,
    ClassDiagnostics,
    ClassLabel,
    Dataset,
    ExtractionConfig,
    IntervalConstraint,
    LabelVector,
    Provenance,
    RuleModel,
    Term,
)
from services.inference import term_accuracy, term_mask
from services.mining import Itemset, binarize_matrix, mine_closed_frequent

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CandidateTerm:
    term: Term
    # bitset over the positions of X_c
    coverage: int
    precision: float
    # position in the class's candidate list, used for deterministic tie-breaks
    order: int = 0

    @property
    def covered(self) -> int:
        return bitset.count(self.coverage)


@dataclass
class ClassRules:
    class_label: ClassLabel
    terms: List[Term] = field(default_factory=list)
    diagnostics: Optional[ClassDiagnostics] = None


def build_term(itemset: Itemset, class_label: ClassLabel, supporting_rows: np.ndarray, term_id: int = 0) -> Term:
    """Box spanning the supporting rows on every dimension of the itemset."""
    rows = np.asarray(supporting_rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(1, -1)
    if rows.shape[0] == 0:
        raise InternalError(f"Itemset {itemset.items} of class {class_label!r} has no supporting rows")
    constraints = [
        IntervalConstraint(dim=dim, lo=float(rows[:, dim].min()), hi=float(rows[:, dim].max()))
        for dim in itemset.items
    ]
    return Term(constraints=constraints, class_label=class_label, term_id=term_id)


def build_candidates(
    itemsets: Sequence[Itemset],
    class_label: ClassLabel,
    X: Dataset,
    Yhat: LabelVector,
    class_rows: np.ndarray,
    transaction_rows: np.ndarray,
) -> List[CandidateTerm]:
    """Turn mined itemsets into candidate terms with coverage over X_c and precision over X.

    ``class_rows`` are the indices of X_c in X; ``transaction_rows`` maps each
    mined (nonempty) transaction back to its index in X.
    """
    in_class = Yhat.array == class_label
    candidates: List[CandidateTerm] = []
    for order, itemset in enumerate(itemsets):
        support_rows = transaction_rows[bitset.bits_to_nums(itemset.tids)]
        term = build_term(itemset, class_label, X.features[support_rows], term_id=order)
        fires = term_mask(term, X.features)
        n_fires = int(fires.sum())
        precision = float((fires & in_class).sum() / n_fires) if n_fires else 0.0
        coverage = bitset.mask_to_bits(fires[class_rows])
        candidates.append(CandidateTerm(term=term, coverage=coverage, precision=precision, order=order))
    return candidates


def greedy_cover(candidates: Sequence[CandidateTerm], class_size: int, config: ExtractionConfig) -> List[Term]:
    """Greedy set cover over X_c.

    Each round picks the eligible candidate (precision >= min_precision) adding
    the most uncovered samples; ties go to higher precision, then lower order.
    Stops once the covered fraction reaches ``cover_target`` or no candidate
    adds a new sample.
    """
    if class_size <= 0 or not candidates:
        return []
    pool = [c for c in candidates if c.precision >= config.min_precision]
    covered = 0
    selected: List[Term] = []
    while bitset.count(covered) / class_size < config.cover_target:
        best: Optional[CandidateTerm] = None
        best_key: Tuple[int, float, int] = (0, 0.0, 0)
        for candidate in pool:
            gain = bitset.count(candidate.coverage & ~covered)
            if gain < 1:
                continue
            key = (gain, candidate.precision, -candidate.order)
            if best is None or key > best_key:
                best, best_key = candidate, key
        if best is None:
            break
        covered |= best.coverage
        selected.append(best.term)
        pool = [c for c in pool if c is not best]
    return selected


def _extract_class(
    class_label: ClassLabel,
    X: Dataset,
    Yhat: LabelVector,
    attr: AttributionMatrix,
    config: ExtractionConfig,
) -> ClassRules:
    class_rows = np.flatnonzero(Yhat.array == class_label)
    diagnostics = ClassDiagnostics(class_label=class_label, samples=int(class_rows.size))
    result = ClassRules(class_label=class_label, diagnostics=diagnostics)

    transactions = binarize_matrix(attr.scores[class_rows], config.policy)
    nonempty = np.array([bool(t.items) for t in transactions], dtype=bool)
    diagnostics.transactions = int(nonempty.sum())
    diagnostics.empty_transactions = int((~nonempty).sum())
    if diagnostics.empty_transactions:
        logger.info("Class %r: ignoring %d empty transactions", class_label, diagnostics.empty_transactions)

    if diagnostics.transactions == 0:
        diagnostics.warnings.append("no nonempty transactions; class has no candidate terms")
        return result

    diagnostics.min_support = config.min_support_for(diagnostics.transactions)
    itemsets = mine_closed_frequent(transactions, diagnostics.min_support)
    diagnostics.itemsets = len(itemsets)
    transaction_rows = class_rows[nonempty]
    candidates = build_candidates(itemsets, class_label, X, Yhat, class_rows, transaction_rows)
    diagnostics.candidates = len(candidates)
    if not candidates:
        diagnostics.warnings.append(f"no itemset reached min_support={diagnostics.min_support}")
        return result

    result.terms = greedy_cover(candidates, int(class_rows.size), config)
    diagnostics.selected = len(result.terms)
    if result.terms:
        covered = np.zeros(class_rows.size, dtype=bool)
        for term in result.terms:
            covered |= term_mask(term, X.features[class_rows])
        diagnostics.covered = int(covered.sum())
    else:
        diagnostics.warnings.append(f"no candidate reached min_precision={config.min_precision}")
    logger.debug(
        "Class %r: %d transactions, %d itemsets, %d candidates, %d terms selected",
        class_label, diagnostics.transactions, diagnostics.itemsets, diagnostics.candidates, diagnostics.selected,
    )
    return result


def config_hash(config: ExtractionConfig) -> str:
    return hashlib.sha256(config.model_dump_json().encode("utf-8")).hexdigest()


def majority_class(labels: LabelVector) -> ClassLabel:
    """Most frequent label; ties go to the lowest class."""
    counts: Dict[ClassLabel, int] = {}
    for label in labels.labels:
        counts[label] = counts.get(label, 0) + 1
    return max(labels.classes, key=lambda c: (counts[c], -labels.classes.index(c)))


def extract_rule_model(
    X: Dataset,
    Yhat: LabelVector,
    attr: AttributionMatrix,
    config: Optional[ExtractionConfig] = None,
    sources: Optional[Dict[str, str]] = None,
) -> RuleModel:
    """Run the per-class pipeline (binarize, mine, build, cover) and assemble the global model.

    Term ids are assigned in ascending class order, then selection order within
    each class. Accuracies are computed on (X, Yhat) and frozen into the model.
    """
    config = config or ExtractionConfig()
    Yhat.check_paired(X, "predictions")
    attr.check_paired(X)
    classes = Yhat.classes

    if config.max_workers > 1 and len(classes) > 1:
        with ThreadPoolExecutor(max_workers=config.max_workers) as pool:
            per_class = list(pool.map(lambda c: _extract_class(c, X, Yhat, attr, config), classes))
    else:
        per_class = [_extract_class(c, X, Yhat, attr, config) for c in classes]

    terms: List[Term] = []
    diagnostics: List[ClassDiagnostics] = []
    for rules in per_class:
        for term in rules.terms:
            terms.append(term.with_id(len(terms)))
        if rules.diagnostics is not None:
            diagnostics.append(rules.diagnostics)
            if not rules.terms:
                warnings.warn(f"Class {rules.class_label!r} has an empty DNF: " + "; ".join(rules.diagnostics.warnings))

    accuracies = {t.term_id: term_accuracy(t, X, Yhat) for t in terms}

    model = RuleModel(
        classes=classes,
        terms=terms,
        default_class=majority_class(Yhat),
        accuracies=accuracies,
        provenance=Provenance(
            config_hash=config_hash(config),
            sources=dict(sources or {}),
            class_diagnostics=diagnostics,
        ),
    )
    logger.info("Extracted %d terms over %d classes", model.size, len(classes))
    return model
