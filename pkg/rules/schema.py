from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from rules.errors import ConfigError, InputError


SCHEMA_VERSION = 1

# Class identifiers come from CSV files or generated data: integers or strings, never mixed
ClassLabel = Union[int, str]


def to_native_label(value: Any) -> ClassLabel:
    """Turn numpy scalars and integral floats into plain int/str class labels."""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if value.is_integer():
            return int(value)
        raise InputError(f"Class label {value!r} is not an integer or a string")
    if isinstance(value, str):
        return value
    raise InputError(f"Unsupported class label type {type(value).__name__}: {value!r}")


def sorted_classes(labels: Iterable[ClassLabel]) -> List[ClassLabel]:
    """Unique labels in ascending order; mixed int/str label sets are rejected."""
    unique = set(labels)
    kinds = {type(label) for label in unique}
    if len(kinds) > 1:
        raise InputError("Class labels mix integers and strings: " + ", ".join(map(repr, sorted(unique, key=str))))
    return sorted(unique)  # type: ignore[type-var]


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


# Numeric containers. These hold numpy arrays, so they are frozen dataclasses
# validated in __post_init__ rather than pydantic models.
@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix X (n samples x d real features) with names and row ids."""

    features: np.ndarray
    feature_names: Tuple[str, ...]
    row_ids: Tuple[str, ...]

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        if features.ndim != 2:
            raise InputError(f"Features must be a 2-D matrix, got shape {features.shape}")
        n, d = features.shape
        names = tuple(str(name) for name in self.feature_names)
        if len(names) != d:
            raise InputError(f"Got {len(names)} feature names for {d} feature columns")
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise InputError("Duplicate feature names: " + ", ".join(duplicates))
        row_ids = tuple(str(r) for r in self.row_ids)
        if len(row_ids) != n:
            raise InputError(f"Got {len(row_ids)} row ids for {n} rows")
        bad = np.argwhere(~np.isfinite(features))
        if bad.size:
            row, col = (int(v) for v in bad[0])
            raise InputError(
                f"Non-finite value in row {row} ({row_ids[row]}), column {col} ({names[col]}); "
                f"{len(bad)} non-finite cells in total"
            )
        object.__setattr__(self, "features", _readonly(features))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "row_ids", row_ids)

    @classmethod
    def from_array(cls, features: Any, feature_names: Optional[Sequence[str]] = None) -> "Dataset":
        array = np.asarray(features, dtype=float)
        if array.ndim == 1:
            array = array.reshape(-1, 1)
        names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(array.shape[1])]
        return cls(array, tuple(names), tuple(str(i) for i in range(array.shape[0])))

    @property
    def n_samples(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    def take(self, index: Any) -> "Dataset":
        """Rows selected by an integer index array or boolean mask, names preserved."""
        idx = np.arange(self.n_samples)[index]
        return Dataset(self.features[idx], self.feature_names, tuple(self.row_ids[i] for i in idx))


@dataclass(frozen=True, eq=False)
class LabelVector:
    """Class labels (black-box predictions or ground truth), one per sample."""

    labels: Tuple[ClassLabel, ...]

    def __post_init__(self):
        labels = tuple(to_native_label(v) for v in self.labels)
        if not labels:
            raise InputError("Label vector is empty; the class set must be nonempty")
        sorted_classes(labels)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_values(cls, values: Iterable[Any]) -> "LabelVector":
        return cls(tuple(values))

    def __len__(self) -> int:
        return len(self.labels)

    @cached_property
    def array(self) -> np.ndarray:
        kind = int if isinstance(self.labels[0], int) else object
        return _readonly(np.array(self.labels, dtype=kind))

    @cached_property
    def classes(self) -> List[ClassLabel]:
        return sorted_classes(self.labels)

    def take(self, index: Any) -> "LabelVector":
        idx = np.arange(len(self.labels))[index]
        return LabelVector(tuple(self.labels[i] for i in idx))

    def check_paired(self, dataset: Dataset, what: str = "labels") -> None:
        if len(self.labels) != dataset.n_samples:
            raise InputError(f"{what} has {len(self.labels)} rows but the data has {dataset.n_samples}")


@dataclass(frozen=True, eq=False)
class AttributionMatrix:
    """Per-sample, per-feature importance scores from a local explainer."""

    scores: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        if scores.ndim != 2:
            raise InputError(f"Attributions must be a 2-D matrix, got shape {scores.shape}")
        bad = np.argwhere(~np.isfinite(scores))
        if bad.size:
            row, col = (int(v) for v in bad[0])
            raise InputError(f"Non-finite attribution in row {row}, column {col}")
        object.__setattr__(self, "scores", _readonly(scores))

    def check_paired(self, dataset: Dataset) -> None:
        if self.scores.shape != dataset.features.shape:
            raise InputError(
                f"Attribution matrix shape {self.scores.shape} does not match data shape {dataset.features.shape}"
            )


# Configuration enums
class BinarizationMode(str, Enum):
    TOP_K = "top_k"
    ABS_THRESHOLD = "abs_threshold"
    POSITIVE = "positive"


class F1Target(str, Enum):
    FIDELITY = "fidelity"
    GROUND_TRUTH = "ground_truth"


class Averaging(str, Enum):
    MACRO = "macro"
    WEIGHTED = "weighted"


class BinarizationPolicy(BaseModel):
    """How an attribution row becomes a transaction of important dimensions."""

    model_config = ConfigDict(frozen=True)

    mode: BinarizationMode = BinarizationMode.TOP_K
    k: int = Field(default=3, ge=1)
    tau: float = Field(default=0.0, ge=0.0)


class ExtractionConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    policy: BinarizationPolicy = BinarizationPolicy()
    min_support_fraction: float = Field(default=0.05, gt=0.0, le=1.0)
    min_support_floor: int = Field(default=2, ge=1)
    min_precision: float = Field(default=0.5, ge=0.0, le=1.0)
    cover_target: float = Field(default=1.0, gt=0.0, le=1.0)
    max_workers: int = Field(default=1, ge=1)

    def min_support_for(self, n_transactions: int) -> int:
        """Absolute support threshold for a class with ``n_transactions`` nonempty transactions."""
        return max(self.min_support_floor, int(np.floor(self.min_support_fraction * n_transactions)))


class PruneConfig(BaseModel):
    """ThresholdPruning tolerance. The accuracy comparison is always non-strict."""

    model_config = ConfigDict(frozen=True)

    theta: float = Field(default=0.0, ge=0.0, le=1.0)


class EvalOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    f1_target: F1Target = F1Target.FIDELITY
    average: Averaging = Averaging.MACRO


# Rule model
class IntervalConstraint(BaseModel):
    """Closed interval [lo, hi] on one feature."""

    model_config = ConfigDict(frozen=True)

    dim: int = Field(ge=0)
    lo: float
    hi: float

    @model_validator(mode="after")
    def _check_bounds(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ValueError(f"Interval bounds on dim {self.dim} must be finite")
        if self.lo > self.hi:
            raise ValueError(f"Interval on dim {self.dim} has lo={self.lo} > hi={self.hi}")
        return self

    def satisfied_by(self, value: float) -> bool:
        return self.lo <= value <= self.hi


class Term(BaseModel):
    """Conjunction of interval constraints predicting ``class_label``."""

    model_config = ConfigDict(frozen=True)

    constraints: List[IntervalConstraint] = Field(min_length=1)
    class_label: ClassLabel
    term_id: int = Field(ge=0)

    @field_validator("constraints")
    @classmethod
    def _distinct_dims(cls, v: List[IntervalConstraint]) -> List[IntervalConstraint]:
        dims = [c.dim for c in v]
        if len(set(dims)) != len(dims):
            raise ValueError(f"Term constraints repeat a dimension: {dims}")
        return v

    @property
    def dims(self) -> List[int]:
        return [c.dim for c in self.constraints]

    def max_dim(self) -> int:
        return max(self.dims)

    def with_id(self, term_id: int) -> "Term":
        return self.model_copy(update={"term_id": term_id})

    def describe(self, feature_names: Optional[Sequence[str]] = None) -> str:
        def name(dim: int) -> str:
            if feature_names is not None and dim < len(feature_names):
                return feature_names[dim]
            return f"x{dim}"

        premise = " AND ".join(
            f"{c.lo:g} <= {name(c.dim)} <= {c.hi:g}" for c in sorted(self.constraints, key=lambda c: c.dim)
        )
        return f"IF {premise} THEN {self.class_label}"


def term_applies(t: Term, x: Any) -> bool:
    """True iff every constraint of ``t`` holds for sample ``x`` (bounds inclusive)."""
    row = np.asarray(x, dtype=float).ravel()
    if t.max_dim() >= row.shape[0]:
        raise InputError(f"Term {t.term_id} constrains dim {t.max_dim()} but the sample has {row.shape[0]} features")
    return all(c.lo <= row[c.dim] <= c.hi for c in t.constraints)


class ClassDiagnostics(BaseModel):
    class_label: ClassLabel
    samples: int = 0
    transactions: int = 0
    empty_transactions: int = 0
    min_support: int = 0
    itemsets: int = 0
    candidates: int = 0
    selected: int = 0
    covered: int = 0
    warnings: List[str] = []


class PruningRecord(BaseModel):
    theta: float
    baseline_accuracy: float
    final_accuracy: float
    original_size: int
    final_k: int


class Provenance(BaseModel):
    config_hash: Optional[str] = None
    sources: Dict[str, str] = {}
    class_diagnostics: List[ClassDiagnostics] = []
    pruning: List[PruningRecord] = []
    notes: List[str] = []


class RuleModel(BaseModel):
    """Global rule model E: the union of the per-class DNFs, with frozen term accuracies."""

    model_config = ConfigDict(frozen=True)

    classes: List[ClassLabel] = Field(min_length=1)
    terms: List[Term] = []
    default_class: ClassLabel
    accuracies: Dict[int, float] = {}
    provenance: Provenance = Provenance()

    @field_validator("classes")
    @classmethod
    def _classes_sorted_unique(cls, v: List[ClassLabel]) -> List[ClassLabel]:
        if v != sorted_classes(v) or len(set(v)) != len(v):
            raise ValueError("classes must be unique and in ascending order")
        return v

    @model_validator(mode="after")
    def _check_consistency(self):
        ids = [t.term_id for t in self.terms]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise ValueError("term ids must be unique and ascending")
        if self.default_class not in self.classes:
            raise ValueError(f"default_class {self.default_class!r} is not one of {self.classes}")
        foreign = [t.term_id for t in self.terms if t.class_label not in self.classes]
        if foreign:
            raise ValueError(f"Terms {foreign} predict classes outside {self.classes}")
        if set(self.accuracies) != set(ids):
            raise ValueError("accuracies must cover exactly the term ids present")
        out_of_range = {k: v for k, v in self.accuracies.items() if not 0.0 <= v <= 1.0}
        if out_of_range:
            raise ValueError(f"accuracies outside [0, 1]: {out_of_range}")
        return self

    @property
    def size(self) -> int:
        return len(self.terms)

    @property
    def term_ids(self) -> List[int]:
        return [t.term_id for t in self.terms]

    def terms_for(self, class_label: ClassLabel) -> List[Term]:
        return [t for t in self.terms if t.class_label == class_label]

    def accuracy_array(self) -> np.ndarray:
        return np.array([self.accuracies[t.term_id] for t in self.terms], dtype=float)

    def without(self, term_ids: Iterable[int]) -> "RuleModel":
        """Copy without the given terms; ids, accuracies and default_class of the rest are kept."""
        drop = set(term_ids)
        kept = [t for t in self.terms if t.term_id not in drop]
        return RuleModel(
            classes=list(self.classes),
            terms=kept,
            default_class=self.default_class,
            accuracies={t.term_id: self.accuracies[t.term_id] for t in kept},
            provenance=self.provenance,
        )

    def check_dimensions(self, d: int) -> None:
        too_wide = [t.term_id for t in self.terms if t.max_dim() >= d]
        if too_wide:
            raise InputError(f"Terms {too_wide} constrain features beyond the {d} columns of the data")


# Evaluation records
class EvalReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    f1_macro: float = Field(ge=0.0, le=1.0)
    size: int = Field(ge=0)
    ambiguity: float = Field(ge=0.0, le=1.0)
    coverage: float = Field(ge=0.0, le=1.0)
    per_class_f1: Dict[str, float] = {}
    f1_ground_truth: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    f1_reference: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    n_samples: int = Field(default=0, ge=0)


class ChangeRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    metric: str
    before: float
    after: float
    rel_change_pct: Optional[float] = None

    @model_validator(mode="after")
    def _check_rel_change(self):
        if self.before == 0:
            if self.rel_change_pct is not None:
                raise ValueError(f"{self.metric}: relative change is undefined for a zero baseline")
            return self
        expected = 100.0 * (self.after - self.before) / self.before
        if self.rel_change_pct is None or abs(self.rel_change_pct - expected) > 1e-9:
            raise ValueError(f"{self.metric}: rel_change_pct {self.rel_change_pct} != {expected}")
        return self

    @classmethod
    def between(cls, metric: str, before: float, after: float) -> "ChangeRecord":
        rel = None if before == 0 else 100.0 * (after - before) / before
        return cls(metric=metric, before=float(before), after=float(after), rel_change_pct=rel)


def check_theta(theta: float) -> float:
    if not 0.0 <= theta <= 1.0:
        raise ConfigError(f"theta must lie in [0, 1], got {theta}")
    return theta
