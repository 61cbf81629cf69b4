"""CSV ingestion, the rule-model document and report files."""

from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError

from rules.errors import InputError
from rules.schema import (
    SCHEMA_VERSION,
    AttributionMatrix,
    ChangeRecord,
    ClassLabel,
    Dataset,
    EvalReport,
    IntervalConstraint,
    LabelVector,
    Provenance,
    RuleModel,
    Term,
)

PathLike = Union[str, Path]
ROW_ID_COLUMN = "row_id"


def _read_csv(path: PathLike, what: str) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{what} file not found: {path}")
    try:
        raw_header = pd.read_csv(path, header=None, nrows=1, dtype=str, keep_default_na=False)
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputError(f"Could not parse {what} CSV {path}: {e}") from e
    header = [str(v) for v in raw_header.iloc[0].tolist()]
    duplicates = sorted({h for h in header if header.count(h) > 1})
    if duplicates:
        raise InputError(f"{what} CSV {path} repeats column names: {', '.join(duplicates)}")
    return frame


def _numeric_matrix(frame: pd.DataFrame, path: PathLike, what: str) -> np.ndarray:
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().to_numpy() | ~np.isfinite(numeric.to_numpy(dtype=float, na_value=np.nan))
    if bad.any():
        row, col = (int(v) for v in np.argwhere(bad)[0])
        raise InputError(
            f"{what} CSV {path}: missing or non-numeric value at row {row}, column {frame.columns[col]!r} "
            f"(value {frame.iat[row, col]!r}); {int(bad.sum())} bad cells in total"
        )
    return numeric.to_numpy(dtype=float)


def read_dataset(path: PathLike) -> Dataset:
    """Header of feature names, one sample per row; an optional ``row_id`` column holds ids."""
    frame = _read_csv(path, "data")
    row_ids: List[str]
    if ROW_ID_COLUMN in frame.columns:
        row_ids = [str(v) for v in frame[ROW_ID_COLUMN].tolist()]
        frame = frame.drop(columns=[ROW_ID_COLUMN])
    else:
        row_ids = [str(i) for i in range(len(frame))]
    if frame.shape[1] == 0:
        raise InputError(f"data CSV {path} has no feature columns")
    features = _numeric_matrix(frame, path, "data")
    return Dataset(features, tuple(str(c) for c in frame.columns), tuple(row_ids))


def read_labels(path: PathLike, expected_rows: Optional[int] = None) -> LabelVector:
    """Single-column CSV with a header row."""
    frame = _read_csv(path, "labels")
    if frame.shape[1] != 1:
        raise InputError(f"labels CSV {path} must have exactly one column, found {frame.shape[1]}")
    column = frame.iloc[:, 0]
    if column.isna().any():
        raise InputError(f"labels CSV {path}: missing label at row {int(np.flatnonzero(column.isna())[0])}")
    if expected_rows is not None and len(column) != expected_rows:
        raise InputError(f"labels CSV {path} has {len(column)} rows, expected {expected_rows}")
    return LabelVector.from_values(column.tolist())


def read_attributions(path: PathLike, dataset: Dataset) -> AttributionMatrix:
    """n x d CSV whose header matches the data's feature names."""
    frame = _read_csv(path, "attributions")
    if ROW_ID_COLUMN in frame.columns:
        frame = frame.drop(columns=[ROW_ID_COLUMN])
    names = [str(c) for c in frame.columns]
    if names != list(dataset.feature_names):
        raise InputError(
            f"attributions CSV {path} columns {names} do not match the data features {list(dataset.feature_names)}"
        )
    if len(frame) != dataset.n_samples:
        raise InputError(f"attributions CSV {path} has {len(frame)} rows, the data has {dataset.n_samples}")
    return AttributionMatrix(_numeric_matrix(frame, path, "attributions"))


def write_dataset(dataset: Dataset, path: PathLike) -> Path:
    frame = pd.DataFrame(dataset.features, columns=list(dataset.feature_names))
    return _write_frame(frame, path)


def write_labels(labels: LabelVector, path: PathLike, column: str = "label") -> Path:
    return _write_frame(pd.DataFrame({column: list(labels.labels)}), path)


def write_attributions(attr: AttributionMatrix, feature_names: Sequence[str], path: PathLike) -> Path:
    return _write_frame(pd.DataFrame(attr.scores, columns=list(feature_names)), path)


def _write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def _write_text(text: str, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


# Rule-model document
class ConstraintRecord(BaseModel):
    feature: str
    dim: int = Field(ge=0)
    lo: float
    hi: float


class TermRecord(BaseModel):
    id: int = Field(ge=0)
    class_label: ClassLabel
    accuracy: float = Field(ge=0.0, le=1.0)
    rule: str
    constraints: List[ConstraintRecord] = Field(min_length=1)


class RuleModelDocument(BaseModel):
    """Versioned, human-readable form of a RuleModel; doubles as the explanation artifact."""

    schema_version: int = SCHEMA_VERSION
    feature_names: List[str]
    classes: List[ClassLabel]
    default_class: ClassLabel
    terms: List[TermRecord] = []
    provenance: Provenance = Provenance()

    @classmethod
    def from_model(cls, model: RuleModel, feature_names: Sequence[str]) -> "RuleModelDocument":
        model.check_dimensions(len(feature_names))
        return cls(
            feature_names=list(feature_names),
            classes=list(model.classes),
            default_class=model.default_class,
            terms=[
                TermRecord(
                    id=t.term_id,
                    class_label=t.class_label,
                    accuracy=model.accuracies[t.term_id],
                    rule=t.describe(feature_names),
                    constraints=[
                        ConstraintRecord(feature=feature_names[c.dim], dim=c.dim, lo=c.lo, hi=c.hi)
                        for c in t.constraints
                    ],
                )
                for t in model.terms
            ],
            provenance=model.provenance,
        )

    def to_model(self) -> RuleModel:
        for record in self.terms:
            for c in record.constraints:
                if c.dim >= len(self.feature_names) or self.feature_names[c.dim] != c.feature:
                    raise InputError(f"Term {record.id}: constraint on {c.feature!r} does not match dim {c.dim}")
        terms = [
            Term(
                constraints=[IntervalConstraint(dim=c.dim, lo=c.lo, hi=c.hi) for c in record.constraints],
                class_label=record.class_label,
                term_id=record.id,
            )
            for record in self.terms
        ]
        return RuleModel(
            classes=list(self.classes),
            terms=terms,
            default_class=self.default_class,
            accuracies={record.id: record.accuracy for record in self.terms},
            provenance=self.provenance,
        )


def model_to_text(model: RuleModel, feature_names: Sequence[str]) -> str:
    return RuleModelDocument.from_model(model, feature_names).model_dump_json(indent=2) + "\n"


def save_model(model: RuleModel, feature_names: Sequence[str], path: PathLike) -> Path:
    return _write_text(model_to_text(model, feature_names), path)


def load_document(path: PathLike) -> RuleModelDocument:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        document = RuleModelDocument.model_validate_json(text)
    except ValidationError as e:
        raise InputError(f"Invalid rule-model file {path}: {e}") from e
    if document.schema_version != SCHEMA_VERSION:
        raise InputError(f"Unsupported schema_version {document.schema_version} in {path}; expected {SCHEMA_VERSION}")
    return document


def load_model(path: PathLike) -> Tuple[RuleModel, List[str]]:
    """Load a model file, returning the model and the feature names it was extracted on."""
    document = load_document(path)
    try:
        model = document.to_model()
    except ValidationError as e:
        raise InputError(f"Inconsistent rule model in {path}: {e}") from e
    return model, list(document.feature_names)


# Reports
REPORT_COLUMNS = ["model", "n_samples", "f1", "size", "ambiguity", "coverage", "f1_ground_truth", "f1_reference"]


def _report_row(name: str, report: EvalReport) -> Dict[str, object]:
    row: Dict[str, object] = {
        "model": name,
        "n_samples": report.n_samples,
        "f1": report.f1_macro,
        "size": report.size,
        "ambiguity": report.ambiguity,
        "coverage": report.coverage,
        "f1_ground_truth": report.f1_ground_truth,
        "f1_reference": report.f1_reference,
    }
    for label, score in report.per_class_f1.items():
        row[f"f1_class_{label}"] = score
    return row


def write_eval_reports(reports: Dict[str, EvalReport], path: PathLike) -> Path:
    rows = [_report_row(name, report) for name, report in reports.items()]
    return _write_frame(pd.DataFrame(rows), path)


def read_eval_reports(path: PathLike) -> Dict[str, EvalReport]:
    frame = _read_csv(path, "evaluation report")
    missing = [c for c in REPORT_COLUMNS if c not in frame.columns]
    if missing:
        raise InputError(f"evaluation report {path} lacks columns: {', '.join(missing)}")
    class_columns = [c for c in frame.columns if str(c).startswith("f1_class_")]

    def optional(value) -> Optional[float]:
        return None if pd.isna(value) else float(value)

    reports: Dict[str, EvalReport] = {}
    for _, row in frame.iterrows():
        reports[str(row["model"])] = EvalReport(
            f1_macro=float(row["f1"]),
            size=int(row["size"]),
            ambiguity=float(row["ambiguity"]),
            coverage=float(row["coverage"]),
            per_class_f1={c[len("f1_class_"):]: float(row[c]) for c in class_columns if not pd.isna(row[c])},
            f1_ground_truth=optional(row["f1_ground_truth"]),
            f1_reference=optional(row["f1_reference"]),
            n_samples=int(row["n_samples"]),
        )
    return reports


def _fmt(value: Optional[float], digits: int = 2) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def eval_reports_markdown(reports: Dict[str, EvalReport]) -> str:
    """Table shaped like a per-model F1 / Size / Amb block; Amb and coverage in percent."""
    names = list(reports)
    lines = [
        "| Metric | " + " | ".join(names) + " |",
        "|---" * (len(names) + 1) + "|",
        "| F1 | " + " | ".join(_fmt(reports[n].f1_macro) for n in names) + " |",
        "| Size | " + " | ".join(str(reports[n].size) for n in names) + " |",
        "| Amb (%) | " + " | ".join(_fmt(100 * reports[n].ambiguity, 1) for n in names) + " |",
        "| Coverage (%) | " + " | ".join(_fmt(100 * reports[n].coverage, 1) for n in names) + " |",
    ]
    if any(reports[n].f1_reference is not None for n in names):
        lines.append("| F1 (X) | " + " | ".join(_fmt(reports[n].f1_reference) for n in names) + " |")
    if any(reports[n].f1_ground_truth is not None for n in names):
        lines.append("| F1 (truth) | " + " | ".join(_fmt(reports[n].f1_ground_truth) for n in names) + " |")
    return "\n".join(lines) + "\n"


def write_eval_markdown(reports: Dict[str, EvalReport], path: PathLike) -> Path:
    return _write_text(eval_reports_markdown(reports), path)


def changes_frame(records: Iterable[ChangeRecord], **extra: object) -> pd.DataFrame:
    rows = []
    for r in records:
        rows.append({
            **extra,
            "metric": r.metric,
            "before": r.before,
            "after": r.after,
            "rel_change_pct": "n/a" if r.rel_change_pct is None else r.rel_change_pct,
        })
    return pd.DataFrame(rows)


def write_changes(records: Iterable[ChangeRecord], path: PathLike, **extra: object) -> Path:
    return _write_frame(changes_frame(records, **extra), path)


def write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    return _write_frame(frame, path)
