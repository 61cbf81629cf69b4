from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator

from rules import settings
from rules.schema import (
    Averaging,
    BinarizationMode,
    BinarizationPolicy,
    EvalOptions,
    ExtractionConfig,
    F1Target,
    PruneConfig,
)


class RunConfig(BaseModel):
    """Everything a CLI command needs: paths plus the extraction, pruning and evaluation settings."""

    data: Optional[Path] = None
    preds: Optional[Path] = None
    attr: Optional[Path] = None
    labels: Optional[Path] = None
    ref_data: Optional[Path] = None
    ref_preds: Optional[Path] = None
    model: List[Path] = []
    before: Optional[Path] = None
    after: Optional[Path] = None
    out: Optional[Path] = None

    extraction: ExtractionConfig = ExtractionConfig()
    prune: PruneConfig = PruneConfig()
    evaluation: EvalOptions = EvalOptions()
    seed: int = 0

    tasks: int = Field(default=5, ge=1)
    samples: int = Field(default=400, ge=10)

    @field_validator("data", "preds", "attr", "labels", "ref_data", "ref_preds", "before", "after")
    @classmethod
    def _input_exists(cls, v: Optional[Path]) -> Optional[Path]:
        if v is not None and not v.exists():
            raise ValueError(f"input file not found: {v}")
        return v

    @field_validator("model")
    @classmethod
    def _models_exist(cls, v: List[Path]) -> List[Path]:
        missing = [str(p) for p in v if not p.exists()]
        if missing:
            raise ValueError("model file not found: " + ", ".join(missing))
        return v


def _pick(value, default):
    return default if value is None else value


def config_from_args(args) -> RunConfig:
    """Merge CLI flags over environment defaults (see ``rules.settings``)."""
    policy = BinarizationPolicy(
        mode=BinarizationMode(_pick(args.binarize, BinarizationMode.TOP_K.value)),
        k=_pick(args.top_k, settings.get_top_k()),
        tau=_pick(args.tau, 0.0),
    )
    extraction = ExtractionConfig(
        policy=policy,
        min_support_fraction=_pick(args.min_support, settings.get_min_support_fraction()),
        min_precision=_pick(args.min_precision, settings.get_min_precision()),
        cover_target=_pick(args.cover_target, settings.get_cover_target()),
        max_workers=_pick(args.workers, 1),
    )
    fields = dict(
        data=args.data,
        preds=args.preds,
        attr=args.attr,
        labels=args.labels,
        ref_data=args.ref_data,
        ref_preds=args.ref_preds,
        before=args.before,
        after=args.after,
        out=args.out,
        extraction=extraction,
        prune=PruneConfig(theta=_pick(args.theta, settings.get_theta())),
        evaluation=EvalOptions(
            f1_target=F1Target(_pick(args.f1_target, F1Target.FIDELITY.value)),
            average=Averaging(_pick(args.average, Averaging.MACRO.value)),
        ),
        seed=_pick(args.seed, settings.get_seed()),
        tasks=_pick(args.tasks, 5),
        samples=_pick(args.samples, 400),
    )
    return RunConfig(model=list(args.model or []), **fields)
