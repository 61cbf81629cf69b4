import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from cli.config import RunConfig
from rules import io
from rules.errors import ConfigError, InputError, InternalError
from rules.schema import ChangeRecord, Dataset, EvalReport, LabelVector, PruneConfig, RuleModel
from services.evaluation import compare, evaluate, macro_f1, summarize_changes, tradeoff_points
from services.induction import extract_rule_model
from services.inference import predict_many
from services.pruning import PruneTrace, threshold_prune
from services.surrogate import (
    make_blob_task,
    occlusion_attributions,
    predict_blackbox,
    split_task,
    train_linear_softmax,
)

logger = logging.getLogger(__name__)

DEMO_THETA = 0.05


def _require(value, flag: str):
    if value is None or value == []:
        raise ConfigError(f"{flag} is required for this command")
    return value


def _load_labelled(data: Optional[Path], preds: Optional[Path], prefix: str = "") -> Tuple[Dataset, LabelVector]:
    X = io.read_dataset(_require(data, f"--{prefix}data"))
    Y = io.read_labels(_require(preds, f"--{prefix}preds"))
    Y.check_paired(X, f"predictions file {preds}")
    return X, Y


def _load_single_model(config: RunConfig) -> Tuple[RuleModel, List[str]]:
    models = _require(config.model, "--model")
    if len(models) != 1:
        raise ConfigError(f"expected one --model, got {len(models)}")
    return io.load_model(models[0])


def _check_features(model_features: Sequence[str], X: Dataset, source: str) -> None:
    if list(model_features) != list(X.feature_names):
        raise InputError(
            f"{source} has features {list(X.feature_names)} but the model was extracted on {list(model_features)}"
        )


def cmd_extract(config: RunConfig) -> int:
    X, Yhat = _load_labelled(config.data, config.preds)
    attr = io.read_attributions(_require(config.attr, "--attr"), X)
    sources = {"data": str(config.data), "predictions": str(config.preds), "attributions": str(config.attr)}
    model = extract_rule_model(X, Yhat, attr, config.extraction, sources=sources)

    out = config.out or Path("model.json")
    io.save_model(model, X.feature_names, out)
    f1 = macro_f1(predict_many(model, X), Yhat, model.classes, config.evaluation.average)
    print(f"Wrote {out}: {model.size} terms over {len(model.classes)} classes, F1 on X = {f1:.4f}")
    return 0


def _trace_frame(trace: PruneTrace) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "k": step.k,
                "n_removed": len(step.removed_term_ids),
                "removed_term_ids": ";".join(str(t) for t in step.removed_term_ids),
                "accuracy_after": step.accuracy_after,
                "accepted": step.accepted,
            }
            for step in trace.steps
        ],
        columns=["k", "n_removed", "removed_term_ids", "accuracy_after", "accepted"],
    )


def _wins_frame(model: RuleModel, trace: PruneTrace, survivors: Sequence[int]) -> pd.DataFrame:
    kept = set(survivors)
    return pd.DataFrame(
        [
            {
                "term_id": t.term_id,
                "class_label": t.class_label,
                "accuracy": model.accuracies[t.term_id],
                "wins": trace.wins.wins[t.term_id],
                "kept": t.term_id in kept,
            }
            for t in model.terms
        ],
        columns=["term_id", "class_label", "accuracy", "wins", "kept"],
    )


def prune_artifacts(
    model: RuleModel,
    feature_names: Sequence[str],
    X: Dataset,
    Y: LabelVector,
    theta: float,
    out: Path,
) -> Tuple[RuleModel, PruneTrace, List[ChangeRecord]]:
    """Prune and write the pruned model, its trace, the win table and reference-set changes."""
    pruned, trace = threshold_prune(model, X, Y, PruneConfig(theta=theta))
    io.save_model(pruned, feature_names, out)
    io.write_frame(_trace_frame(trace), out.with_suffix(".trace.csv"))
    io.write_frame(_wins_frame(model, trace, pruned.term_ids), out.with_suffix(".wins.csv"))
    changes = compare(evaluate(model, X, Y), evaluate(pruned, X, Y))
    io.write_changes(changes, out.with_suffix(".changes.csv"))
    return pruned, trace, changes


def cmd_prune(config: RunConfig) -> int:
    model, feature_names = _load_single_model(config)
    X, Y = _load_labelled(config.data, config.preds)
    _check_features(feature_names, X, f"data file {config.data}")

    out = config.out or config.model[0].with_name(config.model[0].stem + ".pruned.json")
    pruned, trace, _ = prune_artifacts(model, feature_names, X, Y, config.prune.theta, out)
    print(
        f"Wrote {out}: {model.size} -> {pruned.size} terms (theta={config.prune.theta:g}, "
        f"accuracy on X {trace.baseline_accuracy:.4f} -> {pruned.provenance.pruning[-1].final_accuracy:.4f})"
    )
    return 0


def cmd_eval(config: RunConfig) -> int:
    models = _require(config.model, "--model")
    X, Yhat = _load_labelled(config.data, config.preds)
    if X.n_samples == 0:
        raise ConfigError(f"test set {config.data} is empty")
    truth = io.read_labels(config.labels) if config.labels is not None else None
    reference = None
    if config.ref_data is not None or config.ref_preds is not None:
        reference = _load_labelled(config.ref_data, config.ref_preds, "ref-")

    reports: Dict[str, EvalReport] = {}
    for path in models:
        model, feature_names = io.load_model(path)
        _check_features(feature_names, X, f"data file {config.data}")
        reports[path.stem] = evaluate(
            model, X, Yhat, options=config.evaluation, Y_true=truth, reference=reference
        )

    out = config.out or Path("eval")
    csv_path = io.write_eval_reports(reports, out.with_suffix(".csv"))
    md_path = io.write_eval_markdown(reports, out.with_suffix(".md"))
    print(io.eval_reports_markdown(reports), end="")
    print(f"Wrote {csv_path} and {md_path}")
    return 0


def _pair_reports(before: Dict[str, EvalReport], after: Dict[str, EvalReport]) -> List[Tuple[str, EvalReport, EvalReport]]:
    if len(before) == 1 and len(after) == 1:
        (b_name, b), (a_name, a) = next(iter(before.items())), next(iter(after.items()))
        return [(f"{b_name}->{a_name}", b, a)]
    shared = [name for name in before if name in after]
    if not shared:
        raise InputError("reports share no model names to compare")
    return [(name, before[name], after[name]) for name in shared]


def cmd_compare(config: RunConfig) -> int:
    before = io.read_eval_reports(_require(config.before, "--before"))
    after = io.read_eval_reports(_require(config.after, "--after"))
    frames = []
    for name, b, a in _pair_reports(before, after):
        if (b.f1_reference is None) != (a.f1_reference is None):
            raise InputError(f"{name}: only one report carries F1 on the reference set")
        if b.n_samples != a.n_samples:
            raise InputError(f"{name}: reports were computed on {b.n_samples} and {a.n_samples} samples")
        frames.append(io.changes_frame(compare(b, a), model=name))

    out = config.out or Path("changes.csv")
    io.write_frame(pd.concat(frames, ignore_index=True), out)
    print(f"Wrote {out}")
    return 0


def cmd_demo(config: RunConfig) -> int:
    """Run surrogate training, extraction, pruning and evaluation on generated tasks."""
    out = config.out or Path("demo_output")
    settings = {"safe": 0.0, "threshold": config.prune.theta}

    runs: Dict[str, List[List[ChangeRecord]]] = {name: [] for name in settings}
    points: List[Dict[str, object]] = []
    for i in range(config.tasks):
        seed = config.seed + i
        task = make_blob_task(name=f"task{i}", n_samples=config.samples, seed=seed, separation=2.0)
        train, test = split_task(task, seed=seed)
        blackbox = train_linear_softmax(train.X, train.y, seed=seed)
        Yhat, Yhat_test = predict_blackbox(blackbox, train.X), predict_blackbox(blackbox, test.X)
        attr = occlusion_attributions(blackbox, train.X)

        task_dir = out / task.name
        io.write_dataset(train.X, task_dir / "X.csv")
        io.write_labels(Yhat, task_dir / "preds.csv", column="prediction")
        io.write_labels(train.y, task_dir / "labels.csv")
        io.write_attributions(attr, train.X.feature_names, task_dir / "attributions.csv")
        io.write_dataset(test.X, task_dir / "X_test.csv")
        io.write_labels(Yhat_test, task_dir / "preds_test.csv", column="prediction")

        model = extract_rule_model(train.X, Yhat, attr, config.extraction, sources={"task": task.name})
        model_path = io.save_model(model, train.X.feature_names, task_dir / "model.json")
        reloaded, _ = io.load_model(model_path)
        if io.model_to_text(reloaded, train.X.feature_names) != model_path.read_text(encoding="utf-8"):
            raise InternalError(f"{model_path} does not round-trip")

        def report(m: RuleModel) -> EvalReport:
            return evaluate(m, test.X, Yhat_test, options=config.evaluation, Y_true=test.y, reference=(train.X, Yhat))

        reports = {"original": report(model)}
        for name, setting_theta in settings.items():
            pruned, _, _ = prune_artifacts(
                model, train.X.feature_names, train.X, Yhat, setting_theta, task_dir / f"model.{name}.json"
            )
            reports[name] = report(pruned)
            runs[name].append(compare(reports["original"], reports[name]))
        io.write_eval_reports(reports, task_dir / "eval.csv")
        io.write_eval_markdown(reports, task_dir / "eval.md")
        points.extend(tradeoff_points(task.name, reports["original"], {k: reports[k] for k in settings}))
        logger.info("%s: sizes %s", task.name, {k: r.size for k, r in reports.items()})

    summary = pd.concat(
        [summarize_changes(runs[name]).assign(setting=name, theta=t) for name, t in settings.items()],
        ignore_index=True,
    )[["setting", "theta", "metric", "mean_pct", "std_pct", "n", "n_skipped"]]
    io.write_frame(summary, out / "relative_changes.csv")
    io.write_frame(pd.DataFrame(points), out / "tradeoff.csv")

    print(f"Mean relative changes over {config.tasks} tasks (%):")
    for name, t in settings.items():
        rows = summary[summary["setting"] == name]
        cells = ", ".join(
            f"{r.metric} {r.mean_pct:+.2f}±{r.std_pct:.2f}" for r in rows.itertuples() if r.n > 0
        )
        print(f"  theta={t:g}: {cells}")
    print(f"Artifacts written to {out}")
    return 0


COMMANDS = {
    "extract": cmd_extract,
    "prune": cmd_prune,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "demo": cmd_demo,
}
