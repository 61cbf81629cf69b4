import time
from pathlib import Path

import pandas as pd
import pytest

from cli.main import main
from rules import io
from rules.errors import EXIT_INPUT, EXIT_INTERNAL, InputError, InternalError, TrainingDivergenceError, exit_code_for
from rules.schema import EvalReport
from services.surrogate import make_blob_task, occlusion_attributions, predict_blackbox, split_task, train_linear_softmax
from tests.builders import box, model_of


def write_task(directory, seed=0):
    """Surrogate predictions and occlusion attributions for a separated blob task, written as CSV inputs."""
    task = make_blob_task("fixture", n_samples=240, separation=4.0, seed=seed)
    train, test = split_task(task, seed=seed)
    blackbox = train_linear_softmax(train.X, train.y, seed=seed)
    paths = {
        "data": io.write_dataset(train.X, directory / "X.csv"),
        "preds": io.write_labels(predict_blackbox(blackbox, train.X), directory / "preds.csv", column="prediction"),
        "attr": io.write_attributions(
            occlusion_attributions(blackbox, train.X), train.X.feature_names, directory / "attr.csv"
        ),
        "test_data": io.write_dataset(test.X, directory / "X_test.csv"),
        "test_preds": io.write_labels(predict_blackbox(blackbox, test.X), directory / "preds_test.csv"),
        "test_labels": io.write_labels(test.y, directory / "labels_test.csv"),
    }
    return {name: str(path) for name, path in paths.items()}


def extract(paths, out):
    return main(["extract", "--data", paths["data"], "--preds", paths["preds"], "--attr", paths["attr"], "--out", str(out)])


def write_layered_fixture(directory):
    model = model_of(
        [box("A", 0, (0, 0.0, 2.0)), box("A", 1, (0, 0.5, 1.5)), box("B", 2, (0, 3.0, 4.0))],
        accuracies={0: 1.0, 1: 0.9, 2: 1.0},
    )
    model_path = io.save_model(model, ["x0"], directory / "layered.json")
    (directory / "X.csv").write_text("x0\n0.2\n0.8\n1.0\n1.8\n3.0\n3.5\n4.0\n")
    (directory / "preds.csv").write_text("prediction\nA\nA\nA\nA\nB\nB\nB\n")
    return str(model_path), str(directory / "X.csv"), str(directory / "preds.csv")


def write_reports(path, **fields):
    defaults = dict(f1_macro=0.8, size=20, ambiguity=0.1, coverage=0.9, n_samples=50)
    defaults.update(fields)
    return str(io.write_eval_reports({"model": EvalReport(**defaults)}, path))


def read_changes(path):
    return pd.read_csv(path, keep_default_na=False, dtype=str).set_index("metric")


def test_extract_builds_terms_for_every_class(tmp_path):
    paths = write_task(tmp_path)
    assert extract(paths, tmp_path / "model.json") == 0
    model, feature_names = io.load_model(tmp_path / "model.json")
    assert feature_names == ["f0", "f1", "f2", "f3"]
    assert {t.class_label for t in model.terms} == set(model.classes)
    assert model.provenance.sources["attributions"] == paths["attr"]


def test_extract_is_byte_identical_on_rerun(tmp_path):
    paths = write_task(tmp_path)
    assert extract(paths, tmp_path / "first.json") == 0
    assert extract(paths, tmp_path / "second.json") == 0
    assert (tmp_path / "first.json").read_bytes() == (tmp_path / "second.json").read_bytes()


def test_model_file_round_trips(tmp_path):
    paths = write_task(tmp_path)
    extract(paths, tmp_path / "model.json")
    model, feature_names = io.load_model(tmp_path / "model.json")
    assert io.model_to_text(model, feature_names) == (tmp_path / "model.json").read_text(encoding="utf-8")


def test_extract_rejects_wrong_row_count(tmp_path):
    paths = write_task(tmp_path)
    short = tmp_path / "short.csv"
    short.write_text("\n".join(Path(paths["preds"]).read_text().splitlines()[:-3]) + "\n")
    paths["preds"] = str(short)
    assert extract(paths, tmp_path / "model.json") == EXIT_INPUT
    assert not (tmp_path / "model.json").exists()


def test_extract_rejects_unparseable_data(tmp_path):
    paths = write_task(tmp_path)
    bad = tmp_path / "bad.csv"
    bad.write_text("f0,f1,f2,f3\n1,2,x,4\n")
    paths["data"] = str(bad)
    assert extract(paths, tmp_path / "model.json") == EXIT_INPUT


def test_extract_requires_attributions(tmp_path):
    paths = write_task(tmp_path)
    assert main(["extract", "--data", paths["data"], "--preds", paths["preds"], "--out", str(tmp_path / "m.json")]) == EXIT_INPUT


def test_prune_removes_zero_win_term(tmp_path):
    model_path, data, preds = write_layered_fixture(tmp_path)
    out = tmp_path / "pruned.json"
    assert main(["prune", "--model", model_path, "--data", data, "--preds", preds, "--theta", "0", "--out", str(out)]) == 0
    pruned, _ = io.load_model(out)
    assert pruned.term_ids == [0, 2]
    for suffix in (".trace.csv", ".wins.csv", ".changes.csv"):
        assert out.with_suffix(suffix).exists()
    wins = pd.read_csv(out.with_suffix(".wins.csv"))
    assert wins["wins"].tolist() == [4, 0, 3]
    assert wins["kept"].tolist() == [True, False, True]


def test_prune_is_deterministic_and_idempotent(tmp_path):
    model_path, data, preds = write_layered_fixture(tmp_path)
    first, second, again = tmp_path / "first.json", tmp_path / "second.json", tmp_path / "again.json"
    for out in (first, second):
        assert main(["prune", "--model", model_path, "--data", data, "--preds", preds, "--theta", "0", "--out", str(out)]) == 0
    assert first.read_bytes() == second.read_bytes()

    assert main(["prune", "--model", str(first), "--data", data, "--preds", preds, "--theta", "0", "--out", str(again)]) == 0
    once, _ = io.load_model(first)
    twice, _ = io.load_model(again)
    assert twice.terms == once.terms
    assert twice.accuracies == once.accuracies


def test_prune_default_output_name(tmp_path):
    model_path, data, preds = write_layered_fixture(tmp_path)
    assert main(["prune", "--model", model_path, "--data", data, "--preds", preds]) == 0
    assert (tmp_path / "layered.pruned.json").exists()


def test_prune_input_errors(tmp_path):
    model_path, data, preds = write_layered_fixture(tmp_path)
    missing = str(tmp_path / "missing.json")
    assert main(["prune", "--model", missing, "--data", data, "--preds", preds]) == EXIT_INPUT
    assert main(["prune", "--model", model_path, "--data", data, "--preds", preds, "--theta", "1.5"]) == EXIT_INPUT
    (tmp_path / "X2.csv").write_text("y0\n0.2\n0.8\n1.0\n1.8\n3.0\n3.5\n4.0\n")
    assert main(["prune", "--model", model_path, "--data", str(tmp_path / "X2.csv"), "--preds", preds]) == EXIT_INPUT


def test_eval_report_has_every_column(tmp_path):
    paths = write_task(tmp_path)
    extract(paths, tmp_path / "model.json")
    args = [
        "eval", "--model", str(tmp_path / "model.json"),
        "--data", paths["test_data"], "--preds", paths["test_preds"], "--labels", paths["test_labels"],
        "--ref-data", paths["data"], "--ref-preds", paths["preds"],
    ]
    assert main(args + ["--out", str(tmp_path / "eval")]) == 0
    frame = pd.read_csv(tmp_path / "eval.csv")
    assert list(frame.columns[:8]) == io.REPORT_COLUMNS
    assert not frame.isna().any().any()
    assert frame.loc[0, "model"] == "model"
    assert "| F1 (truth) |" in (tmp_path / "eval.md").read_text()

    assert main(args + ["--out", str(tmp_path / "again")]) == 0
    assert (tmp_path / "eval.csv").read_bytes() == (tmp_path / "again.csv").read_bytes()


def test_eval_zero_term_model(tmp_path):
    _, data, preds = write_layered_fixture(tmp_path)
    empty = io.save_model(model_of([], classes=["A", "B"], default_class="A"), ["x0"], tmp_path / "empty.json")
    assert main(["eval", "--model", str(empty), "--data", data, "--preds", preds, "--out", str(tmp_path / "eval")]) == 0
    row = pd.read_csv(tmp_path / "eval.csv").iloc[0]
    assert (row["size"], row["coverage"], row["ambiguity"]) == (0, 0.0, 0.0)


def test_eval_empty_test_set(tmp_path):
    model_path, _, _ = write_layered_fixture(tmp_path)
    (tmp_path / "empty.csv").write_text("x0\n")
    (tmp_path / "empty_preds.csv").write_text("prediction\n")
    args = ["eval", "--model", model_path, "--data", str(tmp_path / "empty.csv"), "--preds", str(tmp_path / "empty_preds.csv")]
    assert main(args + ["--out", str(tmp_path / "eval")]) == EXIT_INPUT


def test_compare_identical_reports(tmp_path):
    report = write_reports(tmp_path / "a.csv", f1_reference=0.9)
    assert main(["compare", "--before", report, "--after", report, "--out", str(tmp_path / "changes.csv")]) == 0
    changes = read_changes(tmp_path / "changes.csv")
    assert [float(v) for v in changes["rel_change_pct"]] == [0.0, 0.0, 0.0, 0.0]


def test_compare_size_and_zero_ambiguity(tmp_path):
    before = write_reports(tmp_path / "before.csv", size=20, ambiguity=0.0)
    after = write_reports(tmp_path / "after.csv", size=11, ambiguity=0.05)
    assert main(["compare", "--before", before, "--after", after, "--out", str(tmp_path / "changes.csv")]) == 0
    changes = read_changes(tmp_path / "changes.csv")
    assert float(changes.loc["size", "rel_change_pct"]) == pytest.approx(-45.0)
    assert changes.loc["ambiguity", "rel_change_pct"] == "n/a"


def test_compare_mismatched_reports(tmp_path):
    before = write_reports(tmp_path / "before.csv", f1_reference=0.9)
    after = write_reports(tmp_path / "after.csv")
    assert main(["compare", "--before", before, "--after", after, "--out", str(tmp_path / "changes.csv")]) == EXIT_INPUT


def test_demo_end_to_end(tmp_path):
    start = time.perf_counter()
    assert main(["demo", "--out", str(tmp_path), "--seed", "0"]) == 0
    assert time.perf_counter() - start < 10

    summary = pd.read_csv(tmp_path / "relative_changes.csv")
    assert set(summary["setting"]) == {"safe", "threshold"}
    assert not pd.read_csv(tmp_path / "tradeoff.csv").empty

    for task_dir in sorted(tmp_path.glob("task*")):
        model_path = task_dir / "model.json"
        model, feature_names = io.load_model(model_path)
        assert io.model_to_text(model, feature_names) == model_path.read_text(encoding="utf-8")
        for setting in ("safe", "threshold"):
            pruned, _ = io.load_model(task_dir / f"model.{setting}.json")
            assert pruned.size <= model.size
            assert set(pruned.term_ids) <= set(model.term_ids)
        reports = io.read_eval_reports(task_dir / "eval.csv")
        assert reports["safe"].f1_reference == reports["original"].f1_reference
        assert reports["safe"].ambiguity <= reports["original"].ambiguity
    assert len(list(tmp_path.glob("task*"))) == 5


def test_demo_seeds_give_different_models(tmp_path):
    for seed in ("0", "1"):
        assert main(["demo", "--out", str(tmp_path / seed), "--seed", seed, "--tasks", "1", "--theta", "0"]) == 0
    assert (tmp_path / "0" / "task0" / "model.json").read_bytes() != (tmp_path / "1" / "task0" / "model.json").read_bytes()


def test_exit_codes():
    assert exit_code_for(InputError("bad")) == EXIT_INPUT
    assert exit_code_for(FileNotFoundError("gone")) == EXIT_INPUT
    assert exit_code_for(InternalError("broken")) == EXIT_INTERNAL
    assert exit_code_for(TrainingDivergenceError(3, 0.5)) == EXIT_INTERNAL
    assert exit_code_for(KeyError("x")) == EXIT_INTERNAL
