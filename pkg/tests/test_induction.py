import numpy as np
import pytest

from rules import bitset
from rules.errors import InternalError
from rules.schema import AttributionMatrix, BinarizationPolicy, Dataset, ExtractionConfig, LabelVector
from services.evaluation import macro_f1
from services.induction import CandidateTerm, build_term, extract_rule_model, greedy_cover, majority_class
from services.inference import ambiguity, predict_many, term_mask
from services.mining import Itemset
from tests.builders import box


def candidate(order, *members, precision=1.0):
    return CandidateTerm(
        term=box(0, order, (0, 0.0, 1.0)),
        coverage=bitset.nums_to_bits(members),
        precision=precision,
        order=order,
    )


def separated_blobs(n_per_class=20, seed=0):
    rng = np.random.default_rng(seed)
    values = np.concatenate([rng.uniform(0, 1, n_per_class), rng.uniform(5, 6, n_per_class)])
    X = Dataset.from_array(values.reshape(-1, 1))
    Yhat = LabelVector(tuple([0] * n_per_class + [1] * n_per_class))
    return X, Yhat, AttributionMatrix(np.ones((2 * n_per_class, 1)))


def overlapping_task(seed=0, n=120, d=5):
    rng = np.random.default_rng(seed)
    features = rng.normal(size=(n, d))
    labels = (features[:, 0] + 0.5 * rng.normal(size=n) > 0).astype(int)
    return Dataset.from_array(features), LabelVector(tuple(labels)), AttributionMatrix(rng.normal(size=(n, d)))


def test_build_term_min_max_box():
    t = build_term(Itemset((0,), 2), 0, np.array([[1.0, 0.0], [3.0, 0.0]]))
    assert [(c.dim, c.lo, c.hi) for c in t.constraints] == [(0, 1.0, 3.0)]


def test_build_term_degenerate_point_box():
    t = build_term(Itemset((0, 2), 1), 0, np.array([1.0, 9.9, 5.0]))
    assert [(c.dim, c.lo, c.hi) for c in t.constraints] == [(0, 1.0, 1.0), (2, 5.0, 5.0)]


def test_build_term_covers_its_rows():
    rows = np.array([[0.0, 2.0], [0.0, 2.0], [0.0, 7.0]])
    t = build_term(Itemset((1,), 3), 0, rows)
    assert [(c.lo, c.hi) for c in t.constraints] == [(2.0, 7.0)]
    assert term_mask(t, rows).all()


def test_build_term_without_rows():
    with pytest.raises(InternalError):
        build_term(Itemset((0,), 1), 0, np.zeros((0, 2)))


def test_greedy_cover_trace():
    candidates = [candidate(0, 0, 1, 2), candidate(1, 2, 3), candidate(2, 3)]
    selected = greedy_cover(candidates, 4, ExtractionConfig())
    assert [t.term_id for t in selected] == [0, 1]


def test_greedy_cover_single_candidate():
    selected = greedy_cover([candidate(0, 0, 1, 2)], 3, ExtractionConfig())
    assert [t.term_id for t in selected] == [0]


def test_greedy_cover_identical_candidates():
    selected = greedy_cover([candidate(0, 0, 1), candidate(1, 0, 1)], 2, ExtractionConfig())
    assert [t.term_id for t in selected] == [0]


def test_greedy_cover_prefers_precision_on_equal_gain():
    selected = greedy_cover([candidate(0, 0, 1, precision=0.6), candidate(1, 0, 1, precision=0.9)], 2, ExtractionConfig())
    assert [t.term_id for t in selected] == [1]


def test_greedy_cover_respects_min_precision_and_target():
    low = [candidate(0, 0, 1, 2, precision=0.2)]
    assert greedy_cover(low, 3, ExtractionConfig(min_precision=0.5)) == []
    parts = [candidate(0, 0, 1), candidate(1, 2), candidate(2, 3)]
    assert len(greedy_cover(parts, 4, ExtractionConfig(cover_target=0.5))) == 1


def test_greedy_cover_empty():
    assert greedy_cover([], 5, ExtractionConfig()) == []


def test_extract_separated_blobs_one_term_per_class():
    X, Yhat, attr = separated_blobs()
    model = extract_rule_model(X, Yhat, attr, ExtractionConfig(policy=BinarizationPolicy(k=1)))
    assert [t.class_label for t in model.terms] == [0, 1]
    assert model.term_ids == [0, 1]
    assert macro_f1(predict_many(model, X), Yhat, model.classes) == 1.0
    assert model.accuracies == {0: 1.0, 1: 1.0}
    assert model.provenance.config_hash


def test_extract_single_class():
    X, _, attr = separated_blobs()
    Yhat = LabelVector(tuple([1] * X.n_samples))
    model = extract_rule_model(X, Yhat, attr, ExtractionConfig(policy=BinarizationPolicy(k=1)))
    assert model.size >= 1
    assert {t.class_label for t in model.terms} == {1}
    assert ambiguity(model, X) == 0.0


def test_extract_with_unreachable_support():
    X, Yhat, attr = separated_blobs()
    config = ExtractionConfig(policy=BinarizationPolicy(k=1), min_support_floor=1000)
    with pytest.warns(UserWarning, match="empty DNF"):
        model = extract_rule_model(X, Yhat, attr, config)
    assert model.size == 0
    assert set(predict_many(model, X).labels) == {model.default_class}
    assert all(d.selected == 0 for d in model.provenance.class_diagnostics)


def test_extract_is_deterministic():
    X, Yhat, attr = overlapping_task()
    first = extract_rule_model(X, Yhat, attr)
    second = extract_rule_model(X, Yhat, attr)
    assert first.model_dump_json() == second.model_dump_json()


def test_extract_threaded_matches_sequential():
    X, Yhat, attr = overlapping_task(seed=3)
    sequential = extract_rule_model(X, Yhat, attr)
    threaded = extract_rule_model(X, Yhat, attr, ExtractionConfig(max_workers=2))
    assert sequential.terms == threaded.terms
    assert sequential.accuracies == threaded.accuracies


def test_extract_invariant_to_sample_order():
    X, Yhat, attr = overlapping_task(seed=5)
    perm = np.random.default_rng(1).permutation(X.n_samples)
    shuffled = extract_rule_model(X.take(perm), Yhat.take(perm), AttributionMatrix(attr.scores[perm]))
    original = extract_rule_model(X, Yhat, attr)

    def as_sets(model):
        return {(t.class_label, tuple((c.dim, c.lo, c.hi) for c in t.constraints)) for t in model.terms}

    assert as_sets(shuffled) == as_sets(original)


def test_extract_terms_have_nonempty_class_coverage():
    X, Yhat, attr = overlapping_task(seed=11)
    model = extract_rule_model(X, Yhat, attr)
    for t in model.terms:
        assert (term_mask(t, X.features) & (Yhat.array == t.class_label)).any()


def test_majority_class_tie_goes_to_lowest():
    assert majority_class(LabelVector((1, 0, 1, 0))) == 0
    assert majority_class(LabelVector(("b", "a", "b"))) == "b"
