import itertools
import logging
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfkit.corpus import FOUNDATIONS, Dataset, Document, FoundationLabel, Prediction
from mfkit.evaluation import (
    ClassPrior,
    EvalReport,
    LearningCurve,
    baseline_expected,
    batches_to_threshold,
    evaluate,
    evaluate_binary,
    fuse_binary,
    lenient_match,
    reports_to_csv,
    reports_to_markdown,
    sample_mislabeled,
)

from conftest import make_dataset, random_prediction

CARE = FoundationLabel.CARE
FAIR = FoundationLabel.FAIRNESS
LOYA = FoundationLabel.LOYALTY
AUTH = FoundationLabel.AUTHORITY
SANC = FoundationLabel.SANCTITY
NONE = FoundationLabel.NONE


def brute_force_report(docs, preds, scope):
    """Independent reference implementation: plain per-document loops."""
    paired = list(zip(docs, preds))
    covered = [(d, p) for d, p in paired if set(p.labels) & set(FOUNDATIONS)]
    used = covered if scope == "covered_only" else paired
    out = {
        "coverage": len(covered) / len(paired),
        "n_documents": len(paired),
        "n_covered": len(covered),
    }
    if not used:
        out.update(accuracy=0.0, f1_weighted=0.0, f1_macro=0.0,
                   per_class={f: (0.0, 0.0, 0.0, 0) for f in FOUNDATIONS},
                   confusion={f: (0, 0, 0) for f in FOUNDATIONS})
        return out
    per_class = {}
    confusion = {}
    fw = 0.0
    fm = 0.0
    for f in FOUNDATIONS:
        tp = sum(1 for d, p in used if d.gold == f and f in p.labels)
        fp = sum(1 for d, p in used if d.gold != f and f in p.labels)
        fn = sum(1 for d, p in used if d.gold == f and f not in p.labels)
        support = sum(1 for d, _ in used if d.gold == f)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[f] = (precision, recall, f1, support)
        confusion[f] = (tp, fp, fn)
        fw += (support / len(used)) * f1
        fm += f1 / 5
    out["accuracy"] = sum(1 for d, p in used if d.gold in p.labels) / len(used)
    out["f1_weighted"] = fw
    out["f1_macro"] = fm
    out["per_class"] = per_class
    out["confusion"] = confusion
    return out


def assert_matches_oracle(report, oracle):
    assert report.accuracy == oracle["accuracy"]
    assert report.coverage == oracle["coverage"]
    assert report.f1_weighted == oracle["f1_weighted"]
    assert report.f1_macro == oracle["f1_macro"]
    assert report.n_documents == oracle["n_documents"]
    assert report.n_covered == oracle["n_covered"]
    for f in FOUNDATIONS:
        stats = report.per_class[f]
        assert (stats.precision, stats.recall, stats.f1, stats.support) == oracle["per_class"][f]
        conf = report.confusion[f]
        assert (conf.tp, conf.fp, conf.fn) == oracle["confusion"][f]


class TestLenientMatch:
    def test_exact(self):
        pred = Prediction(doc_id="a", labels=frozenset({CARE}))
        assert lenient_match(CARE, pred)

    def test_multi_label_containing_gold(self):
        pred = Prediction(doc_id="a", labels=frozenset({CARE, AUTH}))
        assert lenient_match(CARE, pred)

    def test_miss(self):
        pred = Prediction(doc_id="a", labels=frozenset({AUTH}))
        assert not lenient_match(CARE, pred)

    def test_gold_must_be_foundation(self):
        pred = Prediction(doc_id="a", labels=frozenset({CARE}))
        with pytest.raises(ValueError):
            lenient_match(NONE, pred)


class TestEvaluate:
    def test_perfect_predictions(self, small_dataset):
        preds = [
            Prediction(doc_id=d.id, labels=frozenset({d.gold}))
            for d in small_dataset.documents
        ]
        for scope in ("covered_only", "all"):
            report = evaluate(small_dataset, preds, scope=scope)
            assert report.accuracy == 1.0
            assert report.coverage == 1.0
            assert report.f1_weighted == 1.0
            assert all(s.f1 == 1.0 for s in report.per_class.values())

    def test_oracle_equivalence_20_seeds(self):
        for seed in range(20):
            rng = random.Random(seed)
            counts = {f: 40 for f in FOUNDATIONS}
            ds = make_dataset(counts, shuffle_seed=seed)
            preds = [random_prediction(d.id, rng) for d in ds.documents]
            for scope in ("covered_only", "all"):
                report = evaluate(ds, preds, scope=scope)
                oracle = brute_force_report(ds.documents, preds, scope)
                assert_matches_oracle(report, oracle)

    def test_all_none_degenerate(self, small_dataset):
        preds = [
            Prediction(doc_id=d.id, labels=frozenset({NONE}))
            for d in small_dataset.documents
        ]
        report = evaluate(small_dataset, preds, scope="covered_only")
        assert report.coverage == 0.0
        assert report.accuracy == 0.0
        assert "no covered documents" in report.notes
        report_all = evaluate(small_dataset, preds, scope="all")
        assert report_all.accuracy == 0.0
        assert report_all.notes == ()

    def test_duplicate_prediction_rejected(self, small_dataset):
        preds = [
            Prediction(doc_id=d.id, labels=frozenset({d.gold}))
            for d in small_dataset.documents
        ]
        with pytest.raises(ValueError, match="duplicate"):
            evaluate(small_dataset, preds + [preds[0]])

    def test_missing_prediction_rejected(self, small_dataset):
        preds = [
            Prediction(doc_id=d.id, labels=frozenset({d.gold}))
            for d in small_dataset.documents[:-1]
        ]
        with pytest.raises(ValueError, match="missing"):
            evaluate(small_dataset, preds)

    def test_unknown_doc_id_rejected(self, small_dataset):
        preds = [
            Prediction(doc_id=d.id, labels=frozenset({d.gold}))
            for d in small_dataset.documents
        ] + [Prediction(doc_id="ghost", labels=frozenset({CARE}))]
        with pytest.raises(ValueError, match="unknown"):
            evaluate(small_dataset, preds)

    def test_permutation_invariance(self, small_dataset):
        rng = random.Random(0)
        preds = [random_prediction(d.id, rng) for d in small_dataset.documents]
        shuffled = preds[:]
        rng.shuffle(shuffled)
        assert evaluate(small_dataset, preds) == evaluate(small_dataset, shuffled)

    def test_accuracy_bounded_by_coverage_under_scope_all(self):
        rng = random.Random(5)
        ds = make_dataset({f: 12 for f in FOUNDATIONS})
        preds = [random_prediction(d.id, rng) for d in ds.documents]
        report = evaluate(ds, preds, scope="all")
        assert report.accuracy <= report.coverage

    def test_single_label_scope_all_reduces_to_multiclass(self):
        # exhaustively enumerate every single-label assignment on 4 documents
        docs = tuple(
            Document(id=f"e{i}", text=f"t{i}", gold=g)
            for i, g in enumerate([CARE, CARE, FAIR, SANC])
        )
        ds = Dataset(name="enum", documents=docs)
        for assignment in itertools.product(FOUNDATIONS, repeat=len(docs)):
            preds = [
                Prediction(doc_id=d.id, labels=frozenset({lab}))
                for d, lab in zip(docs, assignment)
            ]
            report = evaluate(ds, preds, scope="all")
            exact = sum(1 for d, lab in zip(docs, assignment) if d.gold == lab)
            assert report.accuracy == exact / len(docs)
            oracle = brute_force_report(docs, preds, "all")
            assert_matches_oracle(report, oracle)


class TestBaseline:
    def test_mfv_row(self):
        prior = ClassPrior.from_counts(
            {CARE: 27, LOYA: 16, AUTH: 25, FAIR: 12, SANC: 10}
        )
        report = baseline_expected(prior)
        assert report.accuracy == pytest.approx(0.23, abs=0.005)
        assert report.f1_weighted == pytest.approx(0.23, abs=0.005)
        assert report.f1_macro == pytest.approx(0.20, abs=0.005)
        assert report.coverage == 1.0
        assert report.per_class[CARE].f1 == pytest.approx(0.30, abs=0.005)

    def test_ccv_row(self):
        prior = ClassPrior.from_counts(
            {CARE: 3030, LOYA: 1712, AUTH: 1278, FAIR: 1225, SANC: 247}
        )
        report = baseline_expected(prior)
        assert report.accuracy == pytest.approx(0.27, abs=0.005)
        assert report.per_class[SANC].f1 == pytest.approx(0.03, abs=0.005)

    def test_uniform_prior(self):
        prior = ClassPrior(p={f: 0.2 for f in FOUNDATIONS})
        report = baseline_expected(prior)
        assert report.accuracy == pytest.approx(0.2)
        assert all(s.f1 == pytest.approx(0.2) for s in report.per_class.values())

    def test_prior_must_sum_to_one(self):
        with pytest.raises(ValueError):
            ClassPrior(p={CARE: 0.5, FAIR: 0.6})

    def test_counts_restricted_to_foundations(self):
        with pytest.raises(ValueError):
            ClassPrior.from_counts({CARE: 1, FoundationLabel.NONMORAL: 1})

    @given(
        counts=st.lists(st.integers(1, 500), min_size=5, max_size=5)
    )
    @settings(max_examples=60, deadline=None)
    def test_weighted_f1_equals_accuracy_identity(self, counts):
        prior = ClassPrior.from_counts(dict(zip(FOUNDATIONS, counts)))
        report = baseline_expected(prior)
        weighted = sum(prior.p[f] * report.per_class[f].f1 for f in FOUNDATIONS)
        assert weighted == pytest.approx(report.accuracy, rel=1e-12)


def curve_from_f1s(f1s, batches=None):
    batches = batches or list(range(1, len(f1s) + 1))
    points = []
    for used, f1 in zip(batches, f1s):
        points.append(
            (
                used,
                EvalReport(
                    per_class={f: None for f in ()}, accuracy=f1, coverage=1.0,
                    f1_weighted=f1, f1_macro=f1, confusion={},
                    n_documents=10, n_covered=10, scope="all",
                ),
            )
        )
    return LearningCurve(points=tuple(points))


class TestBatchesToThreshold:
    def test_first_crossing(self):
        assert batches_to_threshold(curve_from_f1s([0.50, 0.65, 0.72]), 0.70) == 3

    def test_never_reached(self):
        assert batches_to_threshold(curve_from_f1s([0.50, 0.65]), 0.70) is None

    def test_non_monotone_first_crossing(self):
        assert batches_to_threshold(curve_from_f1s([0.72, 0.60, 0.75]), 0.70) == 1

    def test_empty_curve(self):
        with pytest.raises(ValueError):
            batches_to_threshold(LearningCurve(points=()), 0.70)

    def test_threshold_range(self):
        with pytest.raises(ValueError):
            batches_to_threshold(curve_from_f1s([0.5]), 1.5)

    def test_batches_strictly_increasing(self):
        with pytest.raises(ValueError):
            curve_from_f1s([0.5, 0.6], batches=[2, 2])


class TestSampleMislabeled:
    def _preds(self, ds, wrong_ids):
        preds = []
        for d in ds.documents:
            if d.id in wrong_ids:
                wrong = next(f for f in FOUNDATIONS if f is not d.gold)
                preds.append(Prediction(doc_id=d.id, labels=frozenset({wrong})))
            else:
                preds.append(Prediction(doc_id=d.id, labels=frozenset({d.gold})))
        return preds

    def test_all_correct_returns_empty_with_warning(self, small_dataset, caplog):
        preds = self._preds(small_dataset, set())
        with caplog.at_level(logging.WARNING):
            out = sample_mislabeled(small_dataset, preds, 5, seed=1)
        assert out == []
        assert "only 0 exist" in caplog.text

    def test_n_equals_total(self, small_dataset):
        wrong = {d.id for d in small_dataset.documents[:4]}
        preds = self._preds(small_dataset, wrong)
        out = sample_mislabeled(small_dataset, preds, 4, seed=1)
        assert {d.id for d, _ in out} == wrong

    def test_filter_by_gold(self):
        ds = make_dataset({AUTH: 30, LOYA: 30, SANC: 30, CARE: 30})
        preds = self._preds(ds, {d.id for d in ds.documents})
        out = sample_mislabeled(
            ds, preds, 20, foundations={AUTH, LOYA, SANC}, seed=3
        )
        assert len(out) == 20
        assert all(d.gold in {AUTH, LOYA, SANC} for d, _ in out)

    def test_deterministic_per_seed(self, small_dataset):
        preds = self._preds(small_dataset, {d.id for d in small_dataset.documents})
        a = sample_mislabeled(small_dataset, preds, 3, seed=9)
        b = sample_mislabeled(small_dataset, preds, 3, seed=9)
        assert [d.id for d, _ in a] == [d.id for d, _ in b]


class TestBinaryEvaluation:
    def _streams(self, ds, fire):
        """fire: doc_id -> set of foundations whose binary model fires."""
        streams = {}
        for f in FOUNDATIONS:
            preds = []
            for d in ds.documents:
                labels = frozenset({f}) if f in fire.get(d.id, set()) else frozenset({NONE})
                preds.append(Prediction(doc_id=d.id, labels=labels, scores={f: float(f in fire.get(d.id, set()))}))
            streams[f] = preds
        return streams

    def test_perfect_binary_models(self, small_dataset):
        fire = {d.id: {d.gold} for d in small_dataset.documents}
        report = evaluate_binary(small_dataset, self._streams(small_dataset, fire))
        for row in report.per_foundation:
            assert row.accuracy == 1.0 and row.f1_positive == 1.0

    def test_fusion_all_firing(self, small_dataset):
        fire = {d.id: set(FOUNDATIONS) for d in small_dataset.documents}
        fused = fuse_binary(small_dataset, self._streams(small_dataset, fire))
        assert all(p.labels == frozenset(FOUNDATIONS) for p in fused)

    def test_fusion_none_firing(self, small_dataset):
        fused = fuse_binary(small_dataset, self._streams(small_dataset, {}))
        assert all(p.labels == frozenset({NONE}) for p in fused)

    def test_fused_report_consumable(self, small_dataset):
        fire = {d.id: {d.gold} for d in small_dataset.documents}
        fused = fuse_binary(small_dataset, self._streams(small_dataset, fire))
        report = evaluate(small_dataset, fused, scope="all")
        assert report.accuracy == 1.0


class TestRendering:
    def test_csv_and_markdown_column_order(self, small_dataset):
        preds = [
            Prediction(doc_id=d.id, labels=frozenset({d.gold}))
            for d in small_dataset.documents
        ]
        report = evaluate(small_dataset, preds)
        csv_text = reports_to_csv({"perfect": report})
        assert csv_text.splitlines()[0] == "Method,Auth,Care,Fair,Loya,Sanc,Acc,Cov,Fw,Fm"
        md = reports_to_markdown({"perfect": report})
        assert md.splitlines()[0] == "| Method | Auth | Care | Fair | Loya | Sanc | Acc | Cov | Fw | Fm |"
        assert "| perfect | 1.00 | 1.00 | 1.00 | 1.00 | 1.00 | 1.00 | 1.00 | 1.00 | 1.00 |" in md


def test_binary_markdown_layout(small_dataset):
    from mfkit.evaluation import binary_report_to_markdown

    streams = {}
    for f in FOUNDATIONS:
        streams[f] = [
            Prediction(doc_id=d.id,
                       labels=frozenset({f}) if d.gold is f else frozenset({NONE}))
            for d in small_dataset.documents
        ]
    md = binary_report_to_markdown(evaluate_binary(small_dataset, streams))
    lines = md.splitlines()
    assert lines[0] == "| | Auth | Care | Fair | Loya | Sanc | Avg |"
    assert [l.split("|")[1].strip() for l in lines[2:7]] == ["0", "1", "Acc", "Fm", "Fw"]
    assert "1.00" in lines[4]
