from __future__ import annotations

import csv
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from defect_sage.metrics import (
    CSV_COLUMNS,
    DegenerateAgreementError,
    EvaluationError,
    LabeledRecord,
    build_confusion,
    cohens_kappa,
    compute_metrics,
    kappa_interpretation,
    load_manifest,
    matrix_from_counts,
    read_records_csv,
    run_ablation,
)
from oracles import tally_kappa, tally_metrics

ABLATION_DIR = Path(__file__).resolve().parents[1] / "data" / "ablation"


def _records(pairs):
    return [LabeledRecord(item_id=f"r{i}", reference=ref, predicted=pred)
            for i, (ref, pred) in enumerate(pairs)]


def _random_pairs(rng: random.Random):
    labels = [f"c{i}" for i in range(rng.randint(1, 5))]
    return [(rng.choice(labels), rng.choice(labels))
            for _ in range(rng.randint(1, 40))]


# -- confusion matrix --------------------------------------------------------


def test_confusion_counts_and_order():
    matrix = build_confusion(_records([("A", "A"), ("A", "B"), ("B", "B")]))
    assert matrix.classes == ("A", "B")
    assert matrix.counts == ((1, 1), (0, 1))
    assert matrix.total == 3
    assert matrix.row_sum(0) == 2 and matrix.col_sum(1) == 2


def test_confusion_order_is_first_appearance_reference_first():
    matrix = build_confusion(_records([("x", "y"), ("z", "x")]))
    assert matrix.classes == ("x", "y", "z")


def test_confusion_rejects_empty_and_blank_input():
    with pytest.raises(EvaluationError):
        build_confusion([])
    with pytest.raises(EvaluationError):
        LabeledRecord(item_id="1", reference="", predicted="A")


def test_matrix_from_counts_validation():
    with pytest.raises(EvaluationError, match="square"):
        matrix_from_counts(["A", "B"], [[1, 2]])
    with pytest.raises(EvaluationError, match="non-negative"):
        matrix_from_counts(["A"], [[-1]])
    assert matrix_from_counts(["A"], [[3]]).total == 3


# -- metrics -----------------------------------------------------------------


def test_macro_f1_hand_case():
    matrix = build_confusion(_records([("A", "A"), ("A", "B"), ("B", "B")]))
    report = compute_metrics(matrix)
    assert report.accuracy == pytest.approx(2 / 3, abs=1e-12)
    assert report.per_class["A"].precision == 1.0
    assert report.per_class["A"].recall == 0.5
    assert report.per_class["B"].precision == 0.5
    assert report.per_class["B"].recall == 1.0
    assert report.macro_f1 == pytest.approx(2 / 3, abs=1e-12)


def test_absent_predictions_score_zero_not_nan():
    # B never predicted: precision denominator is empty.
    matrix = build_confusion(_records([("A", "A"), ("B", "A")]))
    report = compute_metrics(matrix)
    assert report.per_class["B"].precision == 0.0
    assert report.per_class["B"].f1 == 0.0


def test_metrics_match_tally_oracle_random_sweep():
    rng = random.Random(99)
    for _ in range(300):
        pairs = _random_pairs(rng)
        report = compute_metrics(build_confusion(_records(pairs)))
        expected = tally_metrics(pairs)
        assert abs(report.accuracy - expected["accuracy"]) <= 1e-12
        assert abs(report.macro_precision - expected["macro_precision"]) <= 1e-12
        assert abs(report.macro_recall - expected["macro_recall"]) <= 1e-12
        assert abs(report.macro_f1 - expected["macro_f1"]) <= 1e-12
        for label, (precision, recall, f1) in expected["per_class"].items():
            got = report.per_class[label]
            assert abs(got.precision - precision) <= 1e-12
            assert abs(got.recall - recall) <= 1e-12
            assert abs(got.f1 - f1) <= 1e-12


@given(st.lists(st.tuples(st.sampled_from("abcd"), st.sampled_from("abcd")),
                min_size=1, max_size=30))
@settings(max_examples=200, deadline=None)
def test_metrics_bounds_property(pairs):
    report = compute_metrics(build_confusion(_records(pairs)))
    assert 0.0 <= report.accuracy <= 1.0
    assert 0.0 <= report.macro_f1 <= 1.0
    for metrics in report.per_class.values():
        assert 0.0 <= metrics.precision <= 1.0
        assert 0.0 <= metrics.recall <= 1.0
        assert min(metrics.precision, metrics.recall) - 1e-12 <= metrics.f1
        assert metrics.f1 <= max(metrics.precision, metrics.recall) + 1e-12


# -- kappa -------------------------------------------------------------------


def test_kappa_hand_case_balanced_matrix():
    result = cohens_kappa(matrix_from_counts(["A", "B"], [[40, 10], [10, 40]]))
    assert result.kappa == pytest.approx(0.6, abs=1e-12)
    assert result.p_o == pytest.approx(0.8, abs=1e-12)
    assert result.p_e == pytest.approx(0.5, abs=1e-12)
    assert result.interpretation == "substantial agreement"


def test_kappa_perfect_agreement_is_one():
    result = cohens_kappa(matrix_from_counts(["A", "B"], [[50, 0], [0, 50]]))
    assert result.kappa == 1.0


def test_kappa_degenerate_marginals_raise():
    with pytest.raises(DegenerateAgreementError):
        cohens_kappa(matrix_from_counts(["A"], [[5]]))


def test_kappa_matches_tally_oracle_random_sweep():
    rng = random.Random(4242)
    checked = 0
    for _ in range(300):
        pairs = _random_pairs(rng)
        expected = tally_kappa(pairs)
        matrix = build_confusion(_records(pairs))
        if expected is None:
            with pytest.raises(DegenerateAgreementError):
                cohens_kappa(matrix)
            continue
        assert abs(cohens_kappa(matrix).kappa - expected) <= 1e-12
        checked += 1
    assert checked > 200


@pytest.mark.parametrize("kappa, band", [
    (0.95, "almost perfect agreement"),
    (0.81, "almost perfect agreement"),
    (0.8, "substantial agreement"),
    (0.61, "substantial agreement"),
    (0.6, "substantial agreement"),
    (0.59, "moderate agreement"),
    (0.41, "moderate agreement"),
    (0.4, "fair agreement"),
    (0.21, "fair agreement"),
    (0.2, "slight agreement"),
    (0.01, "slight agreement"),
    (0.0, "poor agreement"),
    (-0.5, "poor agreement"),
])
def test_kappa_interpretation_bands(kappa, band):
    assert kappa_interpretation(kappa) == band


# -- record loading ----------------------------------------------------------


def test_read_records_happy_path(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("item_id,reference,predicted\n1,A,B\n2,B,B\n",
                    encoding="utf-8")
    records = read_records_csv(path)
    assert len(records) == 2
    assert records[0] == LabeledRecord(item_id="1", reference="A", predicted="B")


@pytest.mark.parametrize("content, fragment", [
    ("id,ref,pred\n1,A,B\n", "header"),
    ("item_id,reference,predicted\n1,A\n", ":2"),
    ("item_id,reference,predicted\n1,A,B\n2,,B\n", ":3"),
    ("item_id,reference,predicted\n", "no records"),
], ids=["wrong-header", "short-row", "blank-cell", "empty"])
def test_read_records_rejects_malformed_files(tmp_path, content, fragment):
    path = tmp_path / "r.csv"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(EvaluationError, match=fragment):
        read_records_csv(path)


def test_read_records_missing_file():
    with pytest.raises(EvaluationError, match="cannot read"):
        read_records_csv("/nonexistent/records.csv")


# -- manifest and ablation runner --------------------------------------------


def test_shipped_manifest_lists_four_configurations():
    configs = load_manifest(ABLATION_DIR / "manifest.json")
    assert [c.config_id for c in configs] == ["A", "B", "C", "D"]
    assert all(c.records_path.exists() for c in configs)


def test_manifest_validation(tmp_path):
    bad = tmp_path / "manifest.json"
    bad.write_text('{"configurations": [{"config_id": "A", "records": "a.csv"}, '
                   '{"config_id": "A", "records": "b.csv"}]}', encoding="utf-8")
    with pytest.raises(EvaluationError, match="duplicate config_id"):
        load_manifest(bad)
    bad.write_text('{"configurations": [{"config_id": "A"}]}', encoding="utf-8")
    with pytest.raises(EvaluationError, match="records path"):
        load_manifest(bad)
    bad.write_text('{"configurations": []}', encoding="utf-8")
    with pytest.raises(EvaluationError, match="no configurations"):
        load_manifest(bad)


def test_run_ablation_writes_reports(tmp_path):
    results = run_ablation(ABLATION_DIR / "manifest.json", tmp_path)
    assert [r.config_id for r in results] == ["A", "B", "C", "D"]

    with (tmp_path / "ablation_report.csv").open(newline="",
                                                 encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == CSV_COLUMNS
    by_id = {row[0]: row for row in rows[1:]}
    assert by_id["D"][1] == "0.8000"
    assert by_id["D"][6] == "substantial agreement"

    html = (tmp_path / "ablation_report.html").read_text(encoding="utf-8")
    for config_id in "ABCD":
        assert f"<td>{config_id}</td>" in html


def test_run_ablation_results_match_direct_computation(tmp_path):
    results = run_ablation(ABLATION_DIR / "manifest.json", tmp_path)
    for result in results:
        records = read_records_csv(ABLATION_DIR / f"config_{result.config_id}.csv")
        matrix = build_confusion(records)
        assert result.metrics == compute_metrics(matrix)
        assert result.kappa == cohens_kappa(matrix)


def test_run_ablation_names_broken_configuration(tmp_path):
    records = tmp_path / "broken.csv"
    records.write_text("item_id,reference,predicted\n", encoding="utf-8")
    manifest = tmp_path / "manifest.json"
    manifest.write_text(
        '{"configurations": [{"config_id": "X", "records": "broken.csv"}]}',
        encoding="utf-8")
    with pytest.raises(EvaluationError, match="configuration X"):
        run_ablation(manifest, tmp_path / "out")
