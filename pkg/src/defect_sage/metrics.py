"""Classification benchmark scoring: confusion matrix, per-class metrics, agreement.

All arithmetic is plain Python floats over integer tallies, so results are
reproducible bit for bit. Division by an empty denominator yields 0.0 by
convention rather than an error.
"""

from __future__ import annotations

import csv
import html
import json
import logging
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)


class EvaluationError(Exception):
    """Raised for unusable inputs: no records, malformed CSVs, bad manifests."""


class DegenerateAgreementError(EvaluationError):
    """Chance agreement is 1, so kappa is undefined."""


@dataclass(frozen=True)
class LabeledRecord:
    item_id: str
    reference: str
    predicted: str

    def __post_init__(self) -> None:
        if not self.item_id or not self.reference or not self.predicted:
            raise EvaluationError(f"record {self.item_id!r}: all fields must be non-empty")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are reference labels, columns predicted, in first-appearance order."""

    classes: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def row_sum(self, i: int) -> int:
        return sum(self.counts[i])

    def col_sum(self, j: int) -> int:
        return sum(row[j] for row in self.counts)


def build_confusion(records: list[LabeledRecord]) -> ConfusionMatrix:
    """Tally records into a confusion matrix.

    Class order is the order labels first appear while scanning records
    (reference before predicted within each record).
    """
    if not records:
        raise EvaluationError("no records to evaluate")
    classes: list[str] = []
    index: dict[str, int] = {}
    for record in records:
        for label in (record.reference, record.predicted):
            if label not in index:
                index[label] = len(classes)
                classes.append(label)
    counts = [[0] * len(classes) for _ in classes]
    for record in records:
        counts[index[record.reference]][index[record.predicted]] += 1
    return ConfusionMatrix(classes=tuple(classes),
                           counts=tuple(tuple(row) for row in counts))


def matrix_from_counts(classes: list[str], counts: list[list[int]]) -> ConfusionMatrix:
    if len(counts) != len(classes) or any(len(row) != len(classes) for row in counts):
        raise EvaluationError("counts must be square and match the class list")
    if any(c < 0 for row in counts for c in row):
        raise EvaluationError("counts must be non-negative")
    return ConfusionMatrix(classes=tuple(classes),
                           counts=tuple(tuple(row) for row in counts))


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    per_class: dict[str, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def compute_metrics(matrix: ConfusionMatrix) -> MetricsReport:
    """Accuracy plus per-class and macro-averaged precision/recall/F1."""
    if matrix.total == 0:
        raise EvaluationError("confusion matrix is empty")
    per_class: dict[str, ClassMetrics] = {}
    for i, cls in enumerate(matrix.classes):
        tp = matrix.counts[i][i]
        precision = _safe_div(tp, matrix.col_sum(i))
        recall = _safe_div(tp, matrix.row_sum(i))
        f1 = _safe_div(2 * precision * recall, precision + recall)
        per_class[cls] = ClassMetrics(precision=precision, recall=recall, f1=f1)
    n = len(matrix.classes)
    accuracy = sum(matrix.counts[i][i] for i in range(n)) / matrix.total
    return MetricsReport(
        accuracy=accuracy,
        per_class=per_class,
        macro_precision=sum(m.precision for m in per_class.values()) / n,
        macro_recall=sum(m.recall for m in per_class.values()) / n,
        macro_f1=sum(m.f1 for m in per_class.values()) / n,
    )


def kappa_interpretation(kappa: float) -> str:
    """Agreement band for a kappa value; 0.60 and above counts as substantial."""
    if kappa > 0.8:
        return "almost perfect agreement"
    if kappa >= 0.6:
        return "substantial agreement"
    if kappa > 0.4:
        return "moderate agreement"
    if kappa > 0.2:
        return "fair agreement"
    if kappa > 0.0:
        return "slight agreement"
    return "poor agreement"


@dataclass(frozen=True)
class KappaResult:
    kappa: float
    p_o: float
    p_e: float
    interpretation: str


def cohens_kappa(matrix: ConfusionMatrix) -> KappaResult:
    """Chance-corrected agreement between reference and predicted labels.

    p_e is the product of matching marginals summed over classes. When p_e
    reaches 1 the statistic is undefined and DegenerateAgreementError is
    raised.
    """
    total = matrix.total
    if total == 0:
        raise EvaluationError("confusion matrix is empty")
    n = len(matrix.classes)
    p_o = sum(matrix.counts[i][i] for i in range(n)) / total
    p_e = sum((matrix.row_sum(i) / total) * (matrix.col_sum(i) / total) for i in range(n))
    if p_e == 1.0:
        raise DegenerateAgreementError("chance agreement is 1; kappa undefined")
    kappa = (p_o - p_e) / (1.0 - p_e)
    return KappaResult(kappa=kappa, p_o=p_o, p_e=p_e,
                       interpretation=kappa_interpretation(kappa))


# -- ablation runner --------------------------------------------------------


@dataclass(frozen=True)
class AblationConfig:
    config_id: str
    description: str
    records_path: Path


@dataclass(frozen=True)
class AblationResult:
    config_id: str
    description: str
    metrics: MetricsReport
    kappa: KappaResult


def load_manifest(path: str | Path) -> list[AblationConfig]:
    """Read an ablation manifest; records paths resolve relative to the manifest."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise EvaluationError(f"cannot read manifest {path}: {exc}") from exc
    configs = []
    seen = set()
    for i, body in enumerate(doc.get("configurations", [])):
        config_id = body.get("config_id")
        if not config_id:
            raise EvaluationError(f"manifest configurations[{i}]: config_id is required")
        if config_id in seen:
            raise EvaluationError(f"manifest: duplicate config_id {config_id!r}")
        seen.add(config_id)
        records = body.get("records")
        if not records:
            raise EvaluationError(f"manifest {config_id}: records path is required")
        configs.append(AblationConfig(
            config_id=config_id,
            description=str(body.get("description", "")),
            records_path=(path.parent / records).resolve(),
        ))
    if not configs:
        raise EvaluationError(f"manifest {path}: no configurations")
    return configs


def read_records_csv(path: str | Path) -> list[LabeledRecord]:
    """Load item_id,reference,predicted rows; any malformed row is an error."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header != ["item_id", "reference", "predicted"]:
                raise EvaluationError(
                    f"{path}: header must be item_id,reference,predicted, got {header}")
            records = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 3 or not all(cell.strip() for cell in row):
                    raise EvaluationError(f"{path}:{lineno}: malformed row {row}")
                records.append(LabeledRecord(item_id=row[0], reference=row[1],
                                             predicted=row[2]))
    except OSError as exc:
        raise EvaluationError(f"cannot read records {path}: {exc}") from exc
    if not records:
        raise EvaluationError(f"{path}: no records")
    return records


CSV_COLUMNS = ["config_id", "accuracy", "macro_precision", "macro_recall",
               "macro_f1", "kappa", "kappa_interpretation"]


def run_ablation(manifest_path: str | Path, out_dir: str | Path) -> list[AblationResult]:
    """Score every configuration and write CSV plus HTML reports.

    Numbers are written with four decimal places. Failures in any
    configuration abort the whole run with the configuration named.
    """
    configs = load_manifest(manifest_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    results = []
    for config in configs:
        try:
            records = read_records_csv(config.records_path)
            matrix = build_confusion(records)
            results.append(AblationResult(
                config_id=config.config_id,
                description=config.description,
                metrics=compute_metrics(matrix),
                kappa=cohens_kappa(matrix),
            ))
        except EvaluationError as exc:
            raise EvaluationError(f"configuration {config.config_id}: {exc}") from exc

    csv_path = out_dir / "ablation_report.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for r in results:
            writer.writerow([
                r.config_id,
                f"{r.metrics.accuracy:.4f}",
                f"{r.metrics.macro_precision:.4f}",
                f"{r.metrics.macro_recall:.4f}",
                f"{r.metrics.macro_f1:.4f}",
                f"{r.kappa.kappa:.4f}",
                r.kappa.interpretation,
            ])

    html_path = out_dir / "ablation_report.html"
    html_path.write_text(_render_ablation_html(results), encoding="utf-8")
    logger.info("ablation report written to %s and %s", csv_path, html_path)
    return results


def _render_ablation_html(results: list[AblationResult]) -> str:
    rows = []
    for r in results:
        rows.append(
            "<tr>"
            f"<td>{html.escape(r.config_id)}</td>"
            f"<td>{html.escape(r.description)}</td>"
            f"<td>{r.metrics.accuracy:.4f}</td>"
            f"<td>{r.metrics.macro_precision:.4f}</td>"
            f"<td>{r.metrics.macro_recall:.4f}</td>"
            f"<td>{r.metrics.macro_f1:.4f}</td>"
            f"<td>{r.kappa.kappa:.4f}</td>"
            f"<td>{html.escape(r.kappa.interpretation)}</td>"
            "</tr>"
        )
    return (
        "<!DOCTYPE html>\n<html><head><meta charset='utf-8'>"
        "<title>Ablation report</title>"
        "<style>body{font-family:sans-serif}table{border-collapse:collapse}"
        "td,th{border:1px solid #999;padding:4px 10px}</style></head><body>"
        "<h1>Configuration ablation</h1>"
        "<table><tr><th>Configuration</th><th>Description</th><th>Accuracy</th>"
        "<th>Macro precision</th><th>Macro recall</th><th>Macro F1</th>"
        "<th>Kappa</th><th>Interpretation</th></tr>"
        + "".join(rows)
        + "</table></body></html>\n"
    )
