"""Splits, metrics and the backbone-by-classifier evaluation grid."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classifiers import KIND_ALIASES, TrainConfig, resolve_kind, train_model
from .errors import (
    ClassTooSmallError,
    EmptyMatrixError,
    LabelOutOfRangeError,
    LengthMismatchError,
)
from .fusion import N_CLASSES, FusedSample, apply_standardizer, fit_standardizer

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("accuracy", "recall", "precision", "kappa", "f1")


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def stratified_split(labels: list[int] | np.ndarray, train_frac: float,
                     seed: int) -> tuple[list[int], list[int]]:
    """Disjoint, exhaustive (train, validation) index lists.

    Each class contributes its floor share plus, for the classes with the
    largest fractional remainders, one extra record, so the global train
    count is exactly round(train_frac * N) and every class stays within
    one record of train_frac times its size. Assignment inside a class is
    a seed-fixed shuffle.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if not 0.0 < train_frac < 1.0:
        raise ValueError(f"train_frac must be in (0, 1), got {train_frac}")
    classes = np.unique(labels)
    per_class = {int(c): np.nonzero(labels == c)[0] for c in classes}
    for c, idx in per_class.items():
        if idx.size < 2:
            raise ClassTooSmallError(f"class {c} has {idx.size} record(s), needs >= 2")

    target_total = _round_half_up(train_frac * labels.size)
    base = {c: int(np.floor(train_frac * idx.size)) for c, idx in per_class.items()}
    remainders = sorted(per_class,
                        key=lambda c: (-(train_frac * per_class[c].size - base[c]), c))
    take = {c: base[c] for c in per_class}
    extra = target_total - sum(base.values())
    for c in remainders[:extra]:
        take[c] += 1
    # Keep both sides of every class nonempty.
    for c in sorted(per_class):
        n_c = per_class[c].size
        if take[c] < 1 or take[c] > n_c - 1:
            clamped = min(max(take[c], 1), n_c - 1)
            shift = take[c] - clamped
            take[c] = clamped
            for other in remainders:
                while shift != 0 and other != c:
                    n_o = per_class[other].size
                    nxt = take[other] + (1 if shift > 0 else -1)
                    if 1 <= nxt <= n_o - 1 and abs(nxt - train_frac * n_o) <= 1.0:
                        take[other] = nxt
                        shift -= 1 if shift > 0 else -1
                    else:
                        break

    rng = np.random.default_rng(seed)
    train_ids: list[int] = []
    val_ids: list[int] = []
    for c in sorted(per_class):
        shuffled = per_class[c][rng.permutation(per_class[c].size)]
        train_ids.extend(int(i) for i in shuffled[:take[c]])
        val_ids.extend(int(i) for i in shuffled[take[c]:])
    return sorted(train_ids), sorted(val_ids)


def confusion(true: np.ndarray, pred: np.ndarray,
              n_classes: int = N_CLASSES) -> np.ndarray:
    """Count matrix with rows = true class, columns = predicted class."""
    true = np.asarray(true, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if true.shape != pred.shape or true.ndim != 1 or true.size == 0:
        raise LengthMismatchError(
            f"need equal-length nonempty label sequences, got {true.shape} / {pred.shape}")
    if true.min() < 0 or true.max() >= n_classes or pred.min() < 0 or pred.max() >= n_classes:
        raise LabelOutOfRangeError(f"labels must lie in 0..{n_classes - 1}")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (true, pred), 1)
    return cm


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    recall_micro: float
    recall_macro: float
    precision_micro: float
    precision_macro: float
    f1_micro: float
    f1_macro: float
    kappa: float
    confusion: np.ndarray

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "recall_micro": self.recall_micro,
            "recall_macro": self.recall_macro,
            "precision_micro": self.precision_micro,
            "precision_macro": self.precision_macro,
            "f1_micro": self.f1_micro,
            "f1_macro": self.f1_macro,
            "kappa": self.kappa,
            "confusion": self.confusion.tolist(),
        }


def metrics(cm: np.ndarray) -> MetricsReport:
    """Accuracy, micro/macro precision-recall-F1 and Cohen's kappa.

    Per-class ratios with an empty denominator count as 0; kappa is 0 when
    the expected agreement is already 1.
    """
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total < 1:
        raise EmptyMatrixError("confusion matrix counts no samples")
    k = cm.shape[0]
    diag = np.diag(cm).astype(np.float64)
    rows = cm.sum(axis=1).astype(np.float64)
    cols = cm.sum(axis=0).astype(np.float64)

    accuracy = float(diag.sum() / total)
    recall_c = np.divide(diag, rows, out=np.zeros(k), where=rows > 0)
    precision_c = np.divide(diag, cols, out=np.zeros(k), where=cols > 0)
    pr_sum = precision_c + recall_c
    f1_c = np.divide(2.0 * precision_c * recall_c, pr_sum,
                     out=np.zeros(k), where=pr_sum > 0)

    p_expected = float((rows * cols).sum() / total ** 2)
    if p_expected == 1.0:
        kappa = 0.0
    else:
        kappa = float((accuracy - p_expected) / (1.0 - p_expected))

    return MetricsReport(
        accuracy=accuracy,
        recall_micro=accuracy,
        recall_macro=float(recall_c.mean()),
        precision_micro=accuracy,
        precision_macro=float(precision_c.mean()),
        f1_micro=accuracy,
        f1_macro=float(f1_c.mean()),
        kappa=kappa,
        confusion=cm,
    )


@dataclass
class GridCell:
    backbone: str
    classifier: str
    report: MetricsReport | None
    error: str | None = None


def evaluate_split(raw_vectors: dict[int, np.ndarray], labels: dict[int, int],
                   train_ids: list[int], val_ids: list[int], kind: str,
                   cfg: TrainConfig) -> MetricsReport:
    """Standardize on the training half, fit one classifier, score the rest."""
    train = [FusedSample(raw_vectors[i], labels[i], str(i)) for i in train_ids
             if i in raw_vectors]
    val = [(raw_vectors[i], labels[i]) for i in val_ids if i in raw_vectors]
    standardizer = fit_standardizer(train)
    std_train = [FusedSample(apply_standardizer(standardizer, s.features),
                             s.label, s.source_id) for s in train]
    model = train_model(kind, std_train, cfg)
    preds = model.predict_batch(
        np.stack([apply_standardizer(standardizer, v) for v, _ in val]))
    return metrics(confusion(np.array([lab for _, lab in val]), preds))


def run_grid(feature_sets: dict[str, dict[int, np.ndarray]],
             labels: dict[int, int], classifier_names: list[str],
             cfg: TrainConfig, train_frac: float) -> list[GridCell]:
    """Evaluate every (backbone, classifier) pair on one shared split.

    feature_sets maps backbone name to {record id: raw fused vector}. A
    failing cell is recorded and skipped, never fatal.
    """
    ordered_ids = sorted(labels)
    split_labels = np.array([labels[i] for i in ordered_ids], dtype=np.int64)
    train_pos, val_pos = stratified_split(split_labels, train_frac, cfg.seed)
    train_ids = [ordered_ids[p] for p in train_pos]
    val_ids = [ordered_ids[p] for p in val_pos]

    cells: list[GridCell] = []
    for backbone, vectors in feature_sets.items():
        for name in classifier_names:
            resolve_kind(name)  # fail fast on typos
            try:
                report = evaluate_split(vectors, labels, train_ids, val_ids,
                                        name, cfg)
                cells.append(GridCell(backbone, name, report))
            except Exception as exc:  # cell-level fault tolerance
                log.warning("grid cell (%s, %s) failed: %s", backbone, name, exc)
                cells.append(GridCell(backbone, name, None, error=str(exc)))
    return cells


def table_row_values(report: MetricsReport) -> tuple[float, ...]:
    """The five tabulated metrics: accuracy, micro recall, macro precision,
    kappa, macro F1."""
    return (report.accuracy, report.recall_micro, report.precision_macro,
            report.kappa, report.f1_macro)


def grid_csv(cells: list[GridCell]) -> str:
    lines = ["backbone,classifier," + ",".join(METRIC_COLUMNS)]
    for cell in cells:
        if cell.report is None:
            lines.append(f"{cell.backbone},{cell.classifier},,,,,")
        else:
            values = ",".join(f"{v:.4f}" for v in table_row_values(cell.report))
            lines.append(f"{cell.backbone},{cell.classifier},{values}")
    return "\n".join(lines) + "\n"


def heatmap_csvs(cells: list[GridCell]) -> dict[str, str]:
    """One CSV per metric: rows are backbones, columns are classifiers."""
    backbones = list(dict.fromkeys(cell.backbone for cell in cells))
    classifiers = list(dict.fromkeys(cell.classifier for cell in cells))
    by_key = {(c.backbone, c.classifier): c for c in cells}
    out = {}
    for m_idx, metric in enumerate(METRIC_COLUMNS):
        lines = ["backbone," + ",".join(classifiers)]
        for backbone in backbones:
            row = [backbone]
            for classifier in classifiers:
                cell = by_key.get((backbone, classifier))
                if cell is None or cell.report is None:
                    row.append("")
                else:
                    row.append(f"{table_row_values(cell.report)[m_idx]:.4f}")
            lines.append(",".join(row))
        out[metric] = "\n".join(lines) + "\n"
    return out


def write_grid_outputs(cells: list[GridCell], out_dir: str | Path) -> None:
    """grid.csv, per-cell JSON reports and per-metric heatmap CSVs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "grid.csv").write_text(grid_csv(cells))
    for metric, text in heatmap_csvs(cells).items():
        (out_dir / f"heatmap_{metric}.csv").write_text(text)
    for cell in cells:
        payload = {"backbone": cell.backbone, "classifier": cell.classifier}
        if cell.report is None:
            payload["error"] = cell.error
        else:
            payload["metrics"] = cell.report.to_dict()
        name = f"cell_{cell.backbone}_{cell.classifier}.json"
        (out_dir / name).write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n")
