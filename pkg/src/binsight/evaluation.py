"""Accuracy, Cohen's kappa, exact binomial bounds and cross-validation.

Confusion matrices are always ``counts[actual, predicted]``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .dataset import Dataset, stratified_folds
from .errors import InvalidArgument, Undefined
from .featurize import GrayImage, export_pgm
from .forest import ForestConfig, ForestModel, train_forest
from .forest.model import with_seed
from .rng import derive

# Stream tag for per-fold forest seeds.
FOLD_STREAM = 6


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray
    label_names: tuple

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.label_names)
        if counts.shape != (k, k):
            raise InvalidArgument(f"counts shape {counts.shape} does not match {k} labels")
        if (counts < 0).any():
            raise InvalidArgument("confusion counts must be nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "label_names", tuple(self.label_names))

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return self.label_names == other.label_names and np.array_equal(self.counts, other.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.label_names != other.label_names:
            raise InvalidArgument("cannot add confusion matrices over different labels")
        return ConfusionMatrix(self.counts + other.counts, self.label_names)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("actual\\predicted," + ",".join(self.label_names) + "\n")
        for name, row in zip(self.label_names, self.counts.tolist()):
            out.write(name + "," + ",".join(map(str, row)) + "\n")
        return out.getvalue()


def confusion(predictions, truths, label_names: Sequence[str]) -> ConfusionMatrix:
    pred = np.asarray(predictions, dtype=np.int64).reshape(-1)
    true = np.asarray(truths, dtype=np.int64).reshape(-1)
    k = len(label_names)
    if pred.size != true.size:
        raise InvalidArgument(f"{pred.size} predictions for {true.size} truths")
    if pred.size and (min(pred.min(), true.min()) < 0 or max(pred.max(), true.max()) >= k):
        raise InvalidArgument("class index outside the label vocabulary")
    counts = np.bincount(true * k + pred, minlength=k * k).reshape(k, k)
    return ConfusionMatrix(counts, tuple(label_names))


def _require_mass(cm: ConfusionMatrix) -> int:
    n = cm.total
    if n < 1:
        raise InvalidArgument("metric needs at least one counted prediction")
    return n


def accuracy(cm: ConfusionMatrix) -> float:
    return cm.correct / _require_mass(cm)


def per_class_recall(cm: ConfusionMatrix) -> np.ndarray:
    """Diagonal over row totals; NaN marks a class with no actual samples."""
    _require_mass(cm)
    rows = cm.counts.sum(axis=1)
    recall = np.full(len(rows), np.nan)
    has = rows > 0
    recall[has] = np.diag(cm.counts)[has] / rows[has]
    return recall


def kappa(cm: ConfusionMatrix) -> float:
    """Cohen's kappa from the integer form ``(N*trace - E) / (N**2 - E)``.

    ``E = sum_c row_c * col_c``; integer arithmetic keeps hand-checkable
    cases such as ``[[40, 10], [20, 30]] -> 0.4`` exact.
    """
    n = _require_mass(cm)
    rows = [int(v) for v in cm.counts.sum(axis=1)]
    cols = [int(v) for v in cm.counts.sum(axis=0)]
    expected = sum(r * c for r, c in zip(rows, cols))
    denom = n * n - expected
    if denom == 0:
        raise Undefined("kappa is undefined when chance agreement is 1")
    return (n * cm.correct - expected) / denom


def accuracy_ci(correct: int, total: int, level: float = 0.95) -> tuple[float, float]:
    """Exact (Clopper-Pearson) two-sided interval for ``correct / total``."""
    if total < 1 or not 0 <= correct <= total:
        raise InvalidArgument(f"need 0 <= correct <= total and total >= 1, "
                              f"got {correct}/{total}")
    if not 0 < level < 1:
        raise InvalidArgument("confidence level must lie in (0, 1)")
    alpha = 1.0 - level
    lower = 0.0 if correct == 0 else float(stats.beta.ppf(alpha / 2, correct, total - correct + 1))
    upper = 1.0 if correct == total else float(
        stats.beta.ppf(1 - alpha / 2, correct + 1, total - correct))
    return lower, upper


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    kappa: float
    accuracy_lower: float
    accuracy_upper: float
    per_class_recall: tuple
    confusion: ConfusionMatrix
    n: int

    @classmethod
    def from_confusion(cls, cm: ConfusionMatrix, level: float = 0.95) -> "EvalReport":
        n = _require_mass(cm)
        try:
            k = kappa(cm)
        except Undefined:
            k = float("nan")
        lower, upper = accuracy_ci(cm.correct, n, level)
        return cls(accuracy(cm), k, lower, upper, tuple(per_class_recall(cm).tolist()), cm, n)

    def summary(self) -> str:
        return (f"accuracy={self.accuracy:.4f} kappa={self.kappa:.4f} "
                f"ci=[{self.accuracy_lower:.4f}, {self.accuracy_upper:.4f}] n={self.n}")

    def to_text(self, title: str = "evaluation") -> str:
        lines = [f"# binsight {title} report",
                 "# confusion rows = actual class, columns = predicted class",
                 f"Accuracy: {self.accuracy:.6f}",
                 f"Kappa: {self.kappa:.6f}",
                 f"Accuracy Lower: {self.accuracy_lower:.6f}",
                 f"Accuracy Upper: {self.accuracy_upper:.6f}",
                 f"N: {self.n}",
                 f"Correct: {self.confusion.correct}"]
        for name, r in zip(self.confusion.label_names, self.per_class_recall):
            lines.append(f"Recall[{name}]: " + ("NA" if np.isnan(r) else f"{r:.6f}"))
        return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if line and not line.startswith("#"):
            key, _, value = line.partition(": ")
            out[key] = value
    return out


def evaluate(model: ForestModel, test: Dataset, backend=None) -> EvalReport:
    if len(test) == 0:
        raise InvalidArgument("cannot evaluate on an empty test set")
    if test.label_names != model.label_names:
        test = test.with_labels(model.label_names)
    pred = model.predict(test.X, backend)
    return EvalReport.from_confusion(confusion(pred, test.y, model.label_names))


@dataclass(frozen=True)
class CVResult:
    fold_accuracies: tuple
    mean_accuracy: float
    pooled_confusion: ConfusionMatrix
    pooled_report: EvalReport
    predictions: np.ndarray  # out-of-fold prediction for every training row

    def to_text(self) -> str:
        head = self.pooled_report.to_text(f"{len(self.fold_accuracies)}-fold cross-validation")
        folds = [f"Fold {i} Accuracy: {a:.6f}" for i, a in enumerate(self.fold_accuracies)]
        return head + f"Mean Fold Accuracy: {self.mean_accuracy:.6f}\n" + "\n".join(folds) + "\n"


def cross_validate(train: Dataset, k: int = 10, forest_config: ForestConfig = ForestConfig(),
                   seed: int = 0, threads: Optional[int] = None, backend=None) -> CVResult:
    """Stratified k-fold CV; fold ``i`` trains with seed ``derive(seed, 6, i)``.

    Every training row is predicted exactly once, by the model that did not
    see it.  The pooled report is computed over all those predictions.
    """
    folds = stratified_folds(train, k, seed)
    predictions = np.full(len(train), -1, dtype=np.int64)
    fold_acc = []
    for i in range(k):
        held = folds.members(i)
        if held.size == 0:
            raise InvalidArgument(f"fold {i} is empty; use k <= {len(train)}")
        fit = train.subset(folds.complement(i))
        cfg = with_seed(forest_config, derive(seed, FOLD_STREAM, i))
        model = train_forest(fit, cfg, threads, backend)
        pred = model.predict(train.X[held], backend)
        predictions[held] = pred
        fold_acc.append(float(np.mean(pred == train.y[held])))
    pooled = confusion(predictions, train.y, train.label_names)
    return CVResult(tuple(fold_acc), sum(fold_acc) / k, pooled,
                    EvalReport.from_confusion(pooled), predictions)


def heatmap_image(cm: ConfusionMatrix, scale: int = 1) -> GrayImage:
    """Row-normalized heatmap: ``round(255 * count / row_total)``, half up."""
    if scale < 1:
        raise InvalidArgument("heatmap scale must be >= 1")
    counts = cm.counts
    rows = counts.sum(axis=1, keepdims=True)
    safe = np.where(rows > 0, rows, 1)
    px = np.where(rows > 0, (2 * 255 * counts + safe) // (2 * safe), 0).astype(np.uint8)
    if scale > 1:
        px = np.kron(px, np.ones((scale, scale), dtype=np.uint8))
    return GrayImage(px)


def export_heatmap(cm: ConfusionMatrix, scale: int = 1) -> tuple[GrayImage, bytes]:
    img = heatmap_image(cm, scale)
    return img, export_pgm(img)
