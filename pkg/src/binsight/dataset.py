"""Labeled feature vectors: storage, CSV interchange and stratified sampling."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import InvalidArgument, ParseError, StratificationError
from .rng import Rng, derive


class LabeledSample(NamedTuple):
    features: np.ndarray
    label: int
    source_name: str


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable feature matrix ``X`` (uint8, n x feature_len) with labels.

    ``y[i]`` indexes into ``label_names``.  Rows keep the order they were
    given in; every sampling routine returns row-index arrays or new
    datasets in that original order.
    """

    X: np.ndarray
    y: np.ndarray
    label_names: tuple
    source_names: tuple = ()

    def __post_init__(self):
        X = np.asarray(self.X)
        if X.ndim != 2:
            raise InvalidArgument(f"feature matrix must be 2-D, got shape {X.shape}")
        if X.dtype != np.uint8:
            if X.size and (X.min() < 0 or X.max() > 255 or not np.all(X == np.round(X))):
                raise InvalidArgument("features must be integers in [0, 255]")
            X = X.astype(np.uint8)
        y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        names = tuple(self.label_names)
        if len(y) != len(X):
            raise InvalidArgument(f"{len(X)} feature rows but {len(y)} labels")
        if len(set(names)) != len(names):
            raise InvalidArgument("label names must be unique")
        if y.size and (y.min() < 0 or y.max() >= len(names)):
            raise InvalidArgument("label index outside the label vocabulary")
        sources = tuple(self.source_names) or tuple(f"row{i}" for i in range(len(X)))
        if len(sources) != len(X):
            raise InvalidArgument("source_names length must match the number of rows")
        X = np.ascontiguousarray(X)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "label_names", names)
        object.__setattr__(self, "source_names", sources)

    @classmethod
    def from_samples(cls, samples: Iterable[LabeledSample], label_names: Sequence[str],
                     feature_len: Optional[int] = None) -> "Dataset":
        samples = list(samples)
        if not samples:
            return cls(np.zeros((0, feature_len or 0), np.uint8), np.zeros(0, np.int64),
                       tuple(label_names), ())
        return cls(np.stack([np.asarray(s.features) for s in samples]),
                   np.array([s.label for s in samples]), tuple(label_names),
                   tuple(s.source_name for s in samples))

    def __len__(self) -> int:
        return len(self.y)

    def __getitem__(self, i: int) -> LabeledSample:
        return LabeledSample(self.X[i], int(self.y[i]), self.source_names[i])

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.label_names == other.label_names
                and self.X.shape == other.X.shape
                and np.array_equal(self.X, other.X)
                and np.array_equal(self.y, other.y))

    @property
    def feature_len(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes)

    def labels_text(self) -> list[str]:
        return [self.label_names[i] for i in self.y]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], self.label_names,
                       tuple(self.source_names[i] for i in idx))

    def with_labels(self, label_names: Sequence[str]) -> "Dataset":
        """Re-index labels against another vocabulary (e.g. a model's)."""
        lookup = {name: i for i, name in enumerate(label_names)}
        missing = sorted(set(self.labels_text()) - set(lookup))
        if missing:
            raise InvalidArgument(f"labels not in vocabulary: {', '.join(missing)}")
        y = np.array([lookup[self.label_names[i]] for i in self.y], dtype=np.int64)
        return Dataset(self.X, y, tuple(label_names), self.source_names)


def _check_label(name: str) -> None:
    if not name or "," in name or "\n" in name or "\r" in name or '"' in name:
        raise InvalidArgument(f"label {name!r} cannot be written to CSV")


def write_csv(dataset: Dataset) -> bytes:
    """Header ``f0,...,f{p-1},label``; one row per sample, label as text."""
    for name in dataset.label_names:
        _check_label(name)
    out = io.StringIO()
    out.write(",".join([f"f{j}" for j in range(dataset.feature_len)] + ["label"]))
    out.write("\n")
    names = dataset.label_names
    for row, label in zip(dataset.X.tolist(), dataset.y.tolist()):
        out.write(",".join(map(str, row)))
        out.write(",")
        out.write(names[label])
        out.write("\n")
    return out.getvalue().encode("utf-8")


def load_csv(data, label_names: Optional[Sequence[str]] = None) -> Dataset:
    """Parse the :func:`write_csv` format.

    Without ``label_names`` the vocabulary is the sorted set of labels seen.
    ``data`` may be bytes or text.  Errors carry 1-based line numbers.
    """
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc}") from None
    reader = csv.reader(io.StringIO(data))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty CSV (no header)", 1) from None
    feature_len = len(header) - 1
    expected = [f"f{j}" for j in range(feature_len)] + ["label"]
    if feature_len < 1 or header != expected:
        raise ParseError("header must be f0,...,f{n-1},label", 1)

    rows, labels = [], []
    for lineno, cells in enumerate(reader, 2):
        if not cells:
            continue
        if len(cells) != feature_len + 1:
            raise ParseError(f"expected {feature_len + 1} cells, found {len(cells)}", lineno)
        try:
            values = [int(c) for c in cells[:-1]]
        except ValueError:
            bad = next(c for c in cells[:-1] if not c.strip().lstrip("-").isdigit())
            raise ParseError(f"non-integer feature cell {bad!r}", lineno) from None
        if min(values) < 0 or max(values) > 255:
            raise ParseError("feature value outside [0, 255]", lineno)
        if not cells[-1]:
            raise ParseError("empty label", lineno)
        rows.append(values)
        labels.append(cells[-1])

    if label_names is None:
        label_names = sorted(set(labels))
    lookup = {name: i for i, name in enumerate(label_names)}
    y = np.empty(len(labels), dtype=np.int64)
    for i, name in enumerate(labels):
        if name not in lookup:
            raise ParseError(f"unknown label {name!r}", i + 2)
        y[i] = lookup[name]
    X = np.array(rows, dtype=np.uint8).reshape(len(rows), feature_len)
    return Dataset(X, y, tuple(label_names))


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def train_count(n_class: int, fraction: float) -> int:
    """Training-side count for a class of ``n_class`` samples."""
    return min(max(_round_half_up(fraction * n_class), 1), n_class - 1)


def _class_members(y: np.ndarray, n_classes: int) -> list[np.ndarray]:
    order = np.argsort(y, kind="stable")
    bounds = np.searchsorted(y[order], np.arange(n_classes + 1))
    return [order[bounds[c]:bounds[c + 1]] for c in range(n_classes)]


@dataclass(frozen=True)
class SplitResult:
    train: Dataset
    test: Dataset
    train_index: np.ndarray
    test_index: np.ndarray


def stratified_split(dataset: Dataset, train_fraction: float = 0.8, seed: int = 0) -> SplitResult:
    """Per-class seeded shuffle; the first ``train_count`` go to train.

    Every class present must have at least two samples so that both sides
    receive at least one.
    """
    if not 0.0 < train_fraction < 1.0:
        raise InvalidArgument(f"train fraction must lie in (0, 1), got {train_fraction}")
    train_idx, test_idx = [], []
    for c, members in enumerate(_class_members(dataset.y, dataset.n_classes)):
        if len(members) == 0:
            continue
        if len(members) < 2:
            raise StratificationError(
                f"class {dataset.label_names[c]!r} has {len(members)} sample; need >= 2")
        order = members[Rng.stream(seed, 0, c).permutation(len(members))]
        k = train_count(len(members), train_fraction)
        train_idx.append(order[:k])
        test_idx.append(order[k:])
    train_index = np.sort(np.concatenate(train_idx)) if train_idx else np.zeros(0, np.int64)
    test_index = np.sort(np.concatenate(test_idx)) if test_idx else np.zeros(0, np.int64)
    return SplitResult(dataset.subset(train_index), dataset.subset(test_index),
                       train_index, test_index)


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    fold_of: np.ndarray

    def members(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def complement(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)


def stratified_folds(dataset: Dataset, k: int = 10, seed: int = 0) -> FoldAssignment:
    """Stratified k-fold assignment.

    Each class is shuffled with its own seeded stream and dealt round-robin
    onto the folds.  The starting fold is derived from the seed and carries
    over from one class to the next so that overall fold sizes also stay
    within one of each other.
    """
    if k < 2:
        raise InvalidArgument(f"k must be >= 2, got {k}")
    fold_of = np.full(len(dataset), -1, dtype=np.int64)
    offset = derive(seed, 1) % k
    for c, members in enumerate(_class_members(dataset.y, dataset.n_classes)):
        if len(members) == 0:
            continue
        order = members[Rng.stream(seed, 1, c).permutation(len(members))]
        fold_of[order] = (offset + np.arange(len(order))) % k
        offset = (offset + len(order)) % k
    fold_of.setflags(write=False)
    return FoldAssignment(k, fold_of)
