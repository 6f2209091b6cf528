"""Single CART classification trees over byte-valued features."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

import numpy as np

from ..errors import InvalidArgument, ShapeMismatch
from ..rng import Rng
from ._backend import get_kernel


def gini(class_counts: Sequence[int]) -> float:
    """Gini impurity ``1 - sum(p_c**2)`` of a node with these class counts."""
    counts = [int(c) for c in class_counts]
    if any(c < 0 for c in counts):
        raise InvalidArgument("class counts must be nonnegative")
    total = sum(counts)
    if total == 0:
        raise InvalidArgument("gini of an empty node is undefined")
    return float(1 - Fraction(sum(c * c for c in counts), total * total))


class SplitInfo(NamedTuple):
    feature_index: int
    threshold: float
    gain: float


def _as_features(X) -> np.ndarray:
    X = np.asarray(X)
    if X.ndim != 2:
        raise ShapeMismatch(f"feature matrix must be 2-D, got shape {X.shape}")
    if X.dtype != np.uint8:
        if X.size and (X.min() < 0 or X.max() > 255 or not np.all(X == np.round(X))):
            raise InvalidArgument("features must be integers in [0, 255]")
        X = X.astype(np.uint8)
    return np.ascontiguousarray(X)


def best_split(X, y, feature_subset, n_classes: Optional[int] = None,
               min_node_size: int = 1, samples=None, backend=None) -> Optional[SplitInfo]:
    """Gini-optimal ``feature <= threshold`` split, or ``None`` if no gain.

    Thresholds are midpoints between consecutive distinct values.  Ties go
    to the lowest feature index, then the lowest threshold.  ``samples``
    selects (possibly repeated) rows of ``X``; all rows by default.
    """
    X = _as_features(X)
    y = np.ascontiguousarray(y, dtype=np.int64)
    k = int(n_classes if n_classes is not None else y.max() + 1)
    idx = np.arange(len(y), dtype=np.int64) if samples is None else np.asarray(samples, np.int64)
    feats = np.ascontiguousarray(sorted(set(int(f) for f in feature_subset)), dtype=np.int64)
    if len(feats) == 0:
        raise InvalidArgument("feature subset is empty")
    found = get_kernel(backend).find_split(X, y, np.ascontiguousarray(idx), feats, k,
                                           min_node_size)
    if found is None:
        return None
    f, lo, hi, _, num, den = found
    m = len(idx)
    s_total = int((np.bincount(y[idx], minlength=k).astype(np.int64) ** 2).sum())
    gain = (Fraction(num, den) - Fraction(s_total, m)) / m
    return SplitInfo(f, (lo + hi) / 2.0, float(gain))


def bootstrap_sample(n: int, rng: Rng) -> np.ndarray:
    """``n`` indices drawn uniformly with replacement from ``range(n)``."""
    if n < 1:
        raise InvalidArgument("bootstrap needs n >= 1")
    return rng.randbelow_array(n, n)


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat preorder tree.

    ``feature[i] == -1`` marks a leaf, whose class counts are
    ``counts[leaf[i]]``.  Internal nodes send ``x[feature] <= threshold``
    to ``left[i]`` (always ``i + 1``) and the rest to ``right[i]``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        for name in ("feature", "threshold", "left", "right", "leaf", "counts"):
            getattr(self, name).setflags(write=False)
        node_class = np.full(len(self.feature), -1, dtype=np.int64)
        is_leaf = self.leaf >= 0
        # argmax returns the first maximum: ties go to the lowest class.
        node_class[is_leaf] = np.argmax(self.counts, axis=1)[self.leaf[is_leaf]]
        node_class.setflags(write=False)
        object.__setattr__(self, "node_class", node_class)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return len(self.counts)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[1]

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def __eq__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented
        return all(np.array_equal(getattr(self, n), getattr(other, n))
                   for n in ("feature", "threshold", "left", "right", "leaf", "counts"))

    def apply(self, X, backend=None) -> np.ndarray:
        X = _as_features(X)
        return get_kernel(backend).apply_tree(self.feature, self.threshold, self.left,
                                              self.right, X)

    def predict(self, X, backend=None) -> np.ndarray:
        return self.node_class[self.apply(X, backend)]


def grow_tree(X, y, n_classes: int, mtry: Optional[int] = None, min_node_size: int = 1,
              max_depth: Optional[int] = None, rng: Optional[Rng] = None,
              samples=None, backend=None) -> Tree:
    """Grow one tree on ``samples`` (rows of ``X``, repeats allowed).

    ``mtry`` features are drawn afresh at every node from ``rng``; the
    default ``mtry`` considers all features and consumes no randomness.
    The generator's state is advanced in place.
    """
    X = _as_features(X)
    y = np.ascontiguousarray(y, dtype=np.int64)
    p = X.shape[1]
    mtry = p if mtry is None else int(mtry)
    if not 1 <= mtry <= p:
        raise InvalidArgument(f"mtry must lie in [1, {p}], got {mtry}")
    if min_node_size < 1:
        raise InvalidArgument("min_node_size must be >= 1")
    if max_depth is not None and max_depth < 0:
        raise InvalidArgument("max_depth must be >= 0")
    idx = np.arange(len(y), dtype=np.int64) if samples is None else np.asarray(samples, np.int64)
    if len(idx) == 0:
        raise InvalidArgument("cannot grow a tree on zero samples")
    rng = rng if rng is not None else Rng(0)
    *arrays, state = get_kernel(backend).build_tree(
        X, y, np.ascontiguousarray(idx), int(n_classes), mtry, int(min_node_size),
        -1 if max_depth is None else int(max_depth), rng.state)
    rng.state = int(state)
    return Tree(*arrays)


def predict_tree(tree: Tree, features, feature_len: Optional[int] = None, backend=None) -> int:
    """Class index for one feature vector."""
    vec = np.asarray(features)
    if vec.ndim != 1:
        raise ShapeMismatch("expected a single feature vector")
    if feature_len is not None and vec.size != feature_len:
        raise ShapeMismatch(f"expected {feature_len} features, got {vec.size}")
    if tree.feature.max(initial=-1) >= vec.size:
        raise ShapeMismatch(f"tree uses feature {int(tree.feature.max())}, "
                            f"vector has length {vec.size}")
    return int(tree.predict(vec[None, :], backend)[0])
