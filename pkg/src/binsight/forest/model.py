"""Random forest: bagged CART trees with per-node feature subsampling."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ..dataset import Dataset
from ..errors import InvalidArgument, NotApplicable, ShapeMismatch
from ..rng import Rng
from ._backend import get_kernel
from .tree import Tree, _as_features, bootstrap_sample, grow_tree

# Stream tag for per-tree generators: tree t uses Rng.stream(seed, TREE_STREAM, t).
TREE_STREAM = 5


def thread_count(threads: Optional[int] = None) -> int:
    if threads is None:
        env = os.environ.get("BINSIGHT_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 500
    mtry: Optional[int] = None  # None -> floor(sqrt(feature_len))
    min_node_size: int = 1
    max_depth: Optional[int] = None
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise InvalidArgument("n_trees must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise InvalidArgument("mtry must be >= 1")
        if self.min_node_size < 1:
            raise InvalidArgument("min_node_size must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise InvalidArgument("max_depth must be >= 0")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidArgument("seed must fit in 64 unsigned bits")

    def resolved_mtry(self, feature_len: int) -> int:
        mtry = self.mtry if self.mtry is not None else max(1, math.isqrt(feature_len))
        if mtry > feature_len:
            raise InvalidArgument(f"mtry {mtry} exceeds feature length {feature_len}")
        return mtry


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple
    config: ForestConfig
    label_names: tuple
    feature_len: int

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    def _matrix(self, X) -> np.ndarray:
        X = np.asarray(X)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.feature_len:
            got = X.shape[-1] if X.ndim else 0
            raise ShapeMismatch(f"model expects {self.feature_len} features, got {got}")
        return _as_features(X)

    def votes(self, X, backend=None) -> np.ndarray:
        X = self._matrix(X)
        kernel = get_kernel(backend)
        votes = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
        for t in self.trees:
            kernel.add_votes(t.feature, t.threshold, t.left, t.right, t.node_class, X, votes)
        return votes

    def predict(self, X, backend=None) -> np.ndarray:
        """Majority vote per row; ties go to the lowest class index."""
        return np.argmax(self.votes(X, backend), axis=1)

    def predict_proba(self, X, backend=None) -> np.ndarray:
        return self.votes(X, backend) / len(self.trees)


def _tree_samples(n: int, config: ForestConfig, t: int) -> tuple[np.ndarray, Rng]:
    rng = Rng.stream(config.seed, TREE_STREAM, t)
    if config.bootstrap:
        return bootstrap_sample(n, rng), rng
    return np.arange(n, dtype=np.int64), rng


def train_forest(train: Dataset, config: ForestConfig = ForestConfig(),
                 threads: Optional[int] = None, backend=None) -> ForestModel:
    """Fit ``config.n_trees`` trees, each on its own derived RNG stream.

    The result depends only on ``(train, config)``; ``threads`` (default
    ``BINSIGHT_THREADS`` or the CPU count) changes speed, never the model.
    """
    if len(train) == 0:
        raise InvalidArgument("cannot train on an empty dataset")
    mtry = config.resolved_mtry(train.feature_len)
    X, y, k = train.X, train.y, train.n_classes
    get_kernel(backend)  # fail fast on an unknown backend

    def fit(t: int) -> Tree:
        samples, rng = _tree_samples(len(train), config, t)
        return grow_tree(X, y, k, mtry, config.min_node_size, config.max_depth, rng,
                         samples=samples, backend=backend)

    n_threads = min(thread_count(threads), config.n_trees)
    if n_threads == 1:
        trees = [fit(t) for t in range(config.n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            trees = list(pool.map(fit, range(config.n_trees)))
    return ForestModel(tuple(trees), config, train.label_names, train.feature_len)


def predict(model: ForestModel, features) -> int:
    return int(model.predict(features)[0])


def predict_proba(model: ForestModel, features) -> np.ndarray:
    return model.predict_proba(features)[0]


def oob_accuracy(model: ForestModel, train: Dataset) -> float:
    """Out-of-bag accuracy on the dataset the model was trained on.

    In-bag sets are regenerated from the model's seed, so this also works
    for a model loaded from disk.  Samples that were in every tree's bag
    are left out of the denominator.
    """
    if not model.config.bootstrap:
        raise NotApplicable("out-of-bag accuracy needs bootstrap sampling")
    if train.feature_len != model.feature_len:
        raise ShapeMismatch(f"model expects {model.feature_len} features, "
                            f"got {train.feature_len}")
    n = len(train)
    votes = np.zeros((n, model.n_classes), dtype=np.int64)
    for t, tree in enumerate(model.trees):
        samples, _ = _tree_samples(n, model.config, t)
        oob = np.ones(n, dtype=bool)
        oob[samples] = False
        rows = np.flatnonzero(oob)
        if rows.size:
            cls = tree.predict(train.X[rows])
            np.add.at(votes, (rows, cls), 1)
    voted = votes.sum(axis=1) > 0
    if not voted.any():
        raise NotApplicable("no sample was ever out of bag")
    pred = np.argmax(votes[voted], axis=1)
    return float(np.mean(pred == train.y[voted]))


def with_seed(config: ForestConfig, seed: int) -> ForestConfig:
    return replace(config, seed=seed)
