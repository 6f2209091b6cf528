import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from binsight.dataset import Dataset
from binsight.errors import (InvalidArgument, ModelFormatError, NotApplicable,
                             ShapeMismatch)
from binsight.forest import (ForestConfig, ForestModel, best_split, bootstrap_sample, gini,
                             grow_tree, load_model, oob_accuracy, predict, predict_proba,
                             predict_tree, save_model, train_forest)
from binsight.rng import Rng

from conftest import separable_dataset
from oracles import cart_oracle, cart_predict


def _leaf_tree(counts):
    """Depth-0 tree whose single leaf holds exactly ``counts``."""
    y = np.repeat(np.arange(len(counts)), counts)
    X = np.zeros((len(y), 1), dtype=np.uint8)
    return grow_tree(X, y, len(counts), max_depth=0)


@pytest.mark.parametrize("counts,expected", [([10, 0], 0.0), ([5, 5], 0.5),
                                             ([1, 1, 2], 0.625), ([7], 0.0)])
def test_gini_examples(counts, expected):
    assert gini(counts) == expected


def test_gini_rejects_empty_node():
    with pytest.raises(InvalidArgument):
        gini([0, 0])
    with pytest.raises(InvalidArgument):
        gini([1, -1])


def test_best_split_one_dimensional_example(backend):
    X = [[0], [1], [10], [11]]
    split = best_split(X, [0, 0, 1, 1], [0], backend=backend)
    assert split.feature_index == 0
    assert split.threshold == 5.5
    assert split.gain == 0.5


def test_best_split_pure_node_has_none(backend):
    assert best_split([[0], [5], [9]], [1, 1, 1], [0], n_classes=2, backend=backend) is None


def test_best_split_ties_to_lowest_feature_then_threshold(backend):
    # both features separate the classes perfectly
    X = [[0, 0], [0, 0], [9, 9], [9, 9]]
    split = best_split(X, [0, 0, 1, 1], [1, 0], backend=backend)
    assert split.feature_index == 0
    # two equally good thresholds on one feature: lowest wins
    X = [[0], [5], [10]]
    split = best_split(X, [0, 1, 0], [0], backend=backend)
    assert split.threshold == 2.5


def test_best_split_respects_min_node_size(backend):
    X = [[0], [1], [2], [3]]
    y = [0, 1, 1, 1]
    assert best_split(X, y, [0], backend=backend).threshold == 0.5
    assert best_split(X, y, [0], min_node_size=2, backend=backend).threshold == 1.5
    assert best_split(X, y, [0], min_node_size=3, backend=backend) is None


def test_bootstrap_single_and_deterministic():
    assert bootstrap_sample(1, Rng(3)).tolist() == [0]
    assert np.array_equal(bootstrap_sample(50, Rng(9)), bootstrap_sample(50, Rng(9)))


def test_bootstrap_distinct_fraction_near_one_minus_inv_e():
    rng = Rng.stream(11, 0)
    fracs = [len(np.unique(bootstrap_sample(1000, rng))) / 1000 for _ in range(1000)]
    assert abs(np.mean(fracs) - (1 - np.exp(-1))) < 0.02


def test_grow_tree_single_class_is_one_leaf(backend):
    tree = grow_tree(np.arange(12).reshape(6, 2), [1] * 6, 3, backend=backend)
    assert tree.n_nodes == 1 and tree.depth() == 0
    assert tree.counts.tolist() == [[0, 6, 0]]


def test_grow_tree_depth_zero_keeps_full_counts(backend):
    X, y = np.arange(10).reshape(5, 2), [0, 1, 1, 2, 1]
    tree = grow_tree(X, y, 3, max_depth=0, backend=backend)
    assert tree.n_nodes == 1 and tree.counts.tolist() == [[1, 3, 1]]


def test_grow_tree_depth_limit(backend):
    ds = separable_dataset(100, 8, seed=2)
    y = (ds.X[:, 1] > 100).astype(int) + (ds.X[:, 2] > 150)
    tree = grow_tree(ds.X, y, 3, max_depth=2, backend=backend)
    assert tree.depth() <= 2


@given(st.integers(1, 10).flatmap(lambda n: st.tuples(
    st.lists(st.lists(st.integers(0, 4), min_size=2, max_size=2), min_size=n, max_size=n),
    st.lists(st.integers(0, 2), min_size=n, max_size=n))),
    st.integers(1, 3))
@settings(max_examples=80, deadline=None)
def test_grow_tree_matches_brute_force_cart(data, min_node):
    rows, labels = data
    oracle = cart_oracle(rows, labels, 3, min_node_size=min_node)
    tree = grow_tree(np.array(rows), labels, 3, min_node_size=min_node)
    grid = np.array([[a, b] for a in range(5) for b in range(5)])
    assert tree.predict(grid).tolist() == [cart_predict(oracle, g) for g in grid.tolist()]


def test_grow_tree_validates_arguments():
    X = np.zeros((3, 2))
    with pytest.raises(InvalidArgument):
        grow_tree(X, [0, 1, 0], 2, mtry=3)
    with pytest.raises(InvalidArgument):
        grow_tree(X, [0, 1, 0], 2, min_node_size=0)
    with pytest.raises(InvalidArgument):
        grow_tree(X, [0, 1, 0], 2, samples=[])


def test_grow_tree_advances_rng_only_when_sampling_features():
    ds = separable_dataset(60, 9, seed=1)
    rng = Rng(4)
    grow_tree(ds.X, ds.y, 2, rng=rng)
    assert rng.state == Rng(4).state
    grow_tree(ds.X, ds.y, 2, mtry=3, rng=rng)
    assert rng.state != Rng(4).state


def test_predict_tree_argmax_and_tie():
    assert predict_tree(_leaf_tree([3, 5]), [0]) == 1
    assert predict_tree(_leaf_tree([4, 4]), [0]) == 0
    with pytest.raises(ShapeMismatch):
        predict_tree(_leaf_tree([1, 1]), [0, 1], feature_len=1)


def test_train_forest_is_deterministic(separable):
    cfg = ForestConfig(n_trees=15, seed=3)
    assert save_model(train_forest(separable, cfg)) == save_model(train_forest(separable, cfg))
    other = train_forest(separable, ForestConfig(n_trees=15, seed=4))
    assert save_model(other) != save_model(train_forest(separable, cfg))


def test_thread_count_does_not_change_model(separable):
    cfg = ForestConfig(n_trees=12, seed=1)
    one = save_model(train_forest(separable, cfg, threads=1))
    assert save_model(train_forest(separable, cfg, threads=8)) == one


def test_backends_build_identical_forests(separable):
    from conftest import BACKENDS
    cfg = ForestConfig(n_trees=5, seed=2, min_node_size=2)
    blobs = {b: save_model(train_forest(separable, cfg, threads=1, backend=b)) for b in BACKENDS}
    assert len(set(blobs.values())) == 1


def test_separable_training_accuracy_is_perfect(separable):
    # the data are split by one threshold on feature 0
    assert separable.X[separable.y == 0, 0].max() < separable.X[separable.y == 1, 0].min()
    model = train_forest(separable, ForestConfig(n_trees=25, seed=0))
    assert np.array_equal(model.predict(separable.X), separable.y)


def test_oob_accuracy(separable):
    model = train_forest(separable, ForestConfig(n_trees=30, seed=0))
    assert oob_accuracy(model, separable) >= 0.9
    no_bag = train_forest(separable, ForestConfig(n_trees=2, bootstrap=False))
    with pytest.raises(NotApplicable):
        oob_accuracy(no_bag, separable)


def test_empty_dataset_is_rejected():
    with pytest.raises(InvalidArgument):
        train_forest(Dataset(np.zeros((0, 4)), [], ("a",)), ForestConfig(n_trees=1))


def test_forest_config_validation():
    for kwargs in ({"n_trees": 0}, {"mtry": 0}, {"min_node_size": 0}, {"max_depth": -1},
                   {"seed": -1}):
        with pytest.raises(InvalidArgument):
            ForestConfig(**kwargs)
    assert ForestConfig().resolved_mtry(1024) == 32
    with pytest.raises(InvalidArgument):
        ForestConfig(mtry=5).resolved_mtry(4)


def test_vote_tie_goes_to_lowest_class():
    trees = (_leaf_tree([0, 0, 3]),) * 250 + (_leaf_tree([3, 0, 0]),) * 250
    model = ForestModel(trees, ForestConfig(n_trees=500), ("a", "b", "c"), 1)
    assert predict(model, [0]) == 0
    assert predict_proba(model, [0]).tolist() == [0.5, 0.0, 0.5]


def test_unanimous_forest_and_proba_sums(separable):
    model = ForestModel((_leaf_tree([0, 2]),) * 7, ForestConfig(n_trees=7), ("a", "b"), 1)
    assert predict_proba(model, [9]).tolist() == [0.0, 1.0]
    trained = train_forest(separable, ForestConfig(n_trees=9))
    proba = trained.predict_proba(separable.X)
    assert np.allclose(proba.sum(axis=1), 1.0)
    assert np.array_equal(np.argmax(proba, axis=1), trained.predict(separable.X))


def test_model_rejects_wrong_feature_length(separable):
    model = train_forest(separable, ForestConfig(n_trees=2))
    with pytest.raises(ShapeMismatch):
        model.predict(np.zeros((1, 5)))


def test_more_trees_do_not_hurt_on_separable_data():
    train = separable_dataset(200, 16, seed=5)
    test = separable_dataset(200, 16, seed=6)
    acc = {n: np.mean(train_forest(train, ForestConfig(n_trees=n, seed=1)).predict(test.X)
                      == test.y) for n in (1, 101)}
    assert acc[101] >= acc[1]


def test_serialization_roundtrip(separable):
    model = train_forest(separable, ForestConfig(n_trees=10, seed=7, max_depth=6))
    blob = save_model(model)
    loaded = load_model(blob)
    assert save_model(loaded) == blob
    assert loaded.label_names == model.label_names and loaded.config == model.config
    vecs = np.random.default_rng(0).integers(0, 256, (100, separable.feature_len))
    assert np.array_equal(loaded.predict(vecs), model.predict(vecs))


def test_serialization_rejects_damage(separable):
    blob = save_model(train_forest(separable, ForestConfig(n_trees=3)))
    for cut in (0, 3, 10, len(blob) // 2, len(blob) - 1):
        with pytest.raises(ModelFormatError):
            load_model(blob[:cut])
    with pytest.raises(ModelFormatError):
        load_model(b"XXXX" + blob[4:])
    with pytest.raises(ModelFormatError):
        load_model(blob[:4] + b"\x63\x00" + blob[6:])
    with pytest.raises(ModelFormatError):
        load_model(blob + b"\x00")
