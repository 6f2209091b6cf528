import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from binsight.dataset import (Dataset, load_csv, stratified_folds, stratified_split,
                              train_count, write_csv)
from binsight.errors import InvalidArgument, ParseError, StratificationError


def _toy(counts, p=4, seed=0):
    rng = np.random.default_rng(seed)
    y = np.repeat(np.arange(len(counts)), counts)
    X = rng.integers(0, 256, (len(y), p))
    return Dataset(X, y, tuple(f"fam{c}" for c in range(len(counts))))


def test_csv_roundtrip_is_exact():
    ds = _toy([3, 5, 2], p=6)
    text = write_csv(ds)
    assert text.splitlines()[0] == b"f0,f1,f2,f3,f4,f5,label"
    assert load_csv(text) == ds
    assert write_csv(load_csv(text)) == text


def test_csv_vocabulary_defaults_to_sorted_labels():
    ds = load_csv("f0,label\n1,zeta\n2,alpha\n")
    assert ds.label_names == ("alpha", "zeta")
    assert ds.y.tolist() == [1, 0]
    fixed = load_csv("f0,label\n1,zeta\n", label_names=["zeta", "alpha"])
    assert fixed.y.tolist() == [0]


@pytest.mark.parametrize("text,line", [
    ("f0,f1,label\n1,2,a\n3,a\n", 3),
    ("f0,label\n1,a\nx,b\n", 3),
    ("f0,label\n256,a\n", 2),
    ("f0,label\n-1,a\n", 2),
    ("g0,label\n1,a\n", 1),
    ("f0,label\n1,\n", 2),
])
def test_csv_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError, match=f"line {line}"):
        load_csv(text)


def test_csv_unknown_label_with_fixed_vocabulary():
    with pytest.raises(ParseError, match="line 3"):
        load_csv("f0,label\n1,a\n2,b\n", label_names=["a"])


def test_csv_rejects_unwritable_label():
    ds = Dataset(np.zeros((1, 1)), [0], ("a,b",))
    with pytest.raises(InvalidArgument):
        write_csv(ds)


def test_dataset_validation():
    with pytest.raises(InvalidArgument):
        Dataset(np.zeros((2, 3)), [0], ("a",))
    with pytest.raises(InvalidArgument):
        Dataset(np.full((1, 2), 300), [0], ("a",))
    with pytest.raises(InvalidArgument):
        Dataset(np.zeros((1, 2)), [1], ("a",))
    ds = _toy([2, 2])
    with pytest.raises(ValueError):
        ds.X[0, 0] = 1


def test_train_count_rounds_half_up_and_clamps():
    assert train_count(80, 0.8) == 64
    assert train_count(5, 0.5) == 3
    assert train_count(2, 0.8) == 1
    assert train_count(2, 0.1) == 1
    assert train_count(3, 0.99) == 2


def test_split_80_samples_gives_64_and_16():
    res = stratified_split(_toy([80]), 0.8, seed=1)
    assert (len(res.train), len(res.test)) == (64, 16)


def test_split_class_of_two_goes_one_each_side():
    res = stratified_split(_toy([2, 10]), 0.8, seed=0)
    assert res.train.class_counts().tolist() == [1, 8]
    assert res.test.class_counts().tolist() == [1, 2]


def test_split_errors():
    with pytest.raises(StratificationError):
        stratified_split(_toy([1, 5]), 0.8)
    for bad in (0.0, 1.0, -0.5, 1.5):
        with pytest.raises(InvalidArgument):
            stratified_split(_toy([4]), bad)


def test_split_is_deterministic_and_seed_sensitive():
    ds = _toy([30, 20, 10])
    a = stratified_split(ds, 0.7, seed=5)
    b = stratified_split(ds, 0.7, seed=5)
    c = stratified_split(ds, 0.7, seed=6)
    assert np.array_equal(a.train_index, b.train_index)
    assert not np.array_equal(a.train_index, c.train_index)


@given(st.lists(st.integers(2, 30), min_size=1, max_size=6),
       st.floats(0.05, 0.95), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_split_partitions_and_stratifies(counts, fraction, seed):
    ds = _toy(counts)
    res = stratified_split(ds, fraction, seed)
    both = np.concatenate([res.train_index, res.test_index])
    assert sorted(both.tolist()) == list(range(len(ds)))
    assert not set(res.train_index) & set(res.test_index)
    for c, n in enumerate(counts):
        assert res.train.class_counts()[c] == train_count(n, fraction)
    assert np.all(np.diff(res.train_index) > 0)


def test_ten_samples_ten_folds_one_each():
    folds = stratified_folds(_toy([10]), 10, seed=0)
    assert sorted(folds.fold_of.tolist()) == list(range(10))


def test_23_samples_10_folds_sizes():
    folds = stratified_folds(_toy([23]), 10, seed=3)
    sizes = sorted(len(folds.members(f)) for f in range(10))
    assert sizes == [2] * 7 + [3] * 3


@given(st.lists(st.integers(1, 25), min_size=1, max_size=5),
       st.integers(2, 10), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_folds_partition_and_balance(counts, k, seed):
    ds = _toy(counts)
    folds = stratified_folds(ds, k, seed)
    assert folds.fold_of.min() >= 0 and folds.fold_of.max() < k
    for f in range(k):
        assert len(folds.members(f)) + len(folds.complement(f)) == len(ds)
    sizes = [len(folds.members(f)) for f in range(k)]
    assert max(sizes) - min(sizes) <= 1
    for c in range(len(counts)):
        per = np.bincount(folds.fold_of[ds.y == c], minlength=k)
        assert per.max() - per.min() <= 1


def test_folds_reject_small_k():
    with pytest.raises(InvalidArgument):
        stratified_folds(_toy([5]), 1)


def test_subset_and_relabel():
    ds = _toy([2, 3])
    sub = ds.subset([4, 0])
    assert sub.y.tolist() == [1, 0]
    moved = ds.with_labels(("fam1", "fam0", "extra"))
    assert moved.labels_text() == ds.labels_text()
    with pytest.raises(InvalidArgument):
        ds.with_labels(("fam0",))
