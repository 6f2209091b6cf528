"""From-scratch random forest classifier (Gini CART + bagging)."""

from ._backend import get_kernel, kernel_name
from .model import (ForestConfig, ForestModel, oob_accuracy, predict, predict_proba,
                    thread_count, train_forest)
from .serialize import load_model, save_model
from .tree import SplitInfo, Tree, best_split, bootstrap_sample, gini, grow_tree, predict_tree

__all__ = [
    "ForestConfig", "ForestModel", "SplitInfo", "Tree", "best_split", "bootstrap_sample",
    "get_kernel", "gini", "grow_tree", "kernel_name", "load_model", "oob_accuracy",
    "predict", "predict_proba", "predict_tree", "save_model", "thread_count", "train_forest",
]
