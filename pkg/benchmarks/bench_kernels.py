"""Compare the compiled and pure-Python tree kernels.

    python3 benchmarks/bench_kernels.py [--samples 800] [--trees 10]

Times tree growth and forest voting on the same data with each available
kernel and checks that both produce identical models.
"""

import argparse
import time

import numpy as np

from binsight.dataset import Dataset
from binsight.forest import ForestConfig, save_model, train_forest
from binsight.forest._backend import KERNELS


def make_data(n, p, k, seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, k, n)
    # class-dependent byte patterns plus noise, roughly like featurized binaries
    centers = rng.integers(0, 256, (k, p))
    X = np.where(rng.random((n, p)) < 0.7, centers[y], rng.integers(0, 256, (n, p)))
    return Dataset(X.astype(np.uint8), y, tuple(f"c{i}" for i in range(k)))


def timed(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=800)
    ap.add_argument("--features", type=int, default=1024)
    ap.add_argument("--classes", type=int, default=5)
    ap.add_argument("--trees", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ds = make_data(args.samples, args.features, args.classes, args.seed)
    cfg = ForestConfig(n_trees=args.trees, seed=args.seed)
    print(f"data: {args.samples} x {args.features}, {args.classes} classes; "
          f"{args.trees} trees, mtry={cfg.resolved_mtry(args.features)}, 1 thread")

    rows, blobs = [], {}
    for name in sorted(KERNELS):
        fit_s, model = timed(lambda: train_forest(ds, cfg, threads=1, backend=name), args.repeat)
        vote_s, _ = timed(lambda: model.votes(ds.X, backend=name), args.repeat)
        blobs[name] = save_model(model)
        rows.append((name, fit_s, vote_s))

    base = {r[0]: r for r in rows}.get("python")
    print(f"{'kernel':<10}{'train s':>10}{'s/tree':>10}{'vote s':>10}{'train x':>10}{'vote x':>10}")
    for name, fit_s, vote_s in rows:
        fx = base[1] / fit_s if base else float("nan")
        vx = base[2] / vote_s if base else float("nan")
        print(f"{name:<10}{fit_s:>10.3f}{fit_s / args.trees:>10.4f}{vote_s:>10.4f}"
              f"{fx:>10.1f}{vx:>10.1f}")
    same = len(set(blobs.values())) == 1
    print("models identical across kernels:", "yes" if same else "NO")
    return 0 if same else 1


if __name__ == "__main__":
    raise SystemExit(main())
