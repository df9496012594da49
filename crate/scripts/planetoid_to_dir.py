#!/usr/bin/env python3
"""Convert a raw Planetoid dataset (ind.<name>.* pickles) to the sdss directory format.

    python3 scripts/planetoid_to_dir.py RAW_DIR cora OUT_DIR

RAW_DIR holds ind.cora.x, .y, .tx, .ty, .allx, .ally, .graph and .test.index
as distributed with the public Planetoid split. The output directory gets
graph.txt, features.txt, labels.txt and split.txt (140/500/1000 for Cora).
"""

import argparse
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load_pickle(path):
    with open(path, "rb") as f:
        return pickle.load(f, encoding="latin1")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("raw_dir", type=Path)
    ap.add_argument("name")
    ap.add_argument("out_dir", type=Path)
    args = ap.parse_args()

    part = {k: load_pickle(args.raw_dir / f"ind.{args.name}.{k}") for k in ["x", "y", "tx", "ty", "allx", "ally", "graph"]}
    test_idx = [int(line) for line in (args.raw_dir / f"ind.{args.name}.test.index").read_text().split()]
    test_sorted = np.sort(test_idx)

    tx, ty = part["tx"], part["ty"]
    if args.name == "citeseer":
        # isolated test nodes have no row in tx/ty; pad them with zeros
        full = range(test_sorted.min(), test_sorted.max() + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[test_sorted - test_sorted.min(), :] = tx
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[test_sorted - test_sorted.min(), :] = ty
        tx, ty = tx_ext, ty_ext

    features = sp.vstack((part["allx"], tx)).tolil()
    features[test_idx, :] = features[test_sorted, :]
    labels_1h = np.vstack((part["ally"], ty))
    labels_1h[test_idx, :] = labels_1h[test_sorted, :]

    n = features.shape[0]
    has_label = labels_1h.sum(axis=1) > 0
    labels = np.where(has_label, labels_1h.argmax(axis=1), 0)
    classes = labels_1h.shape[1]

    edges = set()
    for u, nbrs in part["graph"].items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))
    edges = sorted(edges)

    n_train = len(part["y"])
    split = {
        "train": list(range(n_train)),
        "val": list(range(n_train, n_train + 500)),
        "test": [int(i) for i in test_sorted if has_label[i]],
    }

    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "graph.txt", "w") as f:
        f.write(f"{n} {len(edges)}\n")
        f.writelines(f"{u} {v}\n" for u, v in edges)
    dense = features.toarray()
    with open(out / "features.txt", "w") as f:
        f.write(f"{n} {dense.shape[1]}\n")
        for row in dense:
            f.write(" ".join(repr(float(x)) for x in row) + "\n")
    with open(out / "labels.txt", "w") as f:
        f.write(f"{n} {classes}\n")
        f.writelines(f"{c}\n" for c in labels)
    with open(out / "split.txt", "w") as f:
        for k in ["train", "val", "test"]:
            f.write(f"{k}: " + " ".join(map(str, split[k])) + "\n")
    print(f"{args.name}: {n} nodes, {len(edges)} edges, {dense.shape[1]} features, {classes} classes, "
          f"split {len(split['train'])}/{len(split['val'])}/{len(split['test'])}", file=sys.stderr)


if __name__ == "__main__":
    main()
