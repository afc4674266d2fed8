#!/usr/bin/env python3
"""Build an ODDS-style `wine` table (129 x 13, 10 outliers) from UCI wine.

ODDS keeps UCI classes 2 and 3 as inliers (119 rows) and downsamples class 1
to 10 outliers. The ODDS selection of those 10 rows is not published alongside
the recipe, so this script draws them with a fixed seed; shapes match ODDS,
individual outlier rows may not.

usage: make_wine.py OUT_CSV
"""
import csv
import sys

import numpy as np
from sklearn.datasets import load_wine


def main(dst):
    d = load_wine()
    x, y = d.data, d.target
    inliers = np.flatnonzero(y != 0)
    rng = np.random.default_rng(1)
    outliers = np.sort(rng.choice(np.flatnonzero(y == 0), size=10, replace=False))
    idx = np.concatenate([inliers, outliers])
    labels = np.concatenate([np.zeros(len(inliers), int), np.ones(10, int)])
    names = [n.replace("/", "_") for n in d.feature_names]
    with open(dst, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + ["label"])
        for i, l in zip(idx, labels):
            w.writerow([repr(float(v)) for v in x[i]] + [l])
    print(f"{dst}: {len(idx)} rows, 10 outliers")


if __name__ == "__main__":
    main(sys.argv[1])
