#!/usr/bin/env python3
"""Convert the 5,000-image MNIST sample shipped with mlxtend into IDX files.

Usage: make_mnist5k.py <mnist_5k.csv.gz> <out_dir>

The sample holds 500 images per digit. Per digit, 400 go to the training
split and 100 to the test split; each split is then shuffled with a fixed
seed so that any prefix is close to class-balanced.
"""
import gzip
import struct
import sys

import numpy as np


def write_idx_images(path, images):
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    src, out = sys.argv[1], sys.argv[2]
    table = np.loadtxt(gzip.open(src), delimiter=",")
    pixels = table[:, :-1].astype(np.uint8).reshape(-1, 28, 28)
    labels = table[:, -1].astype(np.int64)

    train_idx, test_idx = [], []
    for digit in range(10):
        idx = np.flatnonzero(labels == digit)
        train_idx.extend(idx[:400])
        test_idx.extend(idx[400:])
    rng = np.random.RandomState(0)
    train_idx = rng.permutation(train_idx)
    test_idx = rng.permutation(test_idx)

    write_idx_images(f"{out}/train-images-idx3-ubyte", pixels[train_idx])
    write_idx_labels(f"{out}/train-labels-idx1-ubyte", labels[train_idx])
    write_idx_images(f"{out}/t10k-images-idx3-ubyte", pixels[test_idx])
    write_idx_labels(f"{out}/t10k-labels-idx1-ubyte", labels[test_idx])


if __name__ == "__main__":
    main()
