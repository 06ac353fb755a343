#!/usr/bin/env python3
# Copyright 2026 The mrcl Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Exports the UCI 8x8 handwritten digits bundled with scikit-learn as IDX files.

Pixel intensities 0..16 are rescaled to 0..255. The split is stratified 80/20
with a fixed seed so the files are reproducible.
"""
import pathlib
import struct
import sys

import numpy as np
from sklearn.datasets import load_digits


def write_idx(path, array, magic):
    with open(path, "wb") as f:
        f.write(struct.pack(">I", magic))
        for d in array.shape:
            f.write(struct.pack(">I", d))
        f.write(array.astype(np.uint8).tobytes())


def main(out_dir):
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digits = load_digits()
    images = np.rint(digits.images * (255.0 / 16.0)).astype(np.uint8)
    labels = digits.target.astype(np.uint8)
    rng = np.random.default_rng(20230717)
    train_idx, test_idx = [], []
    for c in range(10):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        n_test = len(idx) // 5
        test_idx.extend(idx[:n_test])
        train_idx.extend(idx[n_test:])
    train_idx = rng.permutation(np.array(train_idx))
    test_idx = rng.permutation(np.array(test_idx))
    write_idx(out / "train-images-idx3-ubyte", images[train_idx], 0x00000803)
    write_idx(out / "train-labels-idx1-ubyte", labels[train_idx], 0x00000801)
    write_idx(out / "test-images-idx3-ubyte", images[test_idx], 0x00000803)
    write_idx(out / "test-labels-idx1-ubyte", labels[test_idx], 0x00000801)
    print(f"train={len(train_idx)} test={len(test_idx)}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/digits")
