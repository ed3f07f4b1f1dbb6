#!/usr/bin/env python3
"""Build MNIST IDX files from the per-digit JSON files of the `mnist` npm package.

Usage: mnist_from_npm.py DIGITS_DIR OUT_DIR [--train N] [--seed S]

DIGITS_DIR holds 0.json .. 9.json, each {"data": [...]} with 784 values in
[0, 1] per image. Images are shuffled with a fixed seed, the first N go to
the training split and the rest to the test split.
"""

import argparse
import json
import random
import struct
from pathlib import Path


def write_idx(out_dir, prefix, images, labels):
    with open(out_dir / f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))
    with open(out_dir / f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir", type=Path)
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--train", type=int, default=8000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    samples = []
    for digit in range(10):
        data = json.loads((args.digits_dir / f"{digit}.json").read_text())["data"]
        for i in range(0, len(data) - 783, 784):
            pixels = [min(255, max(0, round(v * 255))) for v in data[i : i + 784]]
            samples.append((pixels, digit))
    random.Random(args.seed).shuffle(samples)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    train, test = samples[: args.train], samples[args.train :]
    write_idx(args.out_dir, "train", [s[0] for s in train], [s[1] for s in train])
    write_idx(args.out_dir, "t10k", [s[0] for s in test], [s[1] for s in test])
    print(f"wrote {len(train)} training and {len(test)} test images to {args.out_dir}")


if __name__ == "__main__":
    main()
