#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Convert the digit JSON bundled with the `mnist` npm package into gzipped MNIST IDX files.

The package ships 10,000 MNIST digits as ``src/digits/{0..9}.json``, each holding a
flat ``data`` array of 28x28 grayscale values in [0, 1]. Per class, the first
``--train-fraction`` of the samples go to the training split and the rest to the
test split. Samples are interleaved round-robin across classes so that any prefix of
either split is roughly class balanced.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_idx.py package/src/digits data/mnist
"""
import argparse
import gzip
import json
import pathlib
import struct

SIDE = 28
PIXELS = SIDE * SIDE


def load_class(path):
    values = json.loads(path.read_text())["data"]
    if len(values) % PIXELS:
        raise SystemExit(f"{path}: length {len(values)} is not a multiple of {PIXELS}")
    samples = []
    for start in range(0, len(values), PIXELS):
        chunk = values[start:start + PIXELS]
        samples.append(bytes(min(255, max(0, int(v * 255.0 + 0.5))) for v in chunk))
    return samples


def interleave(per_class):
    out = []
    longest = max(len(s) for s in per_class)
    for k in range(longest):
        for label, samples in enumerate(per_class):
            if k < len(samples):
                out.append((label, samples[k]))
    return out


def write_idx(directory, prefix, records):
    images = directory / f"{prefix}-images-idx3-ubyte.gz"
    labels = directory / f"{prefix}-labels-idx1-ubyte.gz"
    # mtime=0 keeps the output byte-reproducible
    with gzip.GzipFile(images, "wb", compresslevel=9, mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, len(records), SIDE, SIDE))
        for _, pixels in records:
            f.write(pixels)
    with gzip.GzipFile(labels, "wb", compresslevel=9, mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(records)))
        f.write(bytes(label for label, _ in records))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("digits_dir", type=pathlib.Path)
    parser.add_argument("out_dir", type=pathlib.Path)
    parser.add_argument("--train-fraction", type=float, default=0.8)
    args = parser.parse_args()

    classes = [load_class(args.digits_dir / f"{d}.json") for d in range(10)]
    train, test = [], []
    for samples in classes:
        cut = int(len(samples) * args.train_fraction)
        train.append(samples[:cut])
        test.append(samples[cut:])

    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_idx(args.out_dir, "train", interleave(train))
    write_idx(args.out_dir, "t10k", interleave(test))
    print(f"train={sum(map(len, train))} test={sum(map(len, test))} -> {args.out_dir}")


if __name__ == "__main__":
    main()
