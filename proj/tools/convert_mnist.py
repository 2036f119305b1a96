#!/usr/bin/env python3
"""Convert per-digit JSON pixel dumps into IDX image/label files.

Input: a directory with 0.json .. 9.json, each {"data": [v, ...]} holding a
flat list of 28x28 images in row-major order with values in [0, 1] (the layout
shipped by the npm "mnist" package). Output: train/t10k IDX pairs, train taking
the first --train-per-class images of every class and t10k the rest.
"""

import argparse
import json
import pathlib
import struct


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">iiii", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(min(255, max(0, round(v * 255))) for v in img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">ii", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--src", required=True, help="directory with 0.json..9.json")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--train-per-class", type=int, default=800)
    args = ap.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    train_images, train_labels = [], []
    test_images, test_labels = [], []
    for digit in range(10):
        flat = json.load(open(pathlib.Path(args.src) / f"{digit}.json"))["data"]
        assert len(flat) % 784 == 0, f"digit {digit}: ragged pixel count"
        images = [flat[i * 784:(i + 1) * 784] for i in range(len(flat) // 784)]
        cut = args.train_per_class
        assert len(images) > cut, f"digit {digit}: only {len(images)} images"
        train_images += images[:cut]
        train_labels += [digit] * cut
        test_images += images[cut:]
        test_labels += [digit] * (len(images) - cut)

    write_images(out / "train-images-idx3-ubyte", train_images)
    write_labels(out / "train-labels-idx1-ubyte", train_labels)
    write_images(out / "t10k-images-idx3-ubyte", test_images)
    write_labels(out / "t10k-labels-idx1-ubyte", test_labels)
    print(f"train: {len(train_images)} images, test: {len(test_images)} images")


if __name__ == "__main__":
    main()
