#!/usr/bin/env python3
"""Build the 1/6/7 MNIST subset in IDX format.

Reads the per-digit JSON files shipped in the `mnist` npm package
(src/digits/<d>.json, each {"data": [784 * count floats in 0..1]}) and writes
train/t10k image and label files with the standard MNIST names. Each digit is
split 80/20 in file order; samples are interleaved across digits.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 scripts/mnist_subset.py package/src/digits data/mnist167
"""

import argparse
import json
import struct
from pathlib import Path

PIXELS = 28 * 28


def load_digit(src: Path, digit: int) -> list[bytes]:
    flat = json.loads((src / f"{digit}.json").read_text())["data"]
    if len(flat) % PIXELS:
        raise SystemExit(f"{digit}.json: {len(flat)} values is not a multiple of {PIXELS}")
    return [
        bytes(min(255, max(0, round(v * 255))) for v in flat[i : i + PIXELS])
        for i in range(0, len(flat), PIXELS)
    ]


def interleave(per_digit: dict[int, list[bytes]]) -> list[tuple[int, bytes]]:
    out = []
    longest = max(len(v) for v in per_digit.values())
    for i in range(longest):
        for d, imgs in per_digit.items():
            if i < len(imgs):
                out.append((d, imgs[i]))
    return out


def write_idx(dst: Path, prefix: str, samples: list[tuple[int, bytes]]) -> None:
    with open(dst / f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(samples), 28, 28))
        for _, img in samples:
            f.write(img)
    with open(dst / f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(samples)))
        f.write(bytes(d for d, _ in samples))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("src", type=Path, help="directory holding <digit>.json files")
    ap.add_argument("dst", type=Path)
    ap.add_argument("--digits", type=int, nargs="+", default=[1, 6, 7])
    ap.add_argument("--train-fraction", type=float, default=0.8)
    args = ap.parse_args()

    train, test = {}, {}
    for d in args.digits:
        imgs = load_digit(args.src, d)
        cut = int(len(imgs) * args.train_fraction)
        train[d], test[d] = imgs[:cut], imgs[cut:]
    args.dst.mkdir(parents=True, exist_ok=True)
    write_idx(args.dst, "train", interleave(train))
    write_idx(args.dst, "t10k", interleave(test))
    for d in args.digits:
        print(f"digit {d}: {len(train[d])} train, {len(test[d])} test")


if __name__ == "__main__":
    main()
