#!/usr/bin/env python3
"""Builds the bundled `digits` dataset: scikit-learn's 8x8 handwritten
digits upscaled bilinearly to 28x28 and written as gzipped IDX files with
the conventional train/t10k names. Run from the repository root:

    python3 tools/prep_digits.py data/digits
"""

import gzip
import struct
import sys
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits


def upscale_bilinear(img8: np.ndarray, out_size: int = 28) -> np.ndarray:
    src = img8.astype(np.float64)
    n = src.shape[0]
    # Sample positions mapped so the corners align (classic bilinear).
    pos = np.linspace(0.0, n - 1.0, out_size)
    i0 = np.floor(pos).astype(int)
    i1 = np.minimum(i0 + 1, n - 1)
    frac = pos - i0
    rows = src[i0, :] * (1.0 - frac)[:, None] + src[i1, :] * frac[:, None]
    out = rows[:, i0] * (1.0 - frac)[None, :] + rows[:, i1] * frac[None, :]
    return out


def write_idx_images(path: Path, images: np.ndarray) -> None:
    n, h, w = images.shape
    with gzip.open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, n, h, w))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    with gzip.open(path, "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main() -> None:
    out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "data/digits")
    out_dir.mkdir(parents=True, exist_ok=True)

    bunch = load_digits()
    images8 = bunch.images  # (1797, 8, 8), values 0..16
    labels = bunch.target.astype(np.uint8)

    scaled = np.stack(
        [np.clip(upscale_bilinear(img) * (255.0 / 16.0), 0, 255) for img in images8]
    )
    scaled = np.rint(scaled).astype(np.uint8)

    # Fixed split: interleave classes via a seeded permutation, last 360 test.
    rng = np.random.RandomState(20240501)
    perm = rng.permutation(len(labels))
    scaled, labels = scaled[perm], labels[perm]
    n_test = 360
    train_x, test_x = scaled[:-n_test], scaled[-n_test:]
    train_y, test_y = labels[:-n_test], labels[-n_test:]

    write_idx_images(out_dir / "train-images-idx3-ubyte.gz", train_x)
    write_idx_labels(out_dir / "train-labels-idx1-ubyte.gz", train_y)
    write_idx_images(out_dir / "t10k-images-idx3-ubyte.gz", test_x)
    write_idx_labels(out_dir / "t10k-labels-idx1-ubyte.gz", test_y)
    print(f"wrote {len(train_y)} train / {len(test_y)} test images to {out_dir}")


if __name__ == "__main__":
    main()
