"""Build the bundled desk-scale digit corpus as IDX files.

Writes 28x28 versions of the UCI handwritten digits (shipped with
scikit-learn, so no download) to data/: 1000 training and 797 test
samples.  Real MNIST IDX files work as a drop-in replacement; point the
config's dataset paths at them.

Run:  python tools/make_digits_dataset.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits

from sparkxd.datasets import write_idx_images, write_idx_labels

SHUFFLE_SEED = 1234


def main(out_dir="data"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = load_digits()
    big = np.kron(d.images / 16.0, np.ones((4, 4)))[:, 2:30, 2:30]  # 8x8 -> 28x28
    images = np.round(big.reshape(len(big), -1) * 255.0).astype(np.uint8)
    labels = d.target.astype(np.int64)
    order = np.random.default_rng(SHUFFLE_SEED).permutation(len(images))
    images, labels = images[order], labels[order]

    write_idx_images(out / "train-images.idx", images[:1000], 28, 28)
    write_idx_labels(out / "train-labels.idx", labels[:1000])
    write_idx_images(out / "test-images.idx", images[1000:1797], 28, 28)
    write_idx_labels(out / "test-labels.idx", labels[1000:1797])
    print(f"wrote 1000 train / 797 test samples under {out}/")


if __name__ == "__main__":
    main(*sys.argv[1:])
