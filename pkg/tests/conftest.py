"""Shared fixtures: tiny geometries and the desk-scale digits dataset.

MNIST itself is not bundled; the desk-scale experiments use the UCI
handwritten digits (shipped with scikit-learn), pixel-replicated from
8x8 to 28x28 and written as IDX files so they flow through the same
ingestion path real MNIST files would.
"""

import numpy as np
import pytest

from sparkxd.datasets import Dataset, load_dataset, write_idx_images, write_idx_labels
from sparkxd.dram import DramGeometry

DIGITS_SEED = 1234


def digits_28x28():
    from sklearn.datasets import load_digits

    d = load_digits()
    big = np.kron(d.images / 16.0, np.ones((4, 4)))[:, 2:30, 2:30]
    images = big.reshape(len(big), -1)
    rng = np.random.default_rng(DIGITS_SEED)
    order = rng.permutation(len(images))
    return images[order], d.target.astype(np.int64)[order]


@pytest.fixture(scope="session")
def digits_idx_dir(tmp_path_factory):
    """Digit corpus as IDX files: 1000 train / 797 test, 28x28."""
    images, labels = digits_28x28()
    u8 = np.round(images * 255.0).astype(np.uint8)
    root = tmp_path_factory.mktemp("digits")
    write_idx_images(root / "train-images.idx", u8[:1000], 28, 28)
    write_idx_labels(root / "train-labels.idx", labels[:1000])
    write_idx_images(root / "test-images.idx", u8[1000:1797], 28, 28)
    write_idx_labels(root / "test-labels.idx", labels[1000:1797])
    return root


@pytest.fixture(scope="session")
def digits_train(digits_idx_dir) -> Dataset:
    return load_dataset(images_path=digits_idx_dir / "train-images.idx",
                        labels_path=digits_idx_dir / "train-labels.idx")


@pytest.fixture(scope="session")
def digits_test(digits_idx_dir) -> Dataset:
    return load_dataset(images_path=digits_idx_dir / "test-images.idx",
                        labels_path=digits_idx_dir / "test-labels.idx")


@pytest.fixture
def tiny_geom() -> DramGeometry:
    """32 words: 2 banks x 2 subarrays x 2 rows x 4 columns."""
    return DramGeometry(n_ch=1, n_ra=1, n_cp=1, n_ba=2, n_su=2, n_ro=2, n_co=4)


@pytest.fixture
def desk_geom() -> DramGeometry:
    """Default desk-scale geometry (2,097,152 words)."""
    return DramGeometry()


def write_micro_dataset(path, n: int, seed: int) -> None:
    """Two-class bar images (horizontal vs vertical), 8x8, CSV rows."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        label = i % 2
        img = np.zeros((8, 8))
        stripe = int(rng.integers(1, 7))
        if label == 0:
            img[stripe, :] = 1.0
        else:
            img[:, stripe] = 1.0
        img = np.clip(img + rng.normal(0, 0.05, img.shape), 0, 1)
        pix = np.round(img.ravel() * 255).astype(int)
        rows.append(",".join([str(label)] + [str(p) for p in pix]))
    path.write_text("\n".join(rows) + "\n")


def micro_config_doc(data_dir) -> dict:
    """Micro experiment: 64-pixel inputs, 3 neurons, 256-word DRAM."""
    return {
        "geometry": {"n_ch": 1, "n_ra": 1, "n_cp": 1, "n_ba": 2, "n_su": 2,
                     "n_ro": 4, "n_co": 16},
        "voltages": [1.325, 1.025],
        "schedule": [1e-3, 1e-2],
        "network_sizes": [3],
        "baseline_epochs": 1,
        "n_epoch": 1,
        "n_curve_seeds": 2,
        "acc_bound_pp": 100.0,
        "snn": {"n_in": 64, "n_exc": 3, "duration_ms": 60.0},
        "train_csv": str(data_dir / "train.csv"),
        "test_csv": str(data_dir / "test.csv"),
    }


def algorithm2_bruteforce(n_weights, geom, rates, ber_th):
    """Independent enumeration of the subarray-aware loop nest.

    Used as the mapping oracle: channel, rank, chip, row, subarray, bank,
    column, emitting whole rows of subarrays whose rate meets the
    threshold.
    """
    out = []
    for ch in range(geom.n_ch):
        for ra in range(geom.n_ra):
            for cp in range(geom.n_cp):
                for ro in range(geom.n_ro):
                    for su in range(geom.n_su):
                        for ba in range(geom.n_ba):
                            if rates[ch, ra, cp, ba, su] <= ber_th:
                                for co in range(geom.n_co):
                                    if len(out) < n_weights:
                                        out.append((ch, ra, cp, ba, su, ro, co))
    if len(out) < n_weights:
        raise AssertionError("oracle: insufficient safe capacity")
    return np.array(out, np.int32)
