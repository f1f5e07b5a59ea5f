"""Dataset ingestion: IDX image/label containers and a CSV fallback.

IDX is the MNIST container format (big-endian magic, dims, raw bytes).
The CSV fallback expects rows of ``label,pixel0..pixelN`` with intensities
0-255; a header row is tolerated.  Pixels are returned as float32 in
[0, 1], flattened.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class DatasetError(IOError):
    """Missing or malformed dataset file."""


@dataclass
class Dataset:
    images: np.ndarray  # (n, pixels) float32 in [0, 1]
    labels: np.ndarray  # (n,) int64

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DatasetError(
                f"{len(self.images)} images vs {len(self.labels)} labels"
            )

    def __len__(self) -> int:
        return len(self.images)

    @property
    def n_pixels(self) -> int:
        return self.images.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def subset(self, n: int) -> "Dataset":
        return Dataset(images=self.images[:n], labels=self.labels[:n])


def read_idx_images(path) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            header = fh.read(16)
            if len(header) != 16:
                raise DatasetError(f"{path}: truncated IDX image header")
            magic, n, rows, cols = struct.unpack(">IIII", header)
            if magic != IDX_IMAGES_MAGIC:
                raise DatasetError(f"{path}: bad IDX image magic 0x{magic:08x}")
            data = fh.read(n * rows * cols)
    except FileNotFoundError as e:
        raise DatasetError(str(e)) from e
    if len(data) != n * rows * cols:
        raise DatasetError(f"{path}: truncated IDX image payload")
    pixels = np.frombuffer(data, np.uint8).reshape(n, rows * cols)
    return (pixels.astype(np.float32) / 255.0).copy()


def read_idx_labels(path) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            header = fh.read(8)
            if len(header) != 8:
                raise DatasetError(f"{path}: truncated IDX label header")
            magic, n = struct.unpack(">II", header)
            if magic != IDX_LABELS_MAGIC:
                raise DatasetError(f"{path}: bad IDX label magic 0x{magic:08x}")
            data = fh.read(n)
    except FileNotFoundError as e:
        raise DatasetError(str(e)) from e
    if len(data) != n:
        raise DatasetError(f"{path}: truncated IDX label payload")
    return np.frombuffer(data, np.uint8).astype(np.int64).copy()


def write_idx_images(path, images_u8: np.ndarray, rows: int, cols: int) -> None:
    images_u8 = np.asarray(images_u8, np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, len(images_u8), rows, cols))
        fh.write(images_u8.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        fh.write(labels.astype(np.uint8).tobytes())


def read_csv_dataset(path) -> Dataset:
    """label,pixel0..pixelN rows with 0-255 intensities."""
    rows = []
    try:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                try:
                    rows.append([float(x) for x in parts])
                except ValueError:
                    continue  # header row
    except FileNotFoundError as e:
        raise DatasetError(str(e)) from e
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    arr = np.array(rows, np.float64)
    labels = arr[:, 0].astype(np.int64)
    images = (arr[:, 1:] / 255.0).astype(np.float32)
    if images.min() < 0.0 or images.max() > 1.0:
        raise DatasetError(f"{path}: pixel values outside 0-255")
    return Dataset(images=images, labels=labels)


def load_dataset(images_path=None, labels_path=None, csv_path=None) -> Dataset:
    """Load IDX image+label files, or a CSV file."""
    if csv_path is not None:
        return read_csv_dataset(csv_path)
    if images_path is None or labels_path is None:
        raise DatasetError("need either csv_path or both images_path and labels_path")
    return Dataset(images=read_idx_images(images_path), labels=read_idx_labels(labels_path))
