"""Weight encoding and DRAM mapping plans.

Weights are stored one per 32-bit DRAM word as IEEE-754 single precision
(bit 0 = mantissa LSB, bit 31 = sign).  Two plan flavors exist:

* baseline -- subsequent addresses within a bank, spilling to the next
  bank (then chip, rank, channel) when full;
* sparkxd  -- the subarray-aware order: per channel/rank/chip and row
  index, walk subarrays and banks, filling whole rows of safe subarrays
  only (those whose observed error rate is at or below the threshold).
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .dram import ADDRESS_FIELDS, DramAddress, DramGeometry

SNAPSHOT_MAGIC = b"SPXD"
SNAPSHOT_VERSION = 1

BASELINE = "baseline"
SPARKXD = "sparkxd"


class CapacityError(ValueError):
    """Not enough (safe) DRAM words for the weights."""


class PlanMismatchError(ValueError):
    """Image/plan/weight-count inconsistency."""


def encode(weights: np.ndarray) -> np.ndarray:
    """FP32-encode weights into uint32 words (bit-exact view)."""
    w = np.ascontiguousarray(weights, dtype=np.float32)
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite for encoding")
    return w.view(np.uint32).copy()


def decode(words: np.ndarray) -> np.ndarray:
    """Inverse of :func:`encode`; flipped bits follow IEEE-754 (Inf/NaN pass through)."""
    return np.ascontiguousarray(words, dtype=np.uint32).view(np.float32).copy()


def flip_bit(words: np.ndarray, index: int, bit: int) -> np.ndarray:
    """Return a copy of the image with one bit flipped."""
    out = words.copy()
    out[index] ^= np.uint32(1) << np.uint32(bit)
    return out


@dataclass
class MappingPlan:
    """Ordered assignment of weight words to DRAM addresses."""

    geom: DramGeometry
    flavor: str
    addresses: np.ndarray  # (n, 7) int32, columns in ADDRESS_FIELDS order
    ber_threshold: float | None = None  # sparkxd flavor only

    def __post_init__(self):
        self.addresses = np.asarray(self.addresses, dtype=np.int32)
        if self.addresses.ndim != 2 or self.addresses.shape[1] != 7:
            raise PlanMismatchError(f"addresses must be (n, 7), got {self.addresses.shape}")

    def __len__(self) -> int:
        return len(self.addresses)

    @property
    def word_index(self) -> np.ndarray:
        """Linearized DRAM word index per weight."""
        g = self.geom
        a = self.addresses.astype(np.int64)
        idx = a[:, 0]
        idx = idx * g.n_ra + a[:, 1]
        idx = idx * g.n_cp + a[:, 2]
        idx = idx * g.n_ro + a[:, 5]
        idx = idx * g.n_su + a[:, 4]
        idx = idx * g.n_ba + a[:, 3]
        idx = idx * g.n_co + a[:, 6]
        return idx

    def check_injective(self) -> None:
        idx = self.word_index
        if len(np.unique(idx)) != len(idx):
            raise PlanMismatchError("plan maps two weights to the same DRAM word")

    def address(self, i: int) -> DramAddress:
        return DramAddress(*(int(x) for x in self.addresses[i]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["weight_index", *ADDRESS_FIELDS])
            for i in range(len(self)):
                w.writerow([i, *(int(x) for x in self.addresses[i])])

    @classmethod
    def from_csv(cls, path, geom: DramGeometry, flavor: str = BASELINE,
                 ber_threshold: float | None = None) -> "MappingPlan":
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                rows.append([int(rec[f]) for f in ADDRESS_FIELDS])
        return cls(geom=geom, flavor=flavor,
                   addresses=np.array(rows, np.int32).reshape(-1, 7),
                   ber_threshold=ber_threshold)


def plan_baseline(n_weights: int, geom: DramGeometry) -> MappingPlan:
    """Sequential fill of one bank after another.

    Within a bank the order is column-fastest, then row, then subarray;
    full banks spill to the next bank of the same chip, then to further
    chips, ranks and channels.
    """
    if n_weights < 0:
        raise ValueError("n_weights must be >= 0")
    if n_weights > geom.capacity_words:
        raise CapacityError(
            f"{n_weights} weights exceed capacity {geom.capacity_words} words"
        )
    per_bank = geom.words_per_bank
    idx = np.arange(n_weights, dtype=np.int64)
    bank_seq, within = np.divmod(idx, per_bank)  # bank fill order: ba, cp, ra, ch
    ba = bank_seq % geom.n_ba
    chip_seq = bank_seq // geom.n_ba
    cp = chip_seq % geom.n_cp
    rest = chip_seq // geom.n_cp
    ra = rest % geom.n_ra
    ch = rest // geom.n_ra
    su_ro, co = np.divmod(within, geom.n_co)
    su, ro = np.divmod(su_ro, geom.n_ro)
    addresses = np.stack([ch, ra, cp, ba, su, ro, co], axis=1).astype(np.int32)
    return MappingPlan(geom=geom, flavor=BASELINE, addresses=addresses)


def safe_capacity_words(rates: np.ndarray, ber_th: float, geom: DramGeometry) -> int:
    """Words available in subarrays whose error rate meets the threshold."""
    n_safe = int(np.count_nonzero(rates <= ber_th))
    return n_safe * geom.words_per_subarray


def plan_sparkxd(
    n_weights: int,
    geom: DramGeometry,
    rates: np.ndarray,
    ber_th: float,
) -> MappingPlan:
    """Subarray-aware mapping: whole rows of safe subarrays, banks innermost.

    Loop order per channel, rank and chip: row index, then subarray, then
    bank; a safe subarray contributes all columns of the current row before
    the walk moves to the next bank.  Unsafe subarrays receive nothing.
    ``rates`` has shape (n_ch, n_ra, n_cp, n_ba, n_su).
    """
    if n_weights < 0:
        raise ValueError("n_weights must be >= 0")
    rates = np.asarray(rates, dtype=np.float64)
    expected = (geom.n_ch, geom.n_ra, geom.n_cp, geom.n_ba, geom.n_su)
    if rates.shape != expected:
        raise PlanMismatchError(f"rates shape {rates.shape} != geometry {expected}")
    capacity = safe_capacity_words(rates, ber_th, geom)
    if n_weights > capacity:
        raise CapacityError(
            f"{n_weights} weights need {n_weights - capacity} more words than the "
            f"{capacity} available in safe subarrays (threshold {ber_th})"
        )

    # safe (ba, su) pairs in (su, ba) walk order for each chip: one row chunk
    # per pair per row index
    cols = np.arange(geom.n_co, dtype=np.int32)
    chunks = []
    remaining = n_weights
    for ch in range(geom.n_ch):
        for ra in range(geom.n_ra):
            for cp in range(geom.n_cp):
                safe = rates[ch, ra, cp] <= ber_th  # (n_ba, n_su)
                pairs = [(su, ba) for su in range(geom.n_su) for ba in range(geom.n_ba)
                         if safe[ba, su]]
                if not pairs:
                    continue
                for ro in range(geom.n_ro):
                    for su, ba in pairs:
                        take = min(remaining, geom.n_co)
                        if take == 0:
                            break
                        chunk = np.empty((take, 7), np.int32)
                        chunk[:, 0] = ch
                        chunk[:, 1] = ra
                        chunk[:, 2] = cp
                        chunk[:, 3] = ba
                        chunk[:, 4] = su
                        chunk[:, 5] = ro
                        chunk[:, 6] = cols[:take]
                        chunks.append(chunk)
                        remaining -= take
                    if remaining == 0:
                        break
                if remaining == 0:
                    break
            if remaining == 0:
                break
        if remaining == 0:
            break

    addresses = (np.concatenate(chunks, axis=0) if chunks
                 else np.empty((0, 7), np.int32))
    return MappingPlan(geom=geom, flavor=SPARKXD, addresses=addresses,
                       ber_threshold=float(ber_th))


def store(weights: np.ndarray, plan: MappingPlan) -> np.ndarray:
    """Encode weights into the stored uint32 image (plan order)."""
    weights = np.asarray(weights)
    if len(weights) != len(plan):
        raise PlanMismatchError(f"{len(weights)} weights vs plan of {len(plan)}")
    return encode(weights)


def load(words: np.ndarray, plan: MappingPlan, clamp: tuple[float, float] | None = None) -> np.ndarray:
    """Decode a stored image back to weights.

    Bit flips applied to the image surface here; decoded Inf/NaN values
    pass through unsanitized unless a clamp range is given (NaN clamps to
    the lower bound).
    """
    if len(words) != len(plan):
        raise PlanMismatchError(f"image of {len(words)} words vs plan of {len(plan)}")
    weights = decode(words)
    if clamp is not None:
        lo, hi = clamp
        weights = np.clip(weights, lo, hi)
        weights[np.isnan(weights)] = lo
    return weights


def write_snapshot(path, weights: np.ndarray) -> None:
    """Weight snapshot: 16-byte header (magic, version, count) + LE FP32 words."""
    w = np.ascontiguousarray(weights, dtype="<f4").ravel()
    header = struct.pack("<4sHI6x", SNAPSHOT_MAGIC, SNAPSHOT_VERSION, len(w))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(w.tobytes())


def read_snapshot(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16:
            raise ValueError("snapshot header truncated")
        magic, version, count = struct.unpack("<4sHI6x", header)
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"bad snapshot magic {magic!r}")
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        data = fh.read(4 * count)
        if len(data) != 4 * count:
            raise ValueError("snapshot payload truncated")
    return np.frombuffer(data, dtype="<f4").copy()
