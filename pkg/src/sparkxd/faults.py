"""Weak-cell maps and bit-flip injection for the four DRAM error models.

Weak cells are the cells that fail once DRAM operating parameters are
reduced; they are persistent for an experiment (drawn once per seed, then
every stored bit co-located with one flips with the cell's probability).

* M0 -- uniform random distribution across every bank
* M1 -- weak cells confined to randomly chosen bitlines (vertical)
* M2 -- weak cells confined to randomly chosen wordlines (horizontal)
* M3 -- data-dependent: separate flip probabilities for stored 1s and 0s
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dram import DramGeometry, delinearize

MODELS = ("M0", "M1", "M2", "M3")


class FaultParameterError(ValueError):
    """Invalid error-model parameter."""


@dataclass
class WeakCellMap:
    """Weak-cell coordinates with flip probabilities.

    Cells are stored column-wise: ``word_index`` is the linearized DRAM
    word (see ``dram.linearize``), ``bit`` the bit position within the
    word, ``p1``/``p0`` the flip probabilities for a stored 1 and 0.  For
    content-independent models (M0-M2) ``p1 == p0``.
    """

    geom: DramGeometry
    model: str
    seed: int
    word_index: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    bit: np.ndarray = field(default_factory=lambda: np.empty(0, np.int8))
    p1: np.ndarray = field(default_factory=lambda: np.empty(0, np.float64))
    p0: np.ndarray = field(default_factory=lambda: np.empty(0, np.float64))

    def __post_init__(self):
        if self.model not in MODELS:
            raise FaultParameterError(f"model must be one of {MODELS}, got {self.model!r}")
        if not (len(self.word_index) == len(self.bit) == len(self.p1) == len(self.p0)):
            raise FaultParameterError("weak-cell columns must have equal length")

    def __len__(self) -> int:
        return len(self.word_index)

    @property
    def cell_keys(self) -> np.ndarray:
        """Unique per-bit identity: word_index * word_bits + bit."""
        return self.word_index * self.geom.word_bits + self.bit.astype(np.int64)

    @property
    def p_mean(self) -> np.ndarray:
        """Expected flip probability under uniform random content."""
        return (self.p1 + self.p0) / 2.0

    def expected_flip_rate(self) -> float:
        """Expected flips per stored bit over the whole geometry."""
        if len(self) == 0:
            return 0.0
        return float(self.p_mean.sum() / self.geom.capacity_bits)

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for i in np.argsort(self.cell_keys):
                addr = delinearize(int(self.word_index[i]), self.geom)
                rec = {
                    "ch": addr.ch, "ra": addr.ra, "cp": addr.cp, "ba": addr.ba,
                    "su": addr.su, "ro": addr.ro, "co": addr.co,
                    "bit": int(self.bit[i]),
                }
                if self.model == "M3":
                    rec["p1"] = float(self.p1[i])
                    rec["p0"] = float(self.p0[i])
                else:
                    rec["p"] = float(self.p1[i])
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    @classmethod
    def from_jsonl(cls, path, geom: DramGeometry, model: str = "M0", seed: int = 0) -> "WeakCellMap":
        from .dram import DramAddress, linearize

        words, bits, p1s, p0s = [], [], [], []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                addr = DramAddress(rec["ch"], rec["ra"], rec["cp"], rec["ba"],
                                   rec["su"], rec["ro"], rec["co"])
                words.append(linearize(addr, geom))
                bits.append(rec["bit"])
                if "p" in rec:
                    p1s.append(rec["p"])
                    p0s.append(rec["p"])
                else:
                    p1s.append(rec["p1"])
                    p0s.append(rec["p0"])
        return cls(
            geom=geom, model=model, seed=seed,
            word_index=np.array(words, np.int64),
            bit=np.array(bits, np.int8),
            p1=np.array(p1s, np.float64),
            p0=np.array(p0s, np.float64),
        )


def _unique_uniform(rng: np.random.Generator, n_total: int, n_pick: int) -> np.ndarray:
    """n_pick distinct integers uniform over [0, n_total), sorted."""
    if n_pick > n_total:
        raise FaultParameterError(f"cannot pick {n_pick} distinct cells from {n_total}")
    if n_pick == 0:
        return np.empty(0, np.int64)
    if 2 * n_pick > n_total:
        # dense picks: draw the complement instead (rejection would crawl)
        keep = np.ones(n_total, dtype=bool)
        keep[_unique_uniform(rng, n_total, n_total - n_pick)] = False
        return np.nonzero(keep)[0].astype(np.int64)
    # oversample-and-dedupe; collisions are rare at the sparse rates used here
    picked = np.unique(rng.integers(0, n_total, size=n_pick, dtype=np.int64))
    while len(picked) < n_pick:
        extra = rng.integers(0, n_total, size=n_pick - len(picked), dtype=np.int64)
        picked = np.unique(np.concatenate([picked, extra]))
    return picked[:n_pick] if len(picked) > n_pick else picked


def _bit_to_coords(bit_idx: np.ndarray, word_bits: int) -> tuple[np.ndarray, np.ndarray]:
    return bit_idx // word_bits, (bit_idx % word_bits).astype(np.int8)


def generate_map(
    model: str,
    target_ber: float,
    geom: DramGeometry,
    seed: int,
    p_fault: float = 1.0,
    m3_p1: float = 1.0,
    m3_p0: float = 0.0,
) -> WeakCellMap:
    """Draw a weak-cell map whose expected aggregate flip rate is target_ber.

    M0 splits the rate into a weak-cell probability and a per-cell fault
    probability (default p_fault=1: a pure weak-cell lottery).  M1/M2
    confine the weak cells to randomly chosen bitlines/wordlines per bank,
    preserving the aggregate rate.  M3 assigns asymmetric probabilities to
    stored 1s and 0s; the aggregate rate assumes uniform random content.
    """
    if not 0.0 <= target_ber <= 1.0:
        raise FaultParameterError(f"target_ber must be in [0, 1], got {target_ber}")
    if model not in MODELS:
        raise FaultParameterError(f"unknown error model {model!r}")
    if not 0.0 < p_fault <= 1.0:
        raise FaultParameterError(f"p_fault must be in (0, 1], got {p_fault}")

    rng = np.random.default_rng(np.random.SeedSequence([seed, MODELS.index(model)]))
    total_bits = geom.capacity_bits
    empty = WeakCellMap(geom=geom, model=model, seed=seed)
    if target_ber == 0.0:
        return empty

    if model in ("M0", "M3"):
        if model == "M3":
            p_cell = (m3_p1 + m3_p0) / 2.0
            if p_cell <= 0.0:
                raise FaultParameterError("m3_p1 + m3_p0 must be positive")
        else:
            p_cell = p_fault
        p_weak = target_ber / p_cell
        if p_weak > 1.0:
            raise FaultParameterError(
                f"target_ber={target_ber} not reachable with per-cell probability {p_cell}"
            )
        n_weak = int(rng.binomial(total_bits, p_weak))
        bit_idx = _unique_uniform(rng, total_bits, n_weak)
        words, bits = _bit_to_coords(bit_idx, geom.word_bits)
        if model == "M3":
            p1 = np.full(len(bit_idx), m3_p1)
            p0 = np.full(len(bit_idx), m3_p0)
        else:
            p1 = np.full(len(bit_idx), p_fault)
            p0 = p1.copy()
        return WeakCellMap(geom=geom, model=model, seed=seed,
                           word_index=words, bit=bits, p1=p1, p0=p0)

    # line-confined models: draw weak lines per bank, then weak cells within
    if model == "M1":
        n_lines = geom.n_su * geom.n_co * geom.word_bits  # bitline ~ (su, co, bit)
        cells_per_line = geom.n_ro
    else:  # M2: wordline ~ (su, ro)
        n_lines = geom.n_su * geom.n_ro
        cells_per_line = geom.n_co * geom.word_bits

    n_weak_lines = max(1, math.ceil(math.sqrt(target_ber * n_lines)),
                       math.ceil(target_ber * n_lines))
    q = target_ber * n_lines / n_weak_lines  # weak probability within a chosen line
    if q > 1.0 + 1e-12:
        raise FaultParameterError("internal: per-line rate exceeds 1")
    q = min(q, 1.0)

    words_all, bits_all = [], []
    for bank in range(geom.n_banks):
        lines = _unique_uniform(rng, n_lines, n_weak_lines)
        n_weak = int(rng.binomial(n_weak_lines * cells_per_line, q))
        slot = _unique_uniform(rng, n_weak_lines * cells_per_line, n_weak)
        line = lines[slot // cells_per_line]
        offs = slot % cells_per_line
        if model == "M1":
            su, rem = np.divmod(line, geom.n_co * geom.word_bits)
            co, bit = np.divmod(rem, geom.word_bits)
            ro = offs
        else:
            su, ro = np.divmod(line, geom.n_ro)
            co, bit = np.divmod(offs, geom.word_bits)
        word_in_bank = (su * geom.n_ro + ro) * geom.n_co + co  # bank-local (su,ro,co)
        words_all.append(_bank_word_to_linear(bank, word_in_bank, geom))
        bits_all.append(bit.astype(np.int8))

    words = np.concatenate(words_all) if words_all else np.empty(0, np.int64)
    bits = np.concatenate(bits_all) if bits_all else np.empty(0, np.int8)
    p1 = np.full(len(words), p_fault)
    return WeakCellMap(geom=geom, model=model, seed=seed,
                       word_index=words, bit=bits, p1=p1, p0=p1.copy())


def _bank_word_to_linear(bank: int, word_in_bank: np.ndarray, geom: DramGeometry) -> np.ndarray:
    """Convert bank-local (su, ro, co) word offsets to global linear indices."""
    ba = bank % geom.n_ba
    chip = bank // geom.n_ba
    cp = chip % geom.n_cp
    rest = chip // geom.n_cp
    ra = rest % geom.n_ra
    ch = rest // geom.n_ra
    su_ro, co = np.divmod(word_in_bank, geom.n_co)
    su, ro = np.divmod(su_ro, geom.n_ro)
    idx = np.int64(ch)
    idx = idx * geom.n_ra + ra
    idx = idx * geom.n_cp + cp
    idx = idx * geom.n_ro + ro
    idx = idx * geom.n_su + su
    idx = idx * geom.n_ba + ba
    idx = idx * geom.n_co + co
    return idx


def subarray_rates(weak_map: WeakCellMap, geom: DramGeometry) -> np.ndarray:
    """Expected error rate per subarray, shape (n_ch, n_ra, n_cp, n_ba, n_su).

    Rate = sum of weak-cell flip probabilities in the subarray divided by
    its bit capacity.
    """
    shape = (geom.n_ch, geom.n_ra, geom.n_cp, geom.n_ba, geom.n_su)
    rates = np.zeros(shape, np.float64)
    if len(weak_map):
        idx = weak_map.word_index // geom.n_co
        ba = idx % geom.n_ba
        idx = idx // geom.n_ba
        su = idx % geom.n_su
        idx = idx // geom.n_su
        idx = idx // geom.n_ro  # drop ro
        cp = idx % geom.n_cp
        idx = idx // geom.n_cp
        ra = idx % geom.n_ra
        ch = idx // geom.n_ra
        flat = ((ch * geom.n_ra + ra) * geom.n_cp + cp) * geom.n_ba * geom.n_su + ba * geom.n_su + su
        np.add.at(rates.reshape(-1), flat, weak_map.p_mean)
    bits_per_subarray = geom.n_ro * geom.n_co * geom.word_bits
    rates /= bits_per_subarray
    return rates


def match_cells(
    weak_map: WeakCellMap,
    plan_word_index: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Weak cells co-located with stored words.

    Returns (slot, bit, p1, p0) arrays in canonical (word, bit) order,
    where ``slot`` indexes the stored image.
    """
    plan_word_index = np.asarray(plan_word_index, dtype=np.int64)
    if len(weak_map) == 0 or len(plan_word_index) == 0:
        z = np.empty(0, np.int64)
        return z, np.empty(0, np.uint32), np.empty(0, np.float64), np.empty(0, np.float64)
    order = np.argsort(weak_map.cell_keys)
    cell_words = weak_map.word_index[order]
    cell_bits = weak_map.bit[order].astype(np.uint32)
    p1 = weak_map.p1[order]
    p0 = weak_map.p0[order]

    plan_order = np.argsort(plan_word_index)
    sorted_plan = plan_word_index[plan_order]
    pos = np.searchsorted(sorted_plan, cell_words)
    pos_clipped = np.minimum(pos, len(sorted_plan) - 1)
    hit = sorted_plan[pos_clipped] == cell_words
    slot = plan_order[pos_clipped[hit]]
    return slot, cell_bits[hit], p1[hit], p0[hit]


def apply_flips(
    words: np.ndarray,
    slot: np.ndarray,
    bit: np.ndarray,
    p1: np.ndarray,
    p0: np.ndarray,
    rng: np.random.Generator,
) -> None:
    """Flip matched weak cells in place, honoring per-content probabilities."""
    if len(slot) == 0:
        return
    deterministic = bool(np.all(p1 >= 1.0) and np.all(p0 >= 1.0))
    if deterministic:
        masks = (np.uint32(1) << bit).astype(np.uint32)
        np.bitwise_xor.at(words, slot, masks)
        return
    u = rng.random(len(slot))
    stored = (words[slot] >> bit) & np.uint32(1)
    p_eff = np.where(stored == 1, p1, p0)
    flip = u < p_eff
    masks = (np.uint32(1) << bit[flip]).astype(np.uint32)
    np.bitwise_xor.at(words, slot[flip], masks)


def inject(
    words: np.ndarray,
    weak_map: WeakCellMap,
    plan_word_index: np.ndarray,
    seed: int,
) -> np.ndarray:
    """Flip stored bits that sit on weak cells; returns a new word array.

    ``words`` is the uint32 image in plan order; ``plan_word_index`` gives
    each stored word's linearized DRAM location.  Deterministic per seed:
    weak cells are visited in canonical (word, bit) order.
    """
    words = np.asarray(words, dtype=np.uint32)
    plan_word_index = np.asarray(plan_word_index, dtype=np.int64)
    if len(words) != len(plan_word_index):
        raise FaultParameterError(
            f"image has {len(words)} words but plan maps {len(plan_word_index)}"
        )
    out = words.copy()
    slot, bit, p1, p0 = match_cells(weak_map, plan_word_index)
    rng = np.random.default_rng(np.random.SeedSequence([seed, len(weak_map)]))
    apply_flips(out, slot, bit, p1, p0, rng)
    return out
