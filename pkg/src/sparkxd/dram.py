"""DRAM organization, row-buffer state machine and cycle accounting.

The memory is organized as channel / rank / chip / bank / subarray / row /
column.  Each bank owns a single row buffer (a subarray shares its bank's
buffer); an access therefore lands in one of three conditions:

* hit      -- the requested row is already latched in the row buffer
* miss     -- the bank has no open row, an ACT must be issued first
* conflict -- a different row is open, PRE then ACT must be issued first

Timings are expressed in nanoseconds and converted to an integer cycle grid
(``clock_ns`` per cycle, rounded up) for trace timestamps and totals.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import accel

ADDRESS_FIELDS = ("ch", "ra", "cp", "ba", "su", "ro", "co")


class AddressError(ValueError):
    """An address index lies outside its geometry."""


class TraceError(ValueError):
    """A trace is malformed or inconsistent with its geometry."""


@dataclass(frozen=True)
class DramGeometry:
    """Counts per level of the DRAM hierarchy."""

    n_ch: int = 1
    n_ra: int = 1
    n_cp: int = 1
    n_ba: int = 8
    n_su: int = 4
    n_ro: int = 64
    n_co: int = 128
    word_bits: int = 32

    def __post_init__(self):
        for name in ("n_ch", "n_ra", "n_cp", "n_ba", "n_su", "n_ro", "n_co", "word_bits"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")

    @property
    def counts(self) -> tuple[int, ...]:
        return (self.n_ch, self.n_ra, self.n_cp, self.n_ba, self.n_su, self.n_ro, self.n_co)

    @property
    def n_banks(self) -> int:
        """Total banks across all channels, ranks and chips."""
        return self.n_ch * self.n_ra * self.n_cp * self.n_ba

    @property
    def words_per_subarray(self) -> int:
        return self.n_ro * self.n_co

    @property
    def words_per_bank(self) -> int:
        return self.n_su * self.n_ro * self.n_co

    @property
    def capacity_words(self) -> int:
        return self.n_banks * self.words_per_bank

    @property
    def capacity_bits(self) -> int:
        return self.capacity_words * self.word_bits

    @classmethod
    def from_dict(cls, d: dict) -> "DramGeometry":
        keys = ("n_ch", "n_ra", "n_cp", "n_ba", "n_su", "n_ro", "n_co", "word_bits")
        return cls(**{k: int(d[k]) for k in keys if k in d})


@dataclass(frozen=True)
class DramAddress:
    ch: int
    ra: int
    cp: int
    ba: int
    su: int
    ro: int
    co: int

    def validate(self, geom: DramGeometry) -> "DramAddress":
        for name, count in zip(ADDRESS_FIELDS, geom.counts):
            idx = getattr(self, name)
            if not 0 <= idx < count:
                raise AddressError(f"{name}={idx} out of range [0, {count})")
        return self

    def bank_key(self, geom: DramGeometry) -> int:
        """Flat index of this address's bank."""
        return ((self.ch * geom.n_ra + self.ra) * geom.n_cp + self.cp) * geom.n_ba + self.ba

    def row_key(self, geom: DramGeometry) -> int:
        """Identity of the row this address activates within its bank."""
        return self.su * geom.n_ro + self.ro


def linearize(addr: DramAddress, geom: DramGeometry) -> int:
    """Map an address to a word index in [0, capacity_words).

    Ordering (fastest to slowest): column, bank, subarray, row, chip, rank,
    channel.  Consecutive indices walk the columns of one row, then the same
    row of the next bank -- the order in which the subarray-aware mapping
    emits addresses, so that mapping is sequential in linear space.
    """
    addr.validate(geom)
    idx = addr.ch
    idx = idx * geom.n_ra + addr.ra
    idx = idx * geom.n_cp + addr.cp
    idx = idx * geom.n_ro + addr.ro
    idx = idx * geom.n_su + addr.su
    idx = idx * geom.n_ba + addr.ba
    idx = idx * geom.n_co + addr.co
    return idx


def delinearize(idx: int, geom: DramGeometry) -> DramAddress:
    """Inverse of :func:`linearize`."""
    if not 0 <= idx < geom.capacity_words:
        raise AddressError(f"word index {idx} out of range [0, {geom.capacity_words})")
    idx, co = divmod(idx, geom.n_co)
    idx, ba = divmod(idx, geom.n_ba)
    idx, su = divmod(idx, geom.n_su)
    idx, ro = divmod(idx, geom.n_ro)
    idx, cp = divmod(idx, geom.n_cp)
    ch, ra = divmod(idx, geom.n_ra)
    return DramAddress(ch, ra, cp, ba, su, ro, co)


def linearize_arrays(cols: dict[str, np.ndarray], geom: DramGeometry) -> np.ndarray:
    """Vectorized :func:`linearize` over parallel coordinate arrays."""
    idx = cols["ch"].astype(np.int64)
    idx = idx * geom.n_ra + cols["ra"]
    idx = idx * geom.n_cp + cols["cp"]
    idx = idx * geom.n_ro + cols["ro"]
    idx = idx * geom.n_su + cols["su"]
    idx = idx * geom.n_ba + cols["ba"]
    idx = idx * geom.n_co + cols["co"]
    return idx


class Command(IntEnum):
    ACT = 0
    RD = 1
    WR = 2
    PRE = 3


class AccessCondition(IntEnum):
    HIT = 0
    MISS = 1
    CONFLICT = 2


NO_CONDITION = -1  # condition column for ACT/PRE records


@dataclass(frozen=True)
class TimingParams:
    """DRAM timing parameters in nanoseconds plus the cycle grid.

    t_rcd/t_ras/t_rp are the voltage-dependent array timings; t_col is the
    column access (data phase) time, unaffected by array-voltage scaling in
    this model; clock_ns defines the cycle grid everything is rounded up to.
    """

    t_rcd: float = 18.0
    t_ras: float = 42.0
    t_rp: float = 18.0
    t_col: float = 10.0
    clock_ns: float = 1.25

    def __post_init__(self):
        if not (self.t_ras >= self.t_rcd > 0):
            raise ValueError(f"need t_ras >= t_rcd > 0, got t_ras={self.t_ras} t_rcd={self.t_rcd}")
        if self.t_rp <= 0 or self.t_col <= 0 or self.clock_ns <= 0:
            raise ValueError("t_rp, t_col and clock_ns must be positive")

    def cycles(self, ns: float) -> int:
        """Round a duration up to the cycle grid."""
        return int(math.ceil(ns / self.clock_ns - 1e-9))

    @property
    def rcd_cycles(self) -> int:
        return self.cycles(self.t_rcd)

    @property
    def ras_cycles(self) -> int:
        return self.cycles(self.t_ras)

    @property
    def rp_cycles(self) -> int:
        return self.cycles(self.t_rp)

    @property
    def col_cycles(self) -> int:
        return self.cycles(self.t_col)


class RowBufferState:
    """Per-bank open-row tracking (open-page policy, one buffer per bank)."""

    def __init__(self, geom: DramGeometry):
        self.geom = geom
        self.open_row = np.full(geom.n_banks, -1, dtype=np.int64)  # -1 = closed

    def is_open(self, bank: int) -> bool:
        return self.open_row[bank] >= 0

    def open_banks(self) -> np.ndarray:
        return np.nonzero(self.open_row >= 0)[0]

    def copy(self) -> "RowBufferState":
        st = RowBufferState(self.geom)
        st.open_row = self.open_row.copy()
        return st


def classify_access(state: RowBufferState, addr: DramAddress) -> AccessCondition:
    """Hit / miss / conflict for one request against the current state."""
    addr.validate(state.geom)
    open_row = state.open_row[addr.bank_key(state.geom)]
    if open_row < 0:
        return AccessCondition.MISS
    if open_row == addr.row_key(state.geom):
        return AccessCondition.HIT
    return AccessCondition.CONFLICT


def issue_access(
    state: RowBufferState,
    addr: DramAddress,
    rw: str,
    timing: TimingParams,
) -> tuple[RowBufferState, list[Command], int]:
    """Issue one read/write, updating the row buffer.

    Returns the updated state, the emitted command list and the cycles
    elapsed until the data phase completes: hit pays only the column access,
    miss prepends t_RCD, conflict prepends t_RP + t_RCD.
    """
    if rw not in ("read", "write"):
        raise ValueError(f"rw must be 'read' or 'write', got {rw!r}")
    cond = classify_access(state, addr)
    data_cmd = Command.RD if rw == "read" else Command.WR
    if cond == AccessCondition.HIT:
        commands = [data_cmd]
        cycles = timing.col_cycles
    elif cond == AccessCondition.MISS:
        commands = [Command.ACT, data_cmd]
        cycles = timing.rcd_cycles + timing.col_cycles
    else:
        commands = [Command.PRE, Command.ACT, data_cmd]
        cycles = timing.rp_cycles + timing.rcd_cycles + timing.col_cycles
    state.open_row[addr.bank_key(state.geom)] = addr.row_key(state.geom)
    return state, commands, cycles


@dataclass
class AccessTrace:
    """Column-oriented trace of DRAM commands.

    One record per command.  RD/WR records carry the access condition;
    ACT/PRE records carry ``NO_CONDITION``.  ``cycle`` holds the issue
    timestamp under the serial (non-overlapped) schedule; the pipelined
    total is computed separately by :func:`burst_cycles`.
    """

    geom: DramGeometry
    cycle: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    command: np.ndarray = field(default_factory=lambda: np.empty(0, np.int8))
    ch: np.ndarray = field(default_factory=lambda: np.empty(0, np.int32))
    ra: np.ndarray = field(default_factory=lambda: np.empty(0, np.int32))
    cp: np.ndarray = field(default_factory=lambda: np.empty(0, np.int32))
    ba: np.ndarray = field(default_factory=lambda: np.empty(0, np.int32))
    su: np.ndarray = field(default_factory=lambda: np.empty(0, np.int32))
    ro: np.ndarray = field(default_factory=lambda: np.empty(0, np.int32))
    co: np.ndarray = field(default_factory=lambda: np.empty(0, np.int32))
    condition: np.ndarray = field(default_factory=lambda: np.empty(0, np.int8))

    def __len__(self) -> int:
        return len(self.command)

    def _count(self, cond: AccessCondition) -> int:
        return int(np.count_nonzero(self.condition == int(cond)))

    @property
    def hits(self) -> int:
        return self._count(AccessCondition.HIT)

    @property
    def misses(self) -> int:
        return self._count(AccessCondition.MISS)

    @property
    def conflicts(self) -> int:
        return self._count(AccessCondition.CONFLICT)

    @property
    def n_accesses(self) -> int:
        rdwr = (self.command == int(Command.RD)) | (self.command == int(Command.WR))
        return int(np.count_nonzero(rdwr))

    def data_records(self) -> np.ndarray:
        """Indices of the RD/WR records, in trace order."""
        return np.nonzero((self.command == int(Command.RD)) | (self.command == int(Command.WR)))[0]

    def bank_keys(self) -> np.ndarray:
        cols = {f: getattr(self, f) for f in ADDRESS_FIELDS}
        g = self.geom
        return ((cols["ch"].astype(np.int64) * g.n_ra + cols["ra"]) * g.n_cp + cols["cp"]) * g.n_ba + cols["ba"]

    def row_keys(self) -> np.ndarray:
        return self.su.astype(np.int64) * self.geom.n_ro + self.ro

    def validate(self) -> None:
        """Replay the command stream and check every record is consistent.

        Each RD/WR must find its row open (its own ACT, when the access was
        a miss or conflict, precedes it in the stream), and its stored
        condition must match a fresh replay of the data records alone.
        """
        bank = self.bank_keys()
        row = self.row_keys()
        open_row = np.full(self.geom.n_banks, -1, dtype=np.int64)
        for i in range(len(self)):
            cmd = Command(self.command[i])
            b = bank[i]
            if cmd == Command.ACT:
                open_row[b] = row[i]
            elif cmd == Command.PRE:
                open_row[b] = -1
            elif open_row[b] != row[i]:
                raise TraceError(f"record {i}: RD/WR on a row that is not open")
        open_row[:] = -1
        for i in self.data_records():
            b, r = bank[i], row[i]
            if open_row[b] < 0:
                replayed = AccessCondition.MISS
            elif open_row[b] == r:
                replayed = AccessCondition.HIT
            else:
                replayed = AccessCondition.CONFLICT
            open_row[b] = r
            if AccessCondition(self.condition[i]) != replayed:
                raise TraceError(f"record {i}: stored condition disagrees with replay")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cycle", "command", "ch", "ra", "cp", "ba", "su", "ro", "co", "condition"])
            for i in range(len(self)):
                cond = self.condition[i]
                w.writerow(
                    [
                        int(self.cycle[i]),
                        Command(self.command[i]).name,
                        int(self.ch[i]),
                        int(self.ra[i]),
                        int(self.cp[i]),
                        int(self.ba[i]),
                        int(self.su[i]),
                        int(self.ro[i]),
                        int(self.co[i]),
                        AccessCondition(cond).name if cond != NO_CONDITION else "",
                    ]
                )

    @classmethod
    def from_csv(cls, path, geom: DramGeometry) -> "AccessTrace":
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                rows.append(rec)
        n = len(rows)
        tr = cls(
            geom=geom,
            cycle=np.array([int(r["cycle"]) for r in rows], np.int64),
            command=np.array([Command[r["command"]] for r in rows], np.int8),
            condition=np.array(
                [AccessCondition[r["condition"]] if r["condition"] else NO_CONDITION for r in rows],
                np.int8,
            ),
        )
        for f in ADDRESS_FIELDS:
            setattr(tr, f, np.array([int(r[f]) for r in rows], np.int32))
        assert len(tr.cycle) == n
        return tr


def replay_accesses(
    addresses: np.ndarray,
    geom: DramGeometry,
    timing: TimingParams,
    rw: str = "read",
    close_rows: bool = True,
) -> AccessTrace:
    """Run a sequence of accesses through the state machine from all-closed.

    ``addresses`` is an (n, 7) int array of (ch, ra, cp, ba, su, ro, co)
    coordinates.  Emits the full command stream with serial-schedule
    timestamps.  With ``close_rows`` the trace ends by precharging every
    open bank, so repeated passes see identical (cold) state.
    """
    addresses = np.asarray(addresses, dtype=np.int64)
    if addresses.ndim != 2 or addresses.shape[1] != 7:
        raise TraceError(f"addresses must be (n, 7), got {addresses.shape}")
    for j, count in enumerate(geom.counts):
        if len(addresses) and (addresses[:, j].min() < 0 or addresses[:, j].max() >= count):
            raise AddressError(f"{ADDRESS_FIELDS[j]} column out of range for geometry")

    g = geom
    bank = ((addresses[:, 0] * g.n_ra + addresses[:, 1]) * g.n_cp + addresses[:, 2]) * g.n_ba + addresses[:, 3]
    row = addresses[:, 4] * g.n_ro + addresses[:, 5]
    cond = accel.classify_stream(bank, row, g.n_banks)

    n = len(addresses)
    data_cmd = Command.RD if rw == "read" else Command.WR
    n_cmds = cond.astype(np.int64) + 1  # hit->1, miss->2, conflict->3
    total = int(n_cmds.sum())

    pre_lat = np.array([0, timing.rcd_cycles, timing.rp_cycles + timing.rcd_cycles], np.int64)
    access_cycles = pre_lat[cond] + timing.col_cycles
    start = np.zeros(n, np.int64)
    if n:
        start[1:] = np.cumsum(access_cycles)[:-1]

    out_cmd = np.empty(total, np.int8)
    out_cond = np.full(total, NO_CONDITION, np.int8)
    out_cycle = np.empty(total, np.int64)
    out_addr = np.empty((total, 7), np.int32)
    pos = np.cumsum(n_cmds) - n_cmds  # first record slot of each access

    is_conf = cond == int(AccessCondition.CONFLICT)
    is_miss = cond == int(AccessCondition.MISS)
    opens = is_conf | is_miss

    out_addr[pos + n_cmds - 1] = addresses
    out_cmd[pos + n_cmds - 1] = int(data_cmd)
    out_cond[pos + n_cmds - 1] = cond
    out_cycle[pos + n_cmds - 1] = start + pre_lat[cond]

    act_slot = pos[opens] + n_cmds[opens] - 2
    out_addr[act_slot] = addresses[opens]
    out_cmd[act_slot] = int(Command.ACT)
    out_cycle[act_slot] = start[opens] + np.where(is_conf[opens], timing.rp_cycles, 0)

    pre_slot = pos[is_conf]
    out_addr[pre_slot] = addresses[is_conf]
    out_cmd[pre_slot] = int(Command.PRE)
    out_cycle[pre_slot] = start[is_conf]

    if close_rows and n:
        end = int(start[-1] + access_cycles[-1])
        # precharge each touched bank once, at the address it last held
        last = {}
        for i in range(n):
            last[int(bank[i])] = i
        closers = sorted(last.values())
        extra = len(closers)
        out_cmd = np.concatenate([out_cmd, np.full(extra, int(Command.PRE), np.int8)])
        out_cond = np.concatenate([out_cond, np.full(extra, NO_CONDITION, np.int8)])
        close_cycles = end + timing.rp_cycles * np.arange(extra, dtype=np.int64)
        out_cycle = np.concatenate([out_cycle, close_cycles])
        out_addr = np.concatenate([out_addr, addresses[closers].astype(np.int32)])

    tr = AccessTrace(geom=geom, cycle=out_cycle, command=out_cmd, condition=out_cond)
    for j, f in enumerate(ADDRESS_FIELDS):
        setattr(tr, f, out_addr[:, j].astype(np.int32))
    return tr


def burst_cycles(trace: AccessTrace, timing: TimingParams, n_burst_banks: int = 4) -> int:
    """Total cycles with multi-bank burst overlap.

    Row preparation (PRE/ACT) of different banks overlaps the shared data
    bus, which serializes one column transfer per access; at most
    ``n_burst_banks`` preparations may be in flight at once, and a bank must
    satisfy t_RAS between its ACT and the following PRE.  Same-bank accesses
    serialize fully.
    """
    if n_burst_banks < 1:
        raise ValueError("n_burst_banks must be >= 1")
    idx = trace.data_records()
    if len(idx) == 0:
        return 0
    bank = trace.bank_keys()[idx]
    cond = trace.condition[idx].astype(np.int64)
    return int(
        accel.burst_schedule(
            bank,
            cond,
            timing.rp_cycles,
            timing.rcd_cycles,
            timing.ras_cycles,
            timing.col_cycles,
            n_burst_banks,
            trace.geom.n_banks,
        )
    )
