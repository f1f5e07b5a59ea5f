"""DRAM access tracing of inference passes and energy/cycle accounting.

Weights are re-fetched in full once per inference pass (models larger
than on-chip memory), so the workload is one read per stored word in
plan order, starting from all rows closed and ending with a precharge of
every open bank -- repeated passes then cost the same and totals add up.

Energy is summed per command from the nominal table and scaled by the
operating point's supply-voltage factor.  Per-condition energies follow
from the command decomposition: E_hit = e_rd, E_miss = e_act + e_rd,
E_conflict = e_pre + e_act + e_rd.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dram import AccessCondition, AccessTrace, Command, TimingParams, burst_cycles, replay_accesses
from .storage import MappingPlan
from .voltage import VoltageOperatingPoint


class ComparisonError(ValueError):
    """Reports being compared do not describe the same workload."""


@dataclass(frozen=True)
class AccessEnergyTable:
    """Nominal per-command energies (pJ) at 1.35 V; calibration inputs."""

    e_act: float = 300.0
    e_rd: float = 147.2
    e_wr: float = 147.2
    e_pre: float = 150.0

    def __post_init__(self):
        for name in ("e_act", "e_rd", "e_wr", "e_pre"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def e_hit(self) -> float:
        return self.e_rd

    @property
    def e_miss(self) -> float:
        return self.e_act + self.e_rd

    @property
    def e_conflict(self) -> float:
        return self.e_pre + self.e_act + self.e_rd

    @classmethod
    def from_dict(cls, d: dict) -> "AccessEnergyTable":
        keys = ("e_act", "e_rd", "e_wr", "e_pre")
        return cls(**{k: float(d[k]) for k in keys if k in d})


@dataclass
class EnergyReport:
    """Energy/cycle totals for one traced inference pass."""

    workload: str  # e.g. "n100/sparkxd"
    v_supply: float
    energy_scale: float
    total_pj: float
    breakdown_pj: dict[str, float]
    hits: int
    misses: int
    conflicts: int
    n_accesses: int
    cycles: int
    reference: str | None = None
    speedup_vs_reference: float | None = None

    def to_dict(self) -> dict:
        return {
            "workload": self.workload,
            "v_supply": self.v_supply,
            "energy_scale": self.energy_scale,
            "total_pj": self.total_pj,
            "breakdown_pj": self.breakdown_pj,
            "hits": self.hits,
            "misses": self.misses,
            "conflicts": self.conflicts,
            "n_accesses": self.n_accesses,
            "cycles": self.cycles,
            "reference": self.reference,
            "speedup_vs_reference": self.speedup_vs_reference,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")


def trace_inference(
    plan: MappingPlan,
    timing: TimingParams,
    close_rows: bool = True,
) -> AccessTrace:
    """One read per stored weight word in plan order, from all-closed."""
    return replay_accesses(plan.addresses, plan.geom, timing, rw="read",
                           close_rows=close_rows)


def energy_of(
    trace: AccessTrace,
    table: AccessEnergyTable,
    op: VoltageOperatingPoint,
    workload: str = "",
    n_burst_banks: int = 4,
) -> EnergyReport:
    """Scaled energy and pipelined cycles for a trace.

    Every command's nominal energy is multiplied by the operating point's
    V**2 scale.  The breakdown attributes each access its folded
    condition energy; precharges that close rows at the end of the pass
    appear under "close".
    """
    cond = trace.condition
    is_data = (trace.command == int(Command.RD)) | (trace.command == int(Command.WR))
    data_cond = cond[is_data]
    hits = int(np.count_nonzero(data_cond == int(AccessCondition.HIT)))
    misses = int(np.count_nonzero(data_cond == int(AccessCondition.MISS)))
    conflicts = int(np.count_nonzero(data_cond == int(AccessCondition.CONFLICT)))

    n_rd = int(np.count_nonzero(trace.command == int(Command.RD)))
    n_wr = int(np.count_nonzero(trace.command == int(Command.WR)))
    n_act = int(np.count_nonzero(trace.command == int(Command.ACT)))
    n_pre = int(np.count_nonzero(trace.command == int(Command.PRE)))

    if n_wr and n_rd:
        raise ComparisonError("mixed RD/WR traces are not supported for accounting")
    scale = op.energy_scale
    per_data = table.e_wr if n_wr else table.e_rd

    closers = n_pre - conflicts  # precharges not folded into a conflict
    breakdown = {
        "hit": scale * hits * per_data,
        "miss": scale * misses * (table.e_act + per_data),
        "conflict": scale * conflicts * (table.e_pre + table.e_act + per_data),
        "close": scale * closers * table.e_pre,
    }
    total = scale * (n_act * table.e_act + n_pre * table.e_pre
                     + n_rd * table.e_rd + n_wr * table.e_wr)
    assert abs(total - sum(breakdown.values())) <= 1e-6 * max(total, 1.0)

    cycles = burst_cycles(trace, op.timing, n_burst_banks=n_burst_banks)
    return EnergyReport(
        workload=workload,
        v_supply=op.v_supply,
        energy_scale=scale,
        total_pj=float(total),
        breakdown_pj={k: float(v) for k, v in breakdown.items()},
        hits=hits,
        misses=misses,
        conflicts=conflicts,
        n_accesses=hits + misses + conflicts,
        cycles=cycles,
    )


def speedup(report: EnergyReport, reference: EnergyReport) -> float:
    """Cycle-count ratio reference/report for the same workload size."""
    if report.n_accesses != reference.n_accesses:
        raise ComparisonError(
            f"workloads differ: {report.n_accesses} vs {reference.n_accesses} accesses"
        )
    if report.cycles <= 0:
        raise ComparisonError("report has no cycles")
    return reference.cycles / report.cycles


def with_reference(report: EnergyReport, reference: EnergyReport) -> EnergyReport:
    """Attach the reference label and speedup to a report."""
    report.reference = reference.workload
    report.speedup_vs_reference = speedup(report, reference)
    return report


def saving_vs_reference(report: EnergyReport, reference: EnergyReport) -> float:
    """Total-energy saving in percent versus a reference report."""
    if reference.total_pj <= 0:
        raise ComparisonError("reference has no energy")
    return 100.0 * (1.0 - report.total_pj / reference.total_pj)
