"""Supply-voltage model: array-voltage dynamics, timing, energy scale, BER.

A first-order RC stand-in for the cell-array voltage gives the three
readiness thresholds that define the timing parameters:

* ready-to-access    -- V_array reaches 75% of V_supply  -> t_RCD
* ready-to-precharge -- V_array reaches 98% of V_supply  -> t_RAS
* ready-to-activate  -- V_array within 2% of V_supply/2  -> t_RP

Access energy scales with the square of the supply voltage; bit error
rates come from a configurable voltage->BER table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dram import TimingParams

V_NOMINAL = 1.35
V_MIN = 1.025

ACTIVATION = "activation"
PRECHARGE = "precharge"

READY_ACCESS_FRAC = 0.75
READY_PRECHARGE_FRAC = 0.98
READY_ACTIVATE_TOL = 0.02


class VoltageRangeError(ValueError):
    """Supply voltage outside the supported 1.025-1.35 V window."""


def check_supply(v_supply: float) -> float:
    if not V_MIN <= v_supply <= V_NOMINAL:
        raise VoltageRangeError(
            f"v_supply={v_supply} outside supported range [{V_MIN}, {V_NOMINAL}] V"
        )
    return v_supply


@dataclass(frozen=True)
class ArrayVoltageModel:
    """First-order charging model of the array voltage.

    tau_act_ns / tau_pre_ns are the RC constants of the activation and
    precharge transients at nominal voltage; both stretch as
    tau * (V_nominal / V)**k at reduced supply.
    """

    tau_act_ns: float = 26.0
    tau_pre_ns: float = 4.6
    k: float = 1.0
    t_col_ns: float = 10.0
    clock_ns: float = 1.25

    def __post_init__(self):
        if self.tau_act_ns <= 0 or self.tau_pre_ns <= 0:
            raise ValueError("time constants must be positive")
        if self.k < 0:
            raise ValueError("tau exponent must be >= 0")

    def tau(self, v_supply: float, phase: str) -> float:
        base = self.tau_act_ns if phase == ACTIVATION else self.tau_pre_ns
        return base * (V_NOMINAL / v_supply) ** self.k


def array_voltage(t_ns: float, phase: str, v_supply: float, model: ArrayVoltageModel) -> float:
    """Array voltage at time t after the start of activation or precharge.

    Activation charges the array from the precharged level V/2 toward V;
    precharge decays it from V back toward V/2.
    """
    if t_ns < 0:
        raise ValueError("t_ns must be >= 0")
    if phase not in (ACTIVATION, PRECHARGE):
        raise ValueError(f"phase must be {ACTIVATION!r} or {PRECHARGE!r}")
    check_supply(v_supply)
    tau = model.tau(v_supply, phase)
    half = v_supply / 2.0
    if phase == ACTIVATION:
        return half + half * (1.0 - math.exp(-t_ns / tau))
    return half + half * math.exp(-t_ns / tau)


def _crossing_time(predicate, t_hi: float) -> float:
    """Smallest t in [0, t_hi] satisfying a monotone predicate, by bisection."""
    if predicate(0.0):
        return 0.0
    lo, hi = 0.0, t_hi
    while not predicate(hi):
        lo, hi = hi, hi * 2.0
    for _ in range(80):
        mid = (lo + hi) / 2.0
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    return hi


def derive_timing(v_supply: float, model: ArrayVoltageModel) -> TimingParams:
    """Timing parameters from the readiness thresholds, rounded up to the grid.

    t_RCD and t_RAS are the 75% and 98% crossings of the activation
    transient, t_RP the 2%-of-V/2 settling of the precharge transient.
    """
    check_supply(v_supply)
    tau_act = model.tau(v_supply, ACTIVATION)

    t_rcd = _crossing_time(
        lambda t: array_voltage(t, ACTIVATION, v_supply, model) >= READY_ACCESS_FRAC * v_supply,
        tau_act,
    )
    t_ras = _crossing_time(
        lambda t: array_voltage(t, ACTIVATION, v_supply, model) >= READY_PRECHARGE_FRAC * v_supply,
        tau_act,
    )
    half = v_supply / 2.0
    t_rp = _crossing_time(
        lambda t: abs(array_voltage(t, PRECHARGE, v_supply, model) - half) <= READY_ACTIVATE_TOL * half,
        model.tau(v_supply, PRECHARGE),
    )

    grid = model.clock_ns

    def snap(ns: float) -> float:
        return math.ceil(ns / grid - 1e-9) * grid

    return TimingParams(
        t_rcd=snap(t_rcd),
        t_ras=snap(t_ras),
        t_rp=snap(t_rp),
        t_col=snap(model.t_col_ns),
        clock_ns=grid,
    )


def energy_scale(v_supply: float, calibration: dict[float, float] | None = None) -> float:
    """Per-access energy multiplier versus nominal voltage (V**2 law).

    ``calibration`` optionally maps voltages to an offset, in percentage
    points of saving, added on top of the quadratic law (defaults zero).
    """
    check_supply(v_supply)
    scale = (v_supply / V_NOMINAL) ** 2
    if calibration:
        for v, offset_pp in calibration.items():
            if math.isclose(float(v), v_supply, rel_tol=0, abs_tol=1e-9):
                scale -= offset_pp / 100.0
                break
    return scale


def saving_pct(v_supply: float, calibration: dict[float, float] | None = None) -> float:
    """Per-access energy saving versus nominal, in percent."""
    return 100.0 * (1.0 - energy_scale(v_supply, calibration))


@dataclass(frozen=True)
class BerProfile:
    """Voltage -> bit error rate table with log-linear interpolation.

    The shipped default is an illustrative exponential profile (1e-8 at
    1.325 V rising to 1e-4 at 1.025 V); it is a calibration input, not a
    measurement.
    """

    table: tuple[tuple[float, float], ...] = (
        (1.025, 1e-4),
        (1.100, 1e-5),
        (1.175, 1e-6),
        (1.250, 1e-7),
        (1.325, 1e-8),
        (1.350, 0.0),
    )

    def __post_init__(self):
        if not self.table:
            raise ValueError("BER profile must be non-empty")
        sorted_tab = tuple(sorted((float(v), float(b)) for v, b in self.table))
        object.__setattr__(self, "table", sorted_tab)
        volts = [v for v, _ in sorted_tab]
        if len(set(volts)) != len(volts):
            raise ValueError("duplicate voltages in BER profile")
        bers = [b for _, b in sorted_tab]
        if any(not 0.0 <= b <= 1.0 for b in bers):
            raise ValueError("BER values must lie in [0, 1]")
        if any(bers[i] < bers[i + 1] for i in range(len(bers) - 1)):
            raise ValueError("BER must be non-increasing in voltage")

    @classmethod
    def from_pairs(cls, pairs) -> "BerProfile":
        return cls(table=tuple((float(v), float(b)) for v, b in pairs))

    def ber_at(self, v_supply: float) -> float:
        """BER at a voltage: exact table hits, log-linear in between.

        Voltages below the table range are unsupported (no extrapolation
        toward higher error rates); above the range the top entry applies.
        """
        volts = [v for v, _ in self.table]
        bers = [b for _, b in self.table]
        for v, b in self.table:
            if math.isclose(v, v_supply, rel_tol=0, abs_tol=1e-9):
                return b
        if v_supply < volts[0]:
            raise VoltageRangeError(
                f"v_supply={v_supply} below profile range (min {volts[0]})"
            )
        if v_supply > volts[-1]:
            return bers[-1]
        hi = next(i for i, v in enumerate(volts) if v > v_supply)
        lo = hi - 1
        frac = (v_supply - volts[lo]) / (volts[hi] - volts[lo])
        b_lo, b_hi = bers[lo], bers[hi]
        if b_hi == 0.0:
            # geometric interpolation collapses to zero beyond the last
            # nonzero entry
            return 0.0
        return math.exp((1.0 - frac) * math.log(b_lo) + frac * math.log(b_hi))


@dataclass(frozen=True)
class VoltageOperatingPoint:
    """Supply voltage plus everything derived from it."""

    v_supply: float
    timing: TimingParams
    energy_scale: float
    ber: float

    def __post_init__(self):
        check_supply(self.v_supply)
        if not 0.0 < self.energy_scale <= 1.0:
            raise ValueError(f"energy_scale must be in (0, 1], got {self.energy_scale}")
        if not 0.0 <= self.ber <= 1.0:
            raise ValueError(f"ber must be in [0, 1], got {self.ber}")
        if math.isclose(self.v_supply, V_NOMINAL, abs_tol=1e-9) and self.ber != 0.0:
            raise ValueError("nominal voltage must be error-free (ber 0)")


def operating_point(
    v_supply: float,
    model: ArrayVoltageModel | None = None,
    profile: BerProfile | None = None,
    calibration: dict[float, float] | None = None,
) -> VoltageOperatingPoint:
    """Bundle timing, energy scale and BER for one supply voltage."""
    model = model or ArrayVoltageModel()
    profile = profile or BerProfile()
    return VoltageOperatingPoint(
        v_supply=v_supply,
        timing=derive_timing(v_supply, model),
        energy_scale=energy_scale(v_supply, calibration),
        ber=profile.ber_at(v_supply),
    )
