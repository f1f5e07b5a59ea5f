"""Experiment configuration: JSON schema, validation, defaults.

All knobs live in one JSON document; the master seed arrives separately
on the command line and fans out to stage seeds via util.derive_seed.
Validation collects every violation before reporting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .dram import DramGeometry
from .energy import AccessEnergyTable
from .resilience import BerSchedule
from .snn import SnnParams
from .voltage import ArrayVoltageModel, BerProfile, V_MIN, V_NOMINAL
from .util import config_hash


class ConfigError(ValueError):
    """One or more invalid configuration entries."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("invalid config:\n  - " + "\n  - ".join(violations))


DEFAULT_VOLTAGES = (1.325, 1.250, 1.175, 1.100, 1.025)


@dataclass
class ExperimentConfig:
    geometry: DramGeometry = field(default_factory=DramGeometry)
    voltages: tuple[float, ...] = DEFAULT_VOLTAGES
    ber_profile: BerProfile = field(default_factory=BerProfile)
    schedule: BerSchedule = field(
        default_factory=lambda: BerSchedule.geometric(1e-5, 4)
    )
    snn: SnnParams = field(default_factory=SnnParams)
    network_sizes: tuple[int, ...] = (100,)
    baseline_epochs: int = 3
    n_epoch: int = 1  # retraining epochs per schedule rate
    acc_bound_pp: float = 1.0
    n_curve_seeds: int = 5
    error_model: str = "M0"
    p_fault: float = 1.0
    m3_p1: float = 1.0
    m3_p0: float = 0.0
    clamp_weights: bool = True  # bound decoded weights to [0, w_max]
    voltage_model: ArrayVoltageModel = field(default_factory=ArrayVoltageModel)
    energy_table: AccessEnergyTable = field(default_factory=AccessEnergyTable)
    energy_calibration: dict[float, float] = field(default_factory=dict)
    n_burst_banks: int = 4
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    train_csv: str | None = None
    test_csv: str | None = None
    train_limit: int | None = None
    test_limit: int | None = None
    export_traces: bool = False
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        violations: list[str] = []

        def build(name, fn, default):
            try:
                return fn(d[name]) if name in d else default
            except (ValueError, KeyError, TypeError) as e:
                violations.append(f"{name}: {e}")
                return default

        geometry = build("geometry", DramGeometry.from_dict, DramGeometry())
        profile = build("ber_profile", BerProfile.from_pairs, BerProfile())
        schedule = build("schedule", lambda r: BerSchedule(tuple(r)),
                         BerSchedule.geometric(1e-5, 4))
        snn_params = build("snn", lambda s: SnnParams(**s), SnnParams())
        vmodel = build(
            "voltage_model",
            lambda v: ArrayVoltageModel(
                tau_act_ns=float(v.get("tau_nominal_ns", 26.0)),
                tau_pre_ns=float(v.get("tau_precharge_ns", 4.6)),
                k=float(v.get("tau_exponent", 1.0)),
                t_col_ns=float(v.get("t_col_ns", 10.0)),
                clock_ns=float(v.get("clock_ns", 1.25)),
            ),
            ArrayVoltageModel(),
        )
        table = build("energy_table", AccessEnergyTable.from_dict, AccessEnergyTable())
        calibration = build(
            "energy_calibration",
            lambda rows: {float(v): float(pp) for v, pp in rows},
            {},
        )

        voltages = tuple(float(v) for v in d.get("voltages", DEFAULT_VOLTAGES))
        for v in voltages:
            if not V_MIN <= v <= V_NOMINAL:
                violations.append(f"voltages: {v} outside [{V_MIN}, {V_NOMINAL}] V")

        sizes = tuple(int(s) for s in d.get("network_sizes", (100,)))
        for s in sizes:
            if s < 1:
                violations.append(f"network_sizes: {s} must be >= 1")

        for name in ("baseline_epochs", "n_epoch", "n_curve_seeds", "n_burst_banks"):
            if int(d.get(name, getattr(cls, name))) < 1:
                violations.append(f"{name}: must be >= 1")

        error_model = str(d.get("error_model", "M0"))
        if error_model not in ("M0", "M1", "M2", "M3"):
            violations.append(f"error_model: unknown model {error_model!r}")

        acc_bound_pp = float(d.get("acc_bound_pp", 1.0))
        if acc_bound_pp < 0:
            violations.append("acc_bound_pp: must be >= 0")

        # capacity must cover the largest network under the baseline plan
        if sizes and not violations:
            max_words = max(sizes) * snn_params.n_in
            if max_words > geometry.capacity_words:
                violations.append(
                    f"geometry: capacity {geometry.capacity_words} words cannot hold "
                    f"{max_words} weights of the largest network"
                )

        if violations:
            raise ConfigError(violations)

        cfg = cls(
            geometry=geometry,
            voltages=voltages,
            ber_profile=profile,
            schedule=schedule,
            snn=snn_params,
            network_sizes=sizes,
            baseline_epochs=int(d.get("baseline_epochs", 3)),
            n_epoch=int(d.get("n_epoch", 1)),
            acc_bound_pp=acc_bound_pp,
            n_curve_seeds=int(d.get("n_curve_seeds", 5)),
            error_model=error_model,
            p_fault=float(d.get("p_fault", 1.0)),
            m3_p1=float(d.get("m3_p1", 1.0)),
            m3_p0=float(d.get("m3_p0", 0.0)),
            clamp_weights=bool(d.get("clamp_weights", True)),
            voltage_model=vmodel,
            energy_table=table,
            energy_calibration=calibration,
            n_burst_banks=int(d.get("n_burst_banks", 4)),
            train_images=d.get("train_images"),
            train_labels=d.get("train_labels"),
            test_images=d.get("test_images"),
            test_labels=d.get("test_labels"),
            train_csv=d.get("train_csv"),
            test_csv=d.get("test_csv"),
            train_limit=d.get("train_limit"),
            test_limit=d.get("test_limit"),
            export_traces=bool(d.get("export_traces", False)),
            raw=d,
        )
        return cfg

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except FileNotFoundError as e:
            raise ConfigError([f"config file: {e}"]) from e
        except json.JSONDecodeError as e:
            raise ConfigError([f"config file: {e}"]) from e
        return cls.from_dict(d)

    def hash(self) -> str:
        return config_hash(self.raw)

    def snn_for_size(self, n_exc: int) -> SnnParams:
        from dataclasses import replace

        return replace(self.snn, n_exc=n_exc)

    def dataset_paths(self, split: str) -> dict:
        if split == "train":
            return {
                "images_path": self.train_images,
                "labels_path": self.train_labels,
                "csv_path": self.train_csv,
            }
        return {
            "images_path": self.test_images,
            "labels_path": self.test_labels,
            "csv_path": self.test_csv,
        }
