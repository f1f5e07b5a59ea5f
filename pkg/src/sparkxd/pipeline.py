"""Experiment orchestration: stages, the full run, and the manifest.

Every stage reads its inputs from and writes its outputs under the run
directory, so the monolithic ``run`` and the individual subcommands
produce bit-identical files.  Stage seeds derive from the master seed
and stable labels; timestamps live only in the manifest.
"""

from __future__ import annotations

import csv
import datetime
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, energy, faults, resilience, snn, storage
from .config import ExperimentConfig
from .datasets import Dataset, load_dataset
from .resilience import DramContext
from .storage import BASELINE, SPARKXD, MappingPlan
from .util import derive_seed
from .voltage import V_NOMINAL, operating_point

log = logging.getLogger("sparkxd")

REPORT_COLUMNS = (
    "voltage", "network", "flavor", "total_pj", "hits", "misses",
    "conflicts", "cycles", "saving_pct", "speedup",
)


def _size_dir(out: Path, n_exc: int) -> Path:
    return out / f"n{n_exc}"


def _cell_dir(out: Path, n_exc: int, v: float) -> Path:
    return _size_dir(out, n_exc) / f"v{v:.3f}"


def load_split(cfg: ExperimentConfig, split: str) -> Dataset:
    ds = load_dataset(**cfg.dataset_paths(split))
    limit = cfg.train_limit if split == "train" else cfg.test_limit
    if limit is not None:
        ds = ds.subset(int(limit))
    return ds


def _model_meta_path(size_dir: Path, tag: str) -> Path:
    return size_dir / f"model_{tag}.json"


def save_model(size_dir: Path, tag: str, model: snn.SnnModel) -> list[Path]:
    """Snapshot weights plus JSON metadata (theta, assignments, accuracy)."""
    size_dir.mkdir(parents=True, exist_ok=True)
    snap = size_dir / f"model_{tag}.spxd"
    storage.write_snapshot(snap, model.weights.ravel())
    meta = {
        "n_classes": model.n_classes,
        "n_exc": model.params.n_exc,
        "n_in": model.params.n_in,
        "acc": model.acc,
        "theta": [float(x) for x in model.theta],
        "assignments": [int(x) for x in model.assignments],
        "params": model.params.to_dict(),
    }
    meta_path = _model_meta_path(size_dir, tag)
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return [snap, meta_path]


def load_model(size_dir: Path, tag: str) -> snn.SnnModel:
    with open(_model_meta_path(size_dir, tag)) as fh:
        meta = json.load(fh)
    params = snn.SnnParams(**meta["params"])
    weights = storage.read_snapshot(size_dir / f"model_{tag}.spxd")
    model = snn.SnnModel(
        params=params,
        weights=weights.reshape(params.n_in, params.n_exc),
        theta=np.array(meta["theta"], np.float64),
        assignments=np.array(meta["assignments"], np.int64),
        n_classes=int(meta["n_classes"]),
        acc=meta["acc"],
    )
    return model


def stage_train(cfg: ExperimentConfig, out: Path, master_seed: int, n_exc: int) -> list[Path]:
    """Train the clean baseline model for one network size."""
    train_set = load_split(cfg, "train")
    test_set = load_split(cfg, "test")
    params = cfg.snn_for_size(n_exc)
    seed = derive_seed(master_seed, "train", n_exc)
    model = snn.init_model(params, derive_seed(seed, "init"), n_classes=train_set.n_classes)
    log.info("training baseline n%d: %d samples x %d epochs",
             n_exc, len(train_set), cfg.baseline_epochs)
    snn.train(model, train_set.images, epochs=cfg.baseline_epochs,
              seed=derive_seed(seed, "stdp"))
    snn.assign_classes(model, train_set.images, train_set.labels,
                       derive_seed(seed, "assign"))
    acc, _ = snn.infer(model, test_set.images, test_set.labels,
                       derive_seed(seed, "eval"))
    model.acc = acc
    log.info("baseline n%d accuracy: %.4f", n_exc, acc)
    return save_model(_size_dir(out, n_exc), "baseline", model)


def _context(cfg: ExperimentConfig, plan: MappingPlan, master_seed: int, n_exc: int) -> DramContext:
    return DramContext(
        geom=cfg.geometry,
        plan=plan,
        error_model=cfg.error_model,
        seed=derive_seed(master_seed, "faults", n_exc),
        p_fault=cfg.p_fault,
        m3_p1=cfg.m3_p1,
        m3_p0=cfg.m3_p0,
        clamp=(0.0, cfg.snn.w_max) if cfg.clamp_weights else None,
    )


def stage_sweep(cfg: ExperimentConfig, out: Path, master_seed: int, n_exc: int) -> list[Path]:
    """Fault-aware training plus BER_th search for one network size."""
    size_dir = _size_dir(out, n_exc)
    model_0 = load_model(size_dir, "baseline")
    train_set = load_split(cfg, "train")
    test_set = load_split(cfg, "test")
    n_weights = model_0.params.n_in * model_0.params.n_exc
    plan = storage.plan_baseline(n_weights, cfg.geometry)
    context = _context(cfg, plan, master_seed, n_exc)
    seed = derive_seed(master_seed, "sweep", n_exc)
    result = resilience.fault_aware_train(
        model_0, cfg.schedule, context, train_set, test_set,
        n_epoch=cfg.n_epoch, acc_bound_pp=cfg.acc_bound_pp, seed=seed,
    )
    paths = []
    res_path = size_dir / "resilience.json"
    result.to_json(res_path)
    paths.append(res_path)
    if result.model_1 is not None:
        paths.extend(save_model(size_dir, "hardened", result.model_1))
    log.info("n%d: ber_th=%s acc_model1=%s", n_exc, result.ber_th, result.acc_model1)
    return paths


def _read_ber_th(size_dir: Path) -> float:
    with open(size_dir / "resilience.json") as fh:
        res = json.load(fh)
    ber_th = res.get("ber_th")
    if ber_th is None:
        raise RuntimeError(
            f"{size_dir}: no rate met the accuracy bound; the subarray-aware "
            "mapping has no threshold to apply"
        )
    return float(ber_th)


def stage_map(
    cfg: ExperimentConfig,
    out: Path,
    master_seed: int,
    n_exc: int,
    v_supply: float,
    flavor: str,
) -> list[Path]:
    """Build and export the mapping plan for one (size, voltage, flavor)."""
    cell = _cell_dir(out, n_exc, v_supply)
    cell.mkdir(parents=True, exist_ok=True)
    n_weights = cfg.snn.n_in * n_exc
    if flavor == BASELINE:
        plan = storage.plan_baseline(n_weights, cfg.geometry)
    elif flavor == SPARKXD:
        ber_th = _read_ber_th(_size_dir(out, n_exc))
        ber = cfg.ber_profile.ber_at(v_supply)
        weak = faults.generate_map(
            cfg.error_model, ber, cfg.geometry,
            seed=derive_seed(master_seed, "opmap", n_exc, f"{v_supply:.3f}"),
            p_fault=cfg.p_fault, m3_p1=cfg.m3_p1, m3_p0=cfg.m3_p0,
        )
        rates = faults.subarray_rates(weak, cfg.geometry)
        plan = storage.plan_sparkxd(n_weights, cfg.geometry, rates, ber_th)
        weak.to_jsonl(cell / "weak_cells.jsonl")
    else:
        raise ValueError(f"unknown plan flavor {flavor!r}")
    path = cell / f"plan_{flavor}.csv"
    plan.to_csv(path)
    return [path] + ([cell / "weak_cells.jsonl"] if flavor == SPARKXD else [])


def stage_energy(
    cfg: ExperimentConfig,
    out: Path,
    master_seed: int,
    n_exc: int,
    v_supply: float,
) -> list[Path]:
    """Trace both plans and account energy: approximate vs nominal reference."""
    cell = _cell_dir(out, n_exc, v_supply)
    n_weights = cfg.snn.n_in * n_exc
    nominal = operating_point(V_NOMINAL, cfg.voltage_model, cfg.ber_profile,
                              cfg.energy_calibration)
    op = operating_point(v_supply, cfg.voltage_model, cfg.ber_profile,
                         cfg.energy_calibration)

    base_plan = MappingPlan.from_csv(cell / f"plan_{BASELINE}.csv", cfg.geometry, BASELINE)
    spark_plan = MappingPlan.from_csv(cell / f"plan_{SPARKXD}.csv", cfg.geometry, SPARKXD)
    if len(base_plan) != n_weights or len(spark_plan) != n_weights:
        raise RuntimeError(f"{cell}: plan sizes disagree with network size")

    base_trace = energy.trace_inference(base_plan, nominal.timing)
    spark_trace = energy.trace_inference(spark_plan, op.timing)
    if cfg.export_traces:
        base_trace.to_csv(cell / "trace_baseline.csv")
        spark_trace.to_csv(cell / "trace_sparkxd.csv")

    ref = energy.energy_of(base_trace, cfg.energy_table, nominal,
                           workload=f"n{n_exc}/{BASELINE}@{V_NOMINAL:.3f}",
                           n_burst_banks=cfg.n_burst_banks)
    rep = energy.energy_of(spark_trace, cfg.energy_table, op,
                           workload=f"n{n_exc}/{SPARKXD}@{v_supply:.3f}",
                           n_burst_banks=cfg.n_burst_banks)
    energy.with_reference(rep, ref)

    ref_path = cell / "energy_reference.json"
    rep_path = cell / "energy_sparkxd.json"
    ref.to_json(ref_path)
    rep.to_json(rep_path)

    row_path = cell / "energy_row.csv"
    with open(row_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        w.writerow(_report_row(n_exc, v_supply, rep, ref))
    paths = [ref_path, rep_path, row_path]
    if cfg.export_traces:
        paths += [cell / "trace_baseline.csv", cell / "trace_sparkxd.csv"]
    return paths


def _report_row(n_exc: int, v_supply: float, rep: energy.EnergyReport,
                ref: energy.EnergyReport) -> list:
    saving = energy.saving_vs_reference(rep, ref)
    return [
        f"{v_supply:.3f}",
        f"n{n_exc}",
        SPARKXD,
        f"{rep.total_pj:.3f}",
        rep.hits,
        rep.misses,
        rep.conflicts,
        rep.cycles,
        f"{saving:.4f}",
        f"{rep.speedup_vs_reference:.4f}",
    ]


def stage_report(cfg: ExperimentConfig, out: Path) -> list[Path]:
    """Aggregate the per-cell rows into the savings table."""
    rows = []
    for n_exc in cfg.network_sizes:
        for v in cfg.voltages:
            row_path = _cell_dir(out, n_exc, v) / "energy_row.csv"
            with open(row_path, newline="") as fh:
                recs = list(csv.DictReader(fh))
            rows.extend(recs)
    report_path = out / "report.csv"
    with open(report_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        w.writeheader()
        for rec in rows:
            w.writerow(rec)

    # per-voltage mean savings, the Table-I-style summary
    summary_path = out / "savings_summary.csv"
    by_voltage: dict[str, list[float]] = {}
    for rec in rows:
        by_voltage.setdefault(rec["voltage"], []).append(float(rec["saving_pct"]))
    with open(summary_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["voltage", "mean_total_saving_pct", "n_cells"])
        for v in sorted(by_voltage, reverse=True):
            vals = by_voltage[v]
            w.writerow([v, f"{sum(vals) / len(vals):.4f}", len(vals)])
    return [report_path, summary_path]


def _energy_cell(args) -> list[str]:
    cfg_raw, out, master_seed, n_exc, v = args
    cfg = ExperimentConfig.from_dict(cfg_raw)
    paths = []
    for flavor in (BASELINE, SPARKXD):
        paths += stage_map(cfg, Path(out), master_seed, n_exc, v, flavor)
    paths += stage_energy(cfg, Path(out), master_seed, n_exc, v)
    return [str(p) for p in paths]


def run_experiment(
    cfg: ExperimentConfig,
    out: Path,
    master_seed: int = 0,
    jobs: int = 1,
) -> dict:
    """Full pipeline over every (network size, voltage) cell.

    Returns the manifest dict (also written to ``out/manifest.json``).
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    artifacts: list[str] = []

    for n_exc in cfg.network_sizes:
        artifacts += [str(p) for p in stage_train(cfg, out, master_seed, n_exc)]
        artifacts += [str(p) for p in stage_sweep(cfg, out, master_seed, n_exc)]

    cells = [(cfg.raw, str(out), master_seed, n, v)
             for n in cfg.network_sizes for v in cfg.voltages]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for paths in pool.map(_energy_cell, cells):
                artifacts += paths
    else:
        for cell in cells:
            artifacts += _energy_cell(cell)

    artifacts += [str(p) for p in stage_report(cfg, out)]
    finished = datetime.datetime.now(datetime.timezone.utc).isoformat()

    manifest = {
        "config_hash": cfg.hash(),
        "version": __version__,
        "master_seed": master_seed,
        "stage_seeds": {
            f"train/n{n}": derive_seed(master_seed, "train", n) for n in cfg.network_sizes
        },
        "started": started,
        "finished": finished,
        "artifacts": sorted(set(artifacts)),
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return manifest
