"""Fault-aware training and maximum-tolerable-BER search.

The hardening loop walks an increasing schedule of bit error rates; at
each rate it draws a fresh weak-cell layout, injects the flips into the
stored weights, retrains for a fixed number of epochs (training state
carries over across rates), and tests.  Every rate whose test accuracy
stays within the bound of the clean baseline updates the recorded
improved model and the maximum tolerable BER, so the final value is the
largest passing rate of a full linear scan.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import faults, snn, storage
from .datasets import Dataset
from .dram import DramGeometry
from .storage import MappingPlan
from .util import derive_seed


class ScheduleError(ValueError):
    """Empty or non-increasing BER schedule."""


@dataclass(frozen=True)
class BerSchedule:
    """Strictly increasing error rates, each in (0, 1]."""

    rates: tuple[float, ...]

    def __post_init__(self):
        if not self.rates:
            raise ScheduleError("schedule must contain at least one rate")
        rates = tuple(float(r) for r in self.rates)
        object.__setattr__(self, "rates", rates)
        for r in rates:
            if not 0.0 < r <= 1.0:
                raise ScheduleError(f"rate {r} outside (0, 1]")
        if any(a >= b for a, b in zip(rates, rates[1:])):
            raise ScheduleError(f"rates must be strictly increasing, got {rates}")

    def __len__(self) -> int:
        return len(self.rates)

    @classmethod
    def geometric(cls, start: float, n: int, factor: float = 10.0) -> "BerSchedule":
        """Schedule where each rate is ``factor`` times the previous one."""
        return cls(tuple(start * factor**i for i in range(n)))


@dataclass
class DramContext:
    """Everything needed to turn a BER into corrupted stored weights.

    ``clamp`` bounds decoded weights to the synapse model's physical range
    (flips still land on the stored bits; the simulator just cannot realize
    a 2**127 conductance).  Pass ``None`` to let Inf/NaN/huge values
    through to the network.
    """

    geom: DramGeometry
    plan: MappingPlan
    error_model: str = "M0"
    seed: int = 0
    p_fault: float = 1.0
    m3_p1: float = 1.0
    m3_p0: float = 0.0
    clamp: tuple[float, float] | None = (0.0, 1.0)

    def map_for(self, rate: float, rate_index: int, rep: int) -> faults.WeakCellMap:
        """Weak-cell layout for one (rate, repetition); fresh seed each."""
        return faults.generate_map(
            self.error_model,
            rate,
            self.geom,
            seed=derive_seed(self.seed, "map", rate_index, rep),
            p_fault=self.p_fault,
            m3_p1=self.m3_p1,
            m3_p0=self.m3_p0,
        )

    def corrupt(self, weights: np.ndarray, weak_map: faults.WeakCellMap, inject_seed: int) -> np.ndarray:
        """Store -> inject -> load round trip through the mapping plan."""
        flat = np.ascontiguousarray(weights, np.float32).ravel()
        image = storage.store(flat, self.plan)
        flipped = faults.inject(image, weak_map, self.plan.word_index, inject_seed)
        return storage.load(flipped, self.plan, clamp=self.clamp).reshape(weights.shape)


class ResidentFaults:
    """Weights resident on weak DRAM cells: every write re-acquires the flips.

    Weak cells persist for the whole training round, so a weight stored on
    one reads back corrupted no matter how often STDP rewrites it.  With
    flip probability 1 (the default split) the read-back is the written
    pattern XOR the cell mask; probabilistic cells redraw per write.
    """

    def __init__(self, weak_map: faults.WeakCellMap, plan: MappingPlan,
                 clamp: tuple[float, float] | None, seed: int):
        self.slot, self.bit, self.p1, self.p0 = faults.match_cells(weak_map, plan.word_index)
        self.clamp = clamp
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, len(self.slot)]))

    def apply(self, model: snn.SnnModel) -> None:
        """Re-assert the resident corruption on the model's weights in place."""
        flat = model.weights.reshape(-1)
        image = flat.view(np.uint32)
        faults.apply_flips(image, self.slot, self.bit, self.p1, self.p0, self.rng)
        if self.clamp is not None:
            lo, hi = self.clamp
            np.clip(flat, lo, hi, out=flat)
            flat[np.isnan(flat)] = lo


@dataclass
class ResilienceResult:
    """Outcome of the hardening loop."""

    rates: list[float]
    acc_model0: float
    improved_curve: list[float]  # test accuracy after training at each rate
    baseline_curve: list[float]  # unhardened model, injection only
    ber_th: float | None
    acc_model1: float | None
    model_1: snn.SnnModel | None = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "rates": self.rates,
            "acc_model0": self.acc_model0,
            "improved_curve": self.improved_curve,
            "baseline_curve": self.baseline_curve,
            "ber_th": self.ber_th,
            "acc_model1": self.acc_model1,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")


def corrupted_copy(
    model: snn.SnnModel,
    context: DramContext,
    weak_map: faults.WeakCellMap,
    inject_seed: int,
) -> snn.SnnModel:
    out = model.copy()
    out.weights = context.corrupt(model.weights, weak_map, inject_seed)
    return out


def tolerance_curve(
    model: snn.SnnModel,
    rates,
    context: DramContext,
    test_set: Dataset,
    n_seeds: int = 5,
    seed: int = 0,
) -> dict[float, list[float]]:
    """Injection-only accuracy per rate, over fresh weak-cell layouts.

    No training happens here and class assignments stay frozen, so the
    curve isolates the effect of weight corruption.  A rate of 0 is
    allowed and evaluates the clean model.  Returns the per-seed
    accuracies per rate; the curve's mean at a rate is their average.
    """
    curve: dict[float, list[float]] = {}
    for i, rate in enumerate(rates):
        accs = []
        for rep in range(n_seeds):
            if rate == 0.0:
                probe = model
            else:
                weak = context.map_for(rate, i, rep)
                probe = corrupted_copy(model, context, weak,
                                       derive_seed(seed, "curve-inject", i, rep))
            acc, _ = snn.infer(probe, test_set.images, test_set.labels,
                               derive_seed(seed, "curve-infer", i, rep))
            accs.append(acc)
        curve[float(rate)] = accs
    return curve


def fault_aware_train(
    model_0: snn.SnnModel,
    schedule: BerSchedule,
    context: DramContext,
    train_set: Dataset,
    test_set: Dataset,
    n_epoch: int = 1,
    acc_bound_pp: float = 1.0,
    seed: int = 0,
) -> ResilienceResult:
    """Harden a trained baseline model against DRAM bit errors.

    ``model_0.acc`` must hold the recorded clean-test accuracy; the loop
    accepts a rate when the retrained model's accuracy is at least
    ``model_0.acc`` minus the bound (in percentage points).
    """
    if model_0.acc is None:
        raise ValueError("model_0 must carry its recorded baseline accuracy")
    bound = model_0.acc - acc_bound_pp / 100.0

    model_temp = model_0.copy()
    improved_curve: list[float] = []
    model_1 = None
    ber_th = None
    acc_model1 = None

    for i, rate in enumerate(schedule.rates):
        weak = context.map_for(rate, i, rep=0)
        resident = ResidentFaults(weak, context.plan, context.clamp,
                                  derive_seed(seed, "inject", i))
        resident.apply(model_temp)  # the weights now live on weak cells
        snn.train(model_temp, train_set.images, epochs=n_epoch,
                  seed=derive_seed(seed, "train", i),
                  after_sample=resident.apply)
        snn.assign_classes(model_temp, train_set.images, train_set.labels,
                           derive_seed(seed, "assign", i))
        acc, _ = snn.infer(model_temp, test_set.images, test_set.labels,
                           derive_seed(seed, "test", i))
        improved_curve.append(acc)
        if acc >= bound:
            model_1 = model_temp.copy()
            model_1.acc = acc
            acc_model1 = acc
            ber_th = float(rate)

    base_curve = tolerance_curve(model_0, schedule.rates, context, test_set,
                                 n_seeds=1, seed=derive_seed(seed, "baseline-curve"))
    baseline_curve = [base_curve[float(r)][0] for r in schedule.rates]

    return ResilienceResult(
        rates=[float(r) for r in schedule.rates],
        acc_model0=float(model_0.acc),
        improved_curve=improved_curve,
        baseline_curve=baseline_curve,
        ber_th=ber_th,
        acc_model1=acc_model1,
        model_1=model_1,
    )
