"""Spiking network engine: rate coding, LIF dynamics, STDP, inference.

The network is a single fully-connected excitatory layer with lateral
inhibition.  Pixels are Poisson rate-coded; each excitatory neuron is a
leaky integrate-and-fire unit with a conductance synapse, an adaptive
threshold and a refractory period.  Learning is unsupervised trace-based
STDP with hard weight bounds; class labels come from a separate
highest-response labeling pass.

Time is integrated with an exponential-Euler step at fixed dt, so the
zero-input membrane trajectory matches the analytic leak exactly up to
float rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import accel
from .util import derive_seed


@dataclass(frozen=True)
class SnnParams:
    """Hyperparameters; defaults are our desk-scale values, not measurements."""

    n_in: int = 784
    n_exc: int = 100
    dt_ms: float = 1.0
    duration_ms: float = 350.0
    max_rate_hz: float = 63.75
    tau_mem_ms: float = 100.0
    tau_syn_ms: float = 1.0
    v_rest_mv: float = -65.0
    v_reset_mv: float = -65.0
    v_th_mv: float = -52.0
    theta_plus_mv: float = 0.3
    tau_theta_ms: float = 1e6
    refrac_ms: float = 5.0
    inhib_mv: float = 17.0
    eta_pre: float = 1e-4
    eta_post: float = 0.01
    x_tar: float = 0.4
    tau_pre_ms: float = 20.0
    tau_post_ms: float = 20.0
    w_max: float = 1.0
    w_norm_total: float | None = None  # per-neuron input weight sum; None -> n_in/25

    def __post_init__(self):
        if self.v_reset_mv >= self.v_th_mv:
            raise ValueError("v_reset must be below v_th")
        for name in ("tau_mem_ms", "tau_syn_ms", "tau_theta_ms", "tau_pre_ms",
                     "tau_post_ms", "dt_ms", "duration_ms"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration_ms / self.dt_ms))

    @property
    def refrac_steps(self) -> int:
        return int(round(self.refrac_ms / self.dt_ms))

    @property
    def norm_total(self) -> float:
        return self.w_norm_total if self.w_norm_total is not None else self.n_in / 25.0

    def decays(self) -> tuple[float, float, float, float, float]:
        """(membrane, synapse, theta, pre-trace, post-trace) per-step factors."""
        return (
            math.exp(-self.dt_ms / self.tau_mem_ms),
            math.exp(-self.dt_ms / self.tau_syn_ms),
            math.exp(-self.dt_ms / self.tau_theta_ms),
            math.exp(-self.dt_ms / self.tau_pre_ms),
            math.exp(-self.dt_ms / self.tau_post_ms),
        )

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return asdict(self)


@dataclass
class SnnModel:
    """Trained state: the weight matrix plus per-neuron adaptation and labels."""

    params: SnnParams
    weights: np.ndarray  # (n_in, n_exc) float32 in [0, w_max]
    theta: np.ndarray  # (n_exc,) float64 adaptive threshold offsets
    assignments: np.ndarray  # (n_exc,) int64 neuron -> class, -1 unassigned
    n_classes: int = 10
    acc: float | None = None

    def copy(self) -> "SnnModel":
        return SnnModel(
            params=self.params,
            weights=self.weights.copy(),
            theta=self.theta.copy(),
            assignments=self.assignments.copy(),
            n_classes=self.n_classes,
            acc=self.acc,
        )


def init_model(params: SnnParams, seed: int, n_classes: int = 10) -> SnnModel:
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.0, 0.3, size=(params.n_in, params.n_exc)) * params.w_max
    return SnnModel(
        params=params,
        weights=w.astype(np.float32),
        theta=np.zeros(params.n_exc, np.float64),
        assignments=np.full(params.n_exc, -1, np.int64),
        n_classes=n_classes,
    )


def rate_encode(
    image: np.ndarray,
    duration_ms: float,
    dt_ms: float,
    max_rate_hz: float,
    seed: int,
) -> np.ndarray:
    """Poisson spike train for one image, shape (steps, n_pixels) uint8.

    Each pixel fires independently at intensity * max_rate; per-bin
    Bernoulli thinning of the Poisson process at the simulation dt.
    """
    image = np.asarray(image, dtype=np.float64).ravel()
    if image.size and (image.min() < 0.0 or image.max() > 1.0):
        raise ValueError("pixel intensities must lie in [0, 1]")
    steps = int(round(duration_ms / dt_ms))
    p = image * max_rate_hz * (dt_ms / 1000.0)
    rng = np.random.default_rng(seed)
    return (rng.random((steps, image.size)) < p).astype(np.uint8)


@dataclass
class NeuronState:
    """Per-neuron dynamic state for the single-step interface."""

    v: np.ndarray  # membrane potential, mV
    g: np.ndarray  # synaptic conductance
    theta: np.ndarray  # adaptive threshold offset, mV
    refrac: np.ndarray  # refractory countdown, steps

    @classmethod
    def resting(cls, params: SnnParams) -> "NeuronState":
        n = params.n_exc
        return cls(
            v=np.full(n, params.v_rest_mv, np.float64),
            g=np.zeros(n, np.float64),
            theta=np.zeros(n, np.float64),
            refrac=np.zeros(n, np.int64),
        )


def lif_step(
    state: NeuronState,
    input_spikes: np.ndarray,
    weights: np.ndarray,
    params: SnnParams,
) -> tuple[NeuronState, np.ndarray]:
    """Advance the membrane dynamics one dt; returns (state', fired mask).

    Pure dynamics: conductance bumps by the incoming weights, membranes
    leak exponentially toward rest, threshold crossings fire, reset and
    bump the adaptive threshold, and fired neurons inhibit the rest.
    Plasticity is separate (see :func:`stdp_update`).
    """
    d_mem, d_syn, d_theta, _, _ = params.decays()
    v = state.v.copy()
    g = state.g.copy()
    theta = state.theta.copy()
    refrac = state.refrac.copy()

    g *= d_syn
    theta *= d_theta
    active = np.nonzero(np.asarray(input_spikes).ravel())[0]
    for i in active:
        g += weights[i]
    in_refrac = refrac > 0
    refrac[in_refrac] -= 1
    v = np.where(in_refrac, params.v_reset_mv,
                 params.v_rest_mv + (v - params.v_rest_mv) * d_mem + g * params.dt_ms)
    fired = (~in_refrac) & (v >= params.v_th_mv + theta)
    n_fired = int(np.count_nonzero(fired))
    if n_fired:
        v[fired] = params.v_reset_mv
        refrac[fired] = params.refrac_steps
        theta[fired] += params.theta_plus_mv
        if params.inhib_mv > 0.0:
            v[~fired] -= params.inhib_mv * n_fired
    return NeuronState(v=v, g=g, theta=theta, refrac=refrac), fired


def stdp_update(
    weights: np.ndarray,
    x_pre: np.ndarray,
    x_post: np.ndarray,
    pre_spikes: np.ndarray,
    post_spikes: np.ndarray,
    params: SnnParams,
) -> np.ndarray:
    """One timestep of trace-based STDP; returns updated weights.

    Presynaptic spikes depress by the postsynaptic trace (post-before-pre);
    postsynaptic spikes potentiate by the presynaptic trace less the target
    offset (pre-before-post; silent inputs lose weight).  Hard-clipped to
    [0, w_max].
    """
    w = np.array(weights, dtype=np.float32, copy=True)
    pre_idx = np.nonzero(np.asarray(pre_spikes).ravel())[0]
    post_idx = np.nonzero(np.asarray(post_spikes).ravel())[0]
    if pre_idx.size:
        w[pre_idx, :] = np.minimum(
            np.maximum(w[pre_idx, :] - params.eta_pre * x_post[None, :], 0.0),
            params.w_max,
        )
    if post_idx.size:
        w[:, post_idx] = np.minimum(
            np.maximum(
                w[:, post_idx] + params.eta_post * (x_pre[:, None] - params.x_tar), 0.0
            ),
            params.w_max,
        )
    return w


def run_sample(
    model: SnnModel,
    spikes: np.ndarray,
    learn: bool,
) -> np.ndarray:
    """Simulate one encoded sample; returns per-neuron spike counts.

    With ``learn`` the model's weights and thresholds are updated in place
    (STDP plus threshold adaptation); inference leaves the model untouched.
    """
    p = model.params
    d_mem, d_syn, d_theta, d_pre, d_post = p.decays()
    return accel.lif_run(
        spikes,
        model.weights,
        model.theta,
        p.v_th_mv,
        p.v_rest_mv,
        p.v_reset_mv,
        p.dt_ms,
        d_mem,
        d_syn,
        d_theta,
        p.theta_plus_mv,
        p.refrac_steps,
        p.inhib_mv,
        learn,
        p.eta_pre,
        p.eta_post,
        p.x_tar,
        d_pre,
        d_post,
        p.w_max,
    )


def normalize_weights(model: SnnModel) -> None:
    """Scale each neuron's input weights to the configured column sum."""
    target = model.params.norm_total
    colsum = model.weights.sum(axis=0, dtype=np.float64)
    scale = np.where(colsum > 0, target / np.maximum(colsum, 1e-12), 1.0)
    model.weights *= scale.astype(np.float32)[None, :]


def train(
    model: SnnModel,
    images: np.ndarray,
    epochs: int,
    seed: int,
    normalize: bool = True,
    after_sample=None,
) -> SnnModel:
    """Unsupervised STDP training over the image set, in place.

    ``after_sample(model)`` runs after each sample's weight write; the
    fault-injection layer uses it to keep weights stored on weak DRAM
    cells corrupted across updates.
    """
    p = model.params
    for epoch in range(epochs):
        for idx in range(len(images)):
            spikes = rate_encode(
                images[idx], p.duration_ms, p.dt_ms, p.max_rate_hz,
                derive_seed(seed, "train", epoch, idx),
            )
            run_sample(model, spikes, learn=True)
            if normalize:
                normalize_weights(model)
            if after_sample is not None:
                after_sample(model)
    return model


def _response_counts(model: SnnModel, images: np.ndarray, seed: int, tag: str) -> np.ndarray:
    counts = np.zeros((len(images), model.params.n_exc), np.int64)
    p = model.params
    for idx in range(len(images)):
        spikes = rate_encode(
            images[idx], p.duration_ms, p.dt_ms, p.max_rate_hz,
            derive_seed(seed, tag, idx),
        )
        counts[idx] = run_sample(model, spikes, learn=False)
    return counts


def assign_classes(model: SnnModel, images: np.ndarray, labels: np.ndarray, seed: int) -> None:
    """Label each neuron with the class it responds to most, in place."""
    counts = _response_counts(model, images, seed, "assign")
    n_classes = model.n_classes
    mean_resp = np.zeros((n_classes, model.params.n_exc), np.float64)
    for c in range(n_classes):
        mask = labels == c
        if mask.any():
            mean_resp[c] = counts[mask].mean(axis=0)
    model.assignments = mean_resp.argmax(axis=0).astype(np.int64)


def infer(
    model: SnnModel,
    images: np.ndarray,
    labels: np.ndarray,
    seed: int,
) -> tuple[float, np.ndarray]:
    """Accuracy over a labeled set; returns (accuracy, predictions).

    Prediction is the class whose assigned neuron group spikes the most
    (mean count per neuron in the group; ties go to the lower class index).
    """
    if len(images) == 0:
        raise ValueError("dataset must be non-empty")
    if (model.assignments < 0).all():
        raise ValueError("class assignments not populated; run assign_classes first")
    counts = _response_counts(model, images, seed, "infer")
    n_classes = model.n_classes
    group = np.zeros((n_classes, model.params.n_exc), np.float64)
    for c in range(n_classes):
        members = model.assignments == c
        if members.any():
            group[c, members] = 1.0 / members.sum()
    scores = counts @ group.T  # (n_samples, n_classes) mean spikes per group
    predictions = scores.argmax(axis=1)
    accuracy = float((predictions == labels).mean())
    return accuracy, predictions
