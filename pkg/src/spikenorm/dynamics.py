"""Exponential leaky integrate-and-fire dynamics and frame-by-frame spike propagation.

Membrane equation (V in mV, tau in ms, R in megaohm, I in nA)::

    tau dV/dt = -(V - E_rest) + delta_t * exp((V - V_thr) / delta_t) + R I

integrated with explicit Euler over ``substeps`` slices of each iteration.
A neuron that reaches ``V_thr`` spikes once, is reset and held at ``V_reset``
for the rest of the iteration.  Synaptic input reaching a layer is computed
from the previous iteration's presynaptic spikes.

All state arrays carry an optional leading batch axis so that independent
input sequences can be simulated side by side when weights are frozen.
"""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass, field, replace

import numpy as np

from .normalization import DeadGroupEvent, NormalizationPolicy, apply_policy
from .plasticity import PlasticityGenome, apply_stdp, decay_traces
from .stimulus import FIELD_SHAPE, StimulusSequence, pool_frames
from .topology import NetworkTopology, WeightState


class SimulationError(RuntimeError):
    """Membrane potential became non-finite."""


@dataclass(frozen=True)
class NeuronParams:
    e_rest: float
    v_reset: float
    v_threshold: float
    resistance: float
    tau: float
    delta_t: float = 2.0

    def __post_init__(self) -> None:
        if not self.v_reset < self.v_threshold:
            raise ValueError("v_reset must be below v_threshold")
        if self.tau <= 0 or self.resistance <= 0:
            raise ValueError("tau and resistance must be > 0")
        if self.delta_t < 0:
            raise ValueError("delta_t must be >= 0 (0 gives a plain LIF neuron)")


EXCITATORY_PARAMS = NeuronParams(e_rest=-63.70, v_reset=-68.7, v_threshold=-45.80, resistance=67.70, tau=16.70)
INHIBITORY_PARAMS = NeuronParams(e_rest=-59.3, v_reset=-64.3, v_threshold=-33.3, resistance=133.3, tau=36.5)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.02  # seconds per iteration (one frame)
    substeps: int = 10
    i_pixel: float = 0.4  # nA per black pixel in an input neuron's receptive field
    g_syn: float = 0.05  # nA per unit weight of a presynaptic spike
    excitatory: NeuronParams = EXCITATORY_PARAMS
    inhibitory: NeuronParams = INHIBITORY_PARAMS

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.i_pixel < 0 or self.g_syn < 0:
            raise ValueError("i_pixel and g_syn must be >= 0")

    @property
    def substep_ms(self) -> float:
        return self.dt * 1000.0 / self.substeps


@dataclass(frozen=True)
class NeuronArrays:
    """Per-neuron parameter vectors resolved from neuron types."""

    e_rest: np.ndarray
    v_reset: np.ndarray
    v_threshold: np.ndarray
    resistance: np.ndarray
    tau: np.ndarray
    delta_t: np.ndarray

    @classmethod
    def build(cls, topology: NetworkTopology, cfg: SimConfig) -> NeuronArrays:
        inh = topology.types == 1
        values = {}
        for name in ("e_rest", "v_reset", "v_threshold", "resistance", "tau", "delta_t"):
            values[name] = np.where(inh, getattr(cfg.inhibitory, name), getattr(cfg.excitatory, name)).astype(float)
        return cls(**values)


@functools.lru_cache(maxsize=64)
def _neuron_arrays(topology: NetworkTopology, cfg: SimConfig) -> NeuronArrays:
    return NeuronArrays.build(topology, cfg)


@dataclass
class NetworkState:
    v: np.ndarray
    spiked: np.ndarray
    input_current: np.ndarray
    iteration_index: int = 0


def reset_state(topology: NetworkTopology, cfg: SimConfig, batch: tuple[int, ...] = ()) -> NetworkState:
    params = _neuron_arrays(topology, cfg)
    shape = (*batch, topology.n_neurons)
    return NetworkState(
        v=np.broadcast_to(params.e_rest, shape).copy(),
        spiked=np.zeros(shape, dtype=bool),
        input_current=np.zeros(shape),
        iteration_index=0,
    )


def input_currents(
    state: NetworkState, weights: WeightState, topology: NetworkTopology, drive: np.ndarray, cfg: SimConfig
) -> np.ndarray:
    current = np.empty_like(state.v)
    current[..., topology.layer_slice(0)] = cfg.i_pixel * drive
    for layer, w in enumerate(weights.matrices):
        pre = state.spiked[..., topology.layer_slice(layer)]
        signed = pre * topology.sign(layer)
        current[..., topology.layer_slice(layer + 1)] = cfg.g_syn * (signed @ w)
    return current


def integrate(
    v: np.ndarray, current: np.ndarray, params: NeuronArrays, cfg: SimConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Advance membrane potentials over one iteration; return (v, spiked)."""
    h_over_tau = cfg.substep_ms / params.tau
    drive = params.e_rest + params.resistance * current
    use_exp = bool(np.any(params.delta_t > 0))
    safe_dt = np.where(params.delta_t > 0, params.delta_t, 1.0)
    spiked = np.zeros(v.shape, dtype=bool)
    v = v.copy()
    for _ in range(cfg.substeps):
        dv = drive - v
        if use_exp:
            dv += np.where(params.delta_t > 0, params.delta_t * np.exp((v - params.v_threshold) / safe_dt), 0.0)
        v_new = v + h_over_tau * dv
        crossed = (v_new >= params.v_threshold) & ~spiked
        spiked |= crossed
        v = np.where(spiked, params.v_reset, v_new)
    return v, spiked


def step_iteration(
    state: NetworkState,
    weights: WeightState,
    topology: NetworkTopology,
    frame: np.ndarray,
    cfg: SimConfig,
) -> NetworkState:
    """Present one frame: compute currents, integrate, and record spikes.

    ``frame`` is the input-layer drive in black-pixel counts, one value per
    input neuron (a flat 500-pixel frame for the default topology).  A raw
    20 x 25 bitmap is pooled onto the input layer first.
    """
    n_in = topology.layer_sizes[0]
    frame = np.asarray(frame)
    if frame.shape[-2:] == FIELD_SHAPE:
        frame = pool_frames(frame, n_in)
    frame = frame.astype(float, copy=False)
    if frame.shape[-1] != n_in:
        raise ValueError(f"frame has {frame.shape[-1]} pixels, input layer has {n_in} neurons")
    params = _neuron_arrays(topology, cfg)
    current = input_currents(state, weights, topology, frame, cfg)
    v, spiked = integrate(state.v, current, params, cfg)
    if not np.all(np.isfinite(v)):
        bad = np.argwhere(~np.isfinite(v))[:5].tolist()
        raise SimulationError(f"non-finite membrane potential at iteration {state.iteration_index}, indices {bad}")
    return NetworkState(v, spiked, current, state.iteration_index + 1)


# --- whole-sequence simulation ------------------------------------------------

@dataclass
class EvalResult:
    """Spike counts per input (rows) and neuron (columns)."""

    counts: np.ndarray
    layer_sizes: tuple[int, ...]
    frames_per_input: int
    events: list[DeadGroupEvent] = field(default_factory=list)

    def layer_counts(self, layer: int) -> np.ndarray:
        offsets = np.concatenate([[0], np.cumsum(self.layer_sizes)])
        return self.counts[:, offsets[layer]:offsets[layer + 1]]

    @property
    def output_vectors(self) -> np.ndarray:
        return self.layer_counts(len(self.layer_sizes) - 1)

    @property
    def layer_totals(self) -> np.ndarray:
        return np.array([self.layer_counts(i).sum() for i in range(len(self.layer_sizes))])

    def equals(self, other: EvalResult) -> bool:
        return (np.array_equal(self.counts, other.counts) and self.layer_sizes == other.layer_sizes
                and self.frames_per_input == other.frames_per_input)


@dataclass
class Network:
    """One network's structure, weights and learning hyperparameters."""

    topology: NetworkTopology
    weights: WeightState
    genome: PlasticityGenome
    cfg: SimConfig = field(default_factory=SimConfig)

    def copy(self) -> Network:
        return replace(self, weights=self.weights.copy())


class TraceRecorder:
    """Streams per-iteration spike flags and/or membrane potentials as CSV rows."""

    def __init__(self, topology: NetworkTopology, spike_file=None, membrane_file=None):
        self.layer_of = np.repeat(np.arange(topology.n_layers), topology.layer_sizes)
        self.index_in_layer = np.concatenate([np.arange(n) for n in topology.layer_sizes])
        self.iteration = 0
        self._spikes = csv.writer(spike_file) if spike_file is not None else None
        self._membrane = csv.writer(membrane_file) if membrane_file is not None else None
        if self._spikes:
            self._spikes.writerow(("iteration", "layer", "neuron", "spiked"))
        if self._membrane:
            self._membrane.writerow(("iteration", "layer", "neuron", "v"))

    def record(self, state: NetworkState) -> None:
        for i, (layer, idx) in enumerate(zip(self.layer_of, self.index_in_layer)):
            if self._spikes:
                self._spikes.writerow((self.iteration, int(layer), int(idx), int(state.spiked[i])))
            if self._membrane:
                self._membrane.writerow((self.iteration, int(layer), int(idx), repr(float(state.v[i]))))
        self.iteration += 1


def _as_list(stimulus) -> list[StimulusSequence]:
    return [stimulus] if isinstance(stimulus, StimulusSequence) else list(stimulus)


def run_sequence(
    network: Network,
    stimulus,
    plasticity_on: bool,
    policy: NormalizationPolicy | None = None,
    recorder: TraceRecorder | None = None,
    batched: bool | None = None,
) -> EvalResult:
    """Present each input sequence in order, resetting the network state before each.

    With plasticity on, STDP runs every iteration and ``policy`` is applied to
    the weights after each input.  With plasticity off the inputs are
    independent and are simulated as one batch unless ``batched=False`` or a
    recorder is attached.
    """
    sequences = _as_list(stimulus)
    if not sequences:
        raise ValueError("no input sequences given")
    topo, cfg = network.topology, network.cfg
    n_in = topo.layer_sizes[0]
    frames_per_input = sequences[0].length
    if batched is None:
        batched = not plasticity_on and recorder is None
    if batched and plasticity_on:
        raise ValueError("batched simulation needs frozen weights")

    if batched:
        lengths = {s.length for s in sequences}
        if len(lengths) != 1:
            raise ValueError("batched simulation needs sequences of equal length")
        drive = pool_frames(np.stack([s.frames for s in sequences]), n_in)  # (inputs, frames, n_in)
        state = reset_state(topo, cfg, batch=(len(sequences),))
        counts = np.zeros((len(sequences), topo.n_neurons), dtype=np.int64)
        for t in range(frames_per_input):
            state = step_iteration(state, network.weights, topo, drive[:, t], cfg)
            counts += state.spiked
        return EvalResult(counts, topo.layer_sizes, frames_per_input)

    counts = np.zeros((len(sequences), topo.n_neurons), dtype=np.int64)
    events: list[DeadGroupEvent] = []
    for k, seq in enumerate(sequences):
        drive = pool_frames(seq.frames, n_in)
        state = reset_state(topo, cfg)
        traces = np.zeros(topo.n_neurons)
        for t in range(seq.length):
            state = step_iteration(state, network.weights, topo, drive[t], cfg)
            counts[k] += state.spiked
            if recorder is not None:
                recorder.record(state)
            if plasticity_on:
                traces = decay_traces(traces, network.genome)
                traces = apply_stdp(network.weights, traces, state.spiked, topo, network.genome)
        if plasticity_on and policy is not None:
            events.extend(apply_policy(network.weights, topo, policy))
    return EvalResult(counts, topo.layer_sizes, frames_per_input, events)
