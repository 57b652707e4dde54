"""Pair-based additive STDP with exponentially decaying per-neuron traces.

Each neuron carries a trace ``x`` that decays by ``exp(-discharge)`` once
per iteration and jumps by 1 when the neuron spikes.  For a synapse j -> i:

* post i spikes:  ``w += A_plus * x_j``  (``ltp`` for excitatory j, ``inh_ltp`` for inhibitory j)
* pre j spikes:   ``w -= ltd * x_i``
* ``w`` is floored at 0.

Both updates read the traces *before* this iteration's increments, so a
pre spike at t followed by a post spike at t+1 potentiates by
``A_plus * exp(-discharge)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .topology import NetworkTopology, WeightState

# Inclusive evolution bounds per learning parameter.
GENOME_BOUNDS: dict[str, tuple[float, float]] = {
    "ltp": (0.001, 0.1),
    "inh_ltp": (0.001, 0.1),
    "ltd": (0.001, 0.1),
    "discharge": (0.06, 5.0),
}

GENOME_FIELDS = tuple(GENOME_BOUNDS)


@dataclass(frozen=True)
class PlasticityGenome:
    ltp: float
    inh_ltp: float
    ltd: float
    discharge: float

    def check(self, bounds: dict[str, tuple[float, float]] = GENOME_BOUNDS) -> None:
        for name, (lo, hi) in bounds.items():
            value = getattr(self, name)
            if not lo <= value <= hi:
                raise ValueError(f"{name}={value} outside [{lo}, {hi}]")

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def random(cls, rng: np.random.Generator, bounds=GENOME_BOUNDS) -> PlasticityGenome:
        return cls(**{name: float(rng.uniform(*bounds[name])) for name in GENOME_FIELDS})


def decay_traces(traces: np.ndarray, genome: PlasticityGenome) -> np.ndarray:
    return traces * np.exp(-genome.discharge)


def apply_stdp(
    weights: WeightState,
    traces: np.ndarray,
    spikes: np.ndarray,
    topology: NetworkTopology,
    genome: PlasticityGenome,
) -> np.ndarray:
    """Update ``weights`` in place for one iteration; return the new traces.

    ``traces`` must already be decayed for this iteration.  ``spikes`` is the
    flat boolean spike vector of all neurons for this iteration.
    """
    for layer, w in enumerate(weights.matrices):
        pre = topology.layer_slice(layer)
        post = topology.layer_slice(layer + 1)
        s_pre = spikes[pre]
        s_post = spikes[post]
        if s_post.any():
            a_plus = np.where(topology.inhibitory_mask(layer), genome.inh_ltp, genome.ltp)
            w[:, s_post] += (a_plus * traces[pre])[:, None]
        if s_pre.any():
            w[s_pre, :] -= genome.ltd * traces[post]
            np.maximum(w, 0.0, out=w)
    return traces + spikes
