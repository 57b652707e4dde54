"""Layered feed-forward network structure and synaptic weight storage."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class NeuronType(enum.IntEnum):
    EXCITATORY = 0
    INHIBITORY = 1


def excitatory_count(layer_size: int, fraction: float) -> int:
    """Number of excitatory neurons in a layer: nearest integer, ties rounded up."""
    return int(math.floor(layer_size * fraction + 0.5))


@dataclass(frozen=True, eq=False)
class NetworkTopology:
    """Fully connected feed-forward layers with a fixed neuron type per neuron.

    ``types`` is a flat read-only ``uint8`` array over all neurons, layer by
    layer (0 = excitatory, 1 = inhibitory).  Instances hash by identity; use
    :meth:`same_as` for structural comparison.
    """

    layer_sizes: tuple[int, ...]
    types: np.ndarray
    seed: int | None = None
    offsets: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        if not sizes:
            raise ValueError("layer_sizes must not be empty")
        if any(s < 1 for s in sizes):
            raise ValueError(f"all layer sizes must be >= 1, got {sizes}")
        types = np.asarray(self.types, dtype=np.uint8)
        if types.shape != (sum(sizes),):
            raise ValueError(f"types has shape {types.shape}, expected ({sum(sizes)},)")
        if np.any(types > 1):
            raise ValueError("neuron types must be 0 (excitatory) or 1 (inhibitory)")
        types.setflags(write=False)
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "types", types)
        object.__setattr__(self, "offsets", tuple(np.concatenate([[0], np.cumsum(sizes)]).tolist()))

    def same_as(self, other: NetworkTopology) -> bool:
        return self.layer_sizes == other.layer_sizes and np.array_equal(self.types, other.types)

    @property
    def n_neurons(self) -> int:
        return self.offsets[-1]

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes)

    @property
    def n_synapses(self) -> int:
        return sum(a * b for a, b in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    @property
    def weight_shapes(self) -> list[tuple[int, int]]:
        return list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    def layer_slice(self, layer: int) -> slice:
        return slice(self.offsets[layer], self.offsets[layer + 1])

    def layer_types(self, layer: int) -> np.ndarray:
        return self.types[self.layer_slice(layer)]

    def inhibitory_mask(self, layer: int) -> np.ndarray:
        return self.layer_types(layer) == NeuronType.INHIBITORY

    def sign(self, layer: int) -> np.ndarray:
        """+1 for excitatory, -1 for inhibitory neurons of ``layer``."""
        return np.where(self.inhibitory_mask(layer), -1.0, 1.0)


def build_topology(
    layer_sizes, excitatory_fraction: float = 0.8, rng_seed: int | None = 0
) -> NetworkTopology:
    """Assign neuron types layer by layer.

    Each layer gets ``round(fraction * size)`` excitatory neurons; the
    inhibitory ones are placed at positions drawn by a seeded shuffle.
    """
    sizes = [int(s) for s in layer_sizes]
    if not sizes:
        raise ValueError("layer_sizes must not be empty")
    if any(s < 1 for s in sizes):
        raise ValueError(f"all layer sizes must be >= 1, got {sizes}")
    if not 0.0 <= excitatory_fraction <= 1.0:
        raise ValueError(f"excitatory_fraction must lie in [0, 1], got {excitatory_fraction}")

    rng = np.random.default_rng(rng_seed)
    types = []
    for size in sizes:
        n_exc = excitatory_count(size, excitatory_fraction)
        layer = np.ones(size, dtype=np.uint8)
        layer[:n_exc] = NeuronType.EXCITATORY
        types.append(rng.permutation(layer))
    return NetworkTopology(tuple(sizes), np.concatenate(types), seed=rng_seed)


@dataclass
class WeightState:
    """Nonnegative synaptic magnitudes, one ``(n_pre, n_post)`` matrix per layer pair."""

    matrices: list[np.ndarray]

    def __post_init__(self) -> None:
        self.matrices = [np.asarray(m, dtype=np.float64) for m in self.matrices]

    def copy(self) -> WeightState:
        return WeightState([m.copy() for m in self.matrices])

    def total(self) -> float:
        return float(sum(m.sum() for m in self.matrices))

    @property
    def n_synapses(self) -> int:
        return sum(m.size for m in self.matrices)

    def check(self, topology: NetworkTopology) -> None:
        shapes = [m.shape for m in self.matrices]
        if shapes != topology.weight_shapes:
            raise ValueError(f"weight shapes {shapes} do not match topology {topology.weight_shapes}")
        for m in self.matrices:
            if not np.all(np.isfinite(m)) or np.any(m < 0):
                raise ValueError("weights must be finite and nonnegative")

    def equals(self, other: WeightState) -> bool:
        return len(self.matrices) == len(other.matrices) and all(
            a.shape == b.shape and np.array_equal(a, b) for a, b in zip(self.matrices, other.matrices)
        )


def init_weights(
    topology: NetworkTopology,
    rng_seed: int | None = 0,
    w_init_lo: float = 0.0,
    w_init_hi: float = 1.0,
) -> WeightState:
    if not 0.0 <= w_init_lo <= w_init_hi:
        raise ValueError(f"need 0 <= w_init_lo <= w_init_hi, got [{w_init_lo}, {w_init_hi}]")
    rng = np.random.default_rng(rng_seed)
    if w_init_lo == w_init_hi:
        return WeightState([np.full(shape, float(w_init_lo)) for shape in topology.weight_shapes])
    return WeightState([rng.uniform(w_init_lo, w_init_hi, size=shape) for shape in topology.weight_shapes])


# --- JSON snapshots -------------------------------------------------------

def snapshot_dict(topology: NetworkTopology, weights: WeightState) -> dict:
    return {
        "layer_sizes": list(topology.layer_sizes),
        "types": topology.types.astype(int).tolist(),
        "weights": [m.ravel().tolist() for m in weights.matrices],
        "seed": topology.seed,
    }


def from_snapshot_dict(data: dict) -> tuple[NetworkTopology, WeightState]:
    topology = NetworkTopology(tuple(data["layer_sizes"]), np.asarray(data["types"]), seed=data.get("seed"))
    flat = data["weights"]
    if len(flat) != len(topology.weight_shapes):
        raise ValueError("snapshot has the wrong number of weight matrices")
    matrices = []
    for values, shape in zip(flat, topology.weight_shapes):
        arr = np.asarray(values, dtype=np.float64)
        if arr.size != shape[0] * shape[1]:
            raise ValueError(f"weight block of size {arr.size} does not fit shape {shape}")
        matrices.append(arr.reshape(shape))
    weights = WeightState(matrices)
    weights.check(topology)
    return topology, weights


def save_snapshot(path, topology: NetworkTopology, weights: WeightState) -> None:
    Path(path).write_text(json.dumps(snapshot_dict(topology, weights)))


def load_snapshot(path) -> tuple[NetworkTopology, WeightState]:
    return from_snapshot_dict(json.loads(Path(path).read_text()))
