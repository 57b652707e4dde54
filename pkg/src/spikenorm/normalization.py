"""Homeostatic weight-normalisation set-ups applied after each training input."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .topology import NetworkTopology, WeightState

logger = logging.getLogger(__name__)

POLICY_NAMES = ("control", "control_capped", "norm", "norm_capped", "norm_ie", "norm_capped_ie")

# Each normalised set-up is compared against the control sharing its capping.
CONTROL_OF = {
    "norm": "control",
    "norm_ie": "control",
    "norm_capped": "control_capped",
    "norm_capped_ie": "control_capped",
}


@dataclass(frozen=True)
class NormalizationPolicy:
    name: str = "control"
    cap: float = 4.0
    per_neuron_target: float = 100.0
    exc_share: float = 0.8
    inh_share: float = 0.2

    def __post_init__(self) -> None:
        if self.name not in POLICY_NAMES:
            raise ValueError(f"unknown policy {self.name!r}; choose from {', '.join(POLICY_NAMES)}")
        if self.cap <= 0:
            raise ValueError("cap must be > 0")
        if self.per_neuron_target <= 0:
            raise ValueError("per_neuron_target must be > 0")
        if min(self.exc_share, self.inh_share) < 0 or abs(self.exc_share + self.inh_share - 1.0) > 1e-12:
            raise ValueError("exc_share and inh_share must be nonnegative and sum to 1")

    @property
    def capped(self) -> bool:
        return "capped" in self.name

    @property
    def rescales(self) -> bool:
        return self.name.startswith("norm")

    @property
    def by_type(self) -> bool:
        return self.name.endswith("_ie")


@dataclass(frozen=True)
class DeadGroupEvent:
    """Emitted when a group to be rescaled has zero total weight."""

    group: str


def target_sum(topology: NetworkTopology, policy: NormalizationPolicy) -> float:
    """Whole-network weight sum the rescaling set-ups aim for: all neurons times the per-neuron target."""
    return topology.n_neurons * policy.per_neuron_target


def _rescale(matrices, rows, target: float, group: str, events: list) -> None:
    # rows[k] selects the presynaptic rows of matrices[k] belonging to the group
    total = sum(float(m[r].sum()) for m, r in zip(matrices, rows))
    if total == 0.0:
        logger.warning("dead group %r: zero weight sum, normalisation skipped", group)
        events.append(DeadGroupEvent(group))
        return
    factor = target / total
    for m, r in zip(matrices, rows):
        m[r] *= factor


def apply_policy(
    weights: WeightState, topology: NetworkTopology, policy: NormalizationPolicy
) -> list[DeadGroupEvent]:
    """Apply ``policy`` to ``weights`` in place.

    Capped set-ups rescale first and cap second.  Type-split set-ups group
    synapses by the type of their presynaptic neuron.  Returns the dead-group
    events raised along the way (empty in the normal case).
    """
    events: list[DeadGroupEvent] = []
    mats = weights.matrices
    if policy.rescales:
        target = target_sum(topology, policy)
        if policy.by_type:
            inh_rows = [topology.inhibitory_mask(layer) for layer in range(len(mats))]
            _rescale(mats, [~r for r in inh_rows], policy.exc_share * target, "excitatory", events)
            _rescale(mats, inh_rows, policy.inh_share * target, "inhibitory", events)
        else:
            _rescale(mats, [slice(None)] * len(mats), target, "all", events)
    if policy.capped:
        for m in mats:
            np.minimum(m, policy.cap, out=m)
    return events
