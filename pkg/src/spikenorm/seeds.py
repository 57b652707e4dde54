"""Master-seed fan-out.

Every random draw in an experiment comes from a generator keyed by
``(master_seed, repeat, purpose, *indices)`` through
:class:`numpy.random.SeedSequence` spawn keys, so any single individual's
data, initial state or mutation can be re-created without replaying the
rest of the run.

Key layout (after the master seed):

=================  ==========================================
purpose            indices
=================  ==========================================
TOPOLOGY           (repeat,)
GENOME, WEIGHTS    (repeat, individual)
TRAIN_DATA         (repeat, generation, individual)
TEST_DATA          (repeat, generation)
MUTATION           (repeat, generation, individual)
KMEANS             (repeat, generation, individual)
=================  ==========================================
"""

from __future__ import annotations

import enum

import numpy as np


class Purpose(enum.IntEnum):
    TOPOLOGY = 0
    GENOME = 1
    WEIGHTS = 2
    TRAIN_DATA = 3
    TEST_DATA = 4
    MUTATION = 5
    KMEANS = 6


def derive_seed(master: int, repeat: int, purpose: Purpose, *indices: int) -> int:
    """A 63-bit integer seed for one (repeat, purpose, indices) slot."""
    seq = np.random.SeedSequence(int(master), spawn_key=(int(repeat), int(purpose), *map(int, indices)))
    hi, lo = seq.generate_state(2, dtype=np.uint32)
    return ((int(hi) << 32) | int(lo)) & ((1 << 63) - 1)


def derive_rng(master: int, repeat: int, purpose: Purpose, *indices: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, repeat, purpose, *indices))
