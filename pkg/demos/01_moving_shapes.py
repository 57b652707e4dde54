"""
Moving-shape stimuli
====================

Four 40-pixel outlines drift one pixel per frame across a 20 x 25 field that
wraps around at the edges.  A training cycle is 20 inputs of 10 frames with
every direction used equally often.
"""

# %%
import collections

import numpy as np

from spikenorm.stimulus import SHAPES, generate_sequence, make_dataset, pool_frames, shape_mask

for kind in SHAPES:
    print(kind, len(shape_mask(kind)), "pixels")

# %%
# One sequence, printed as text.  The square starts at the top-left corner
# and moves right.
seq = generate_sequence("square", "right", origin=(0, 0), length=3)
for frame in seq.frames:
    print("\n".join("".join("#" if p else "." for p in row) for row in frame[:12]))
    print()

# %%
# A seeded training cycle: directions are balanced, shapes and origins random.
cycle = make_dataset(inputs_per_cycle=20, frames_per_input=10, rng_seed=7)
print(collections.Counter(s.direction.value for s in cycle))
print("black pixels per frame:", np.unique([f.sum() for s in cycle for f in s.frames]))

# %%
# The desk topology has 100 input neurons, so each one sums a 1 x 5 block.
pooled = pool_frames(cycle[0].frames, 100)
print(pooled.shape, pooled.sum(axis=1))
