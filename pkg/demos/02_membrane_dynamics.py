"""
Exponential integrate-and-fire dynamics
=======================================

Each 20 ms iteration is integrated in ten explicit Euler substeps.  We follow
one excitatory neuron under constant pixel drive, then check the passive
decay against the exponential closed form.
"""

# %%
import dataclasses

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from spikenorm.dynamics import EXCITATORY_PARAMS, NeuronArrays, SimConfig, integrate
from spikenorm.topology import build_topology

cfg = SimConfig()
arrays = NeuronArrays.build(build_topology([1], 1.0, 0), cfg)

# %%
# Drive of 0, 1, 2 black pixels in turn.  One black pixel (0.4 nA) is enough
# to fire within a frame.
v = np.array([EXCITATORY_PARAMS.e_rest])
for pixels in [0, 1, 1, 0, 2, 0]:
    v, spiked = integrate(v, np.array([cfg.i_pixel * pixels]), arrays, cfg)
    print(f"{pixels} px -> v = {v[0]:7.2f} mV, spiked = {bool(spiked[0])}")

# %%
# With the exponential term switched off and no input, V relaxes from reset
# to rest.  Euler and the closed form agree within a fraction of a millivolt.
linear = dataclasses.replace(EXCITATORY_PARAMS, delta_t=0.0)
lin_cfg = SimConfig(excitatory=linear)
lin_arrays = NeuronArrays.build(build_topology([1], 1.0, 0), lin_cfg)
v = np.array([linear.v_reset])
sim = []
for _ in range(10):
    v, _ = integrate(v, np.zeros(1), lin_arrays, lin_cfg)
    sim.append(v[0])
t = 20.0 * np.arange(1, 11)
exact = linear.e_rest + (linear.v_reset - linear.e_rest) * np.exp(-t / linear.tau)
print("max |error| (mV):", np.max(np.abs(np.array(sim) - exact)))

fig, ax = plt.subplots()
ax.plot(t, exact, label="closed form")
ax.plot(t, sim, "o", label="Euler, 10 substeps")
ax.set_xlabel("time (ms)")
ax.set_ylabel("V (mV)")
ax.legend()
fig.savefig("passive_decay.svg")
