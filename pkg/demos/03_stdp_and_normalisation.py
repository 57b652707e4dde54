"""
STDP and weight normalisation
=============================

Pair-based STDP alone lets the summed weight wander.  The normalisation
policies pull it back to a fixed total after every input, optionally per
presynaptic type and with a cap on single weights.
"""

# %%
import numpy as np

from spikenorm.dynamics import Network, SimConfig, run_sequence
from spikenorm.normalization import NormalizationPolicy, apply_policy, target_sum
from spikenorm.plasticity import PlasticityGenome, apply_stdp, decay_traces
from spikenorm.stimulus import make_dataset
from spikenorm.topology import WeightState, build_topology, init_weights

# %%
# A presynaptic spike followed one frame later by a postsynaptic spike
# potentiates the synapse by ltp * exp(-discharge).
pair = build_topology([1, 1], 1.0, 0)
genome = PlasticityGenome(ltp=0.1, inh_ltp=0.05, ltd=0.1, discharge=0.06)
w = WeightState([np.ones((1, 1))])
traces = np.zeros(2)
for spikes in ([True, False], [False, True]):
    traces = apply_stdp(w, decay_traces(traces, genome), np.array(spikes), pair, genome)
print("weight after pre->post:", w.matrices[0][0, 0])

# %%
# Train one desk-sized network for a cycle under each policy and compare sums.
topo = build_topology([100, 20, 4], 0.8, 3)
cycle = make_dataset(20, 10, 3)
genome = PlasticityGenome(0.08, 0.02, 0.01, 0.3)
for name in ("control", "control_capped", "norm", "norm_ie", "norm_capped"):
    policy = NormalizationPolicy(name)
    net = Network(topo, init_weights(topo, 3), genome, SimConfig(g_syn=0.007))
    run_sequence(net, cycle, plasticity_on=True, policy=policy)
    top = max(m.max() for m in net.weights.matrices)
    print(f"{name:15s} sum = {net.weights.total():9.2f}  max = {top:6.3f}")
print("target sum:", target_sum(topo, NormalizationPolicy()))

# %%
# Type-split normalisation gives excitatory rows 80 % and inhibitory rows 20 %.
w = init_weights(topo, 4)
apply_policy(w, topo, NormalizationPolicy("norm_ie"))
inh = sum(m[topo.inhibitory_mask(i)].sum() for i, m in enumerate(w.matrices))
print("inhibitory share:", inh / w.total())
