"""
Evolving learning rules
=======================

A population of networks shares a topology but each carries its own four
STDP parameters.  Fitness is how well k-means on output spike counts
separates the four movement directions.  This runs a shortened desk-scale
experiment for one policy and prints the per-generation best purity.
"""

# %%
from spikenorm.config import resolve_config
from spikenorm.evolution import run_experiment

cfg = resolve_config({"scale": "desk", "repeats": 1, "generations": 4})
print(cfg.layer_sizes, "population", cfg.population, "g_syn", cfg.g_syn)

# %%
log = run_experiment(cfg, "norm_capped")
for g in range(cfg.generations):
    rows = [r for r in log.rows if r.generation == g]
    best = max(rows, key=lambda r: r.purity)
    print(f"gen {g}: best purity {best.purity:.3f} (ltp={best.ltp:.3f}, discharge={best.discharge:.2f}), "
          f"output median {best.spikes_output_median}")

# %%
# Child kinds make the lineage visible: clones keep their parent's score.
print(sorted({(r.child_kind, r.generation) for r in log.rows if r.generation == 1}))
