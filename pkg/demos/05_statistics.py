"""
Comparing policies
==================

Runs the desk experiment for a normalised policy and its control, then
summarises spiking and tests the differences with Kruskal-Wallis.  Files go
to ``demo_out/``; the same output comes from ``spikenorm analyze``.
"""

# %%
from pathlib import Path

from spikenorm.analysis import compare_conditions, kruskal_wallis, write_analysis
from spikenorm.config import resolve_config
from spikenorm.evolution import run_experiment

print(kruskal_wallis([[1, 2, 3], [4, 5, 6]]))

# %%
cfg = resolve_config({"scale": "desk", "generations": 4})
out = Path("demo_out")
rows = []
for policy in ("control", "norm_ie"):
    rows += run_experiment(cfg, policy, out).rows

# %%
for c in compare_conditions(rows):
    print(f"{c.comparison:28s} H = {c.h:6.3f}  p = {c.p:.3f}")

written = write_analysis(rows, out, plots=True)
print(sorted(p.name for p in written.values()))
