"""
A small degree sweep
====================

The full benchmark runs 50 trials per point; ten keep this demo short.
Pass an output directory to get report.json and trials.csv per point.
"""
import sys

from spoar.bench import benchmark_config, sweep_deg

cfg = benchmark_config(trials=10)
out = sys.argv[1] if len(sys.argv) > 1 else None
for deg, rep in zip((2, 8), sweep_deg(cfg, (2, 8), out)):
    meds = "  ".join(f"{name}={rep.median(name):.4f}" for name in rep.losses)
    print(f"deg={deg}  median normalized regret  {meds}")
