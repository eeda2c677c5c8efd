"""Budgeted multi-objective design-space exploration with a learned explorer selector.

Layers, bottom up: pareto (fronts and the ADRS coverage metric), benchmarks
(five seeded synthetic landscape families), surrogate (their deterministic
cost model), explorers (ten budgeted search algorithms behind one call),
dataset (suite generation and persistence), selector (supervised warm start
plus PPO), cli (the synth/run/train/infer/report pipeline).
"""

__version__ = "0.1.0"
