"""Pareto filtering and the coverage metric on a small hand-made design space."""

import numpy as np

from dsekit.pareto import DesignPoint, ObjectiveVector, adrs, pareto_filter

rng = np.random.default_rng(7)

# 40 candidate configurations with made-up area/latency costs.
# Lower is better on both axes.
points = []
for i in range(40):
    area = float(rng.uniform(1.0, 10.0))
    latency = float(rng.uniform(1.0, 10.0))
    points.append(DesignPoint((i,), ObjectiveVector(area=area, latency=latency)))

front = pareto_filter(points)
print(f"{len(points)} candidates -> {len(front.points)} on the front")
for p in front.points:
    print(f"  knobs={p.knobs}  area={p.objectives.area:.3f}  latency={p.objectives.latency:.3f}")

# A search that only saw a quarter of the candidates produces a worse front.
sample = [points[i] for i in rng.choice(len(points), size=10, replace=False)]
partial = pareto_filter(sample)

# adrs measures how far the partial front sits from the reference one:
# 0 means every reference point is matched or dominated.
print()
print("adrs(front, front)   =", adrs(front, front))
print("adrs(front, partial) =", round(adrs(front, partial), 6))
print("partial front size   =", len(partial.points))
