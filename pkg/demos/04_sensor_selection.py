"""
Greedy versus random sensor placement
=====================================

Compare the conditioning of the initial-field operator for greedily chosen
sensors against many random placements of the same size.
"""

import numpy as np

from heatgraph import (
    TimeGrid,
    build_case1_operator,
    build_laplacian,
    conditioning_report,
    eigendecompose,
    greedy_sensor_selection,
    random_connected_graph,
    random_selection,
)

rng = np.random.default_rng(3)
spectrum = eigendecompose(build_laplacian(random_connected_graph(40, rng, edge_prob=0.1)))
grid = TimeGrid(0.1, 8)
K = 7

for objective in ("max_min_singular", "min_condition"):
    sel = greedy_sensor_selection(spectrum, grid, K, objective)
    cond = conditioning_report(build_case1_operator(spectrum, grid, sel)).condition_number
    print(f"greedy ({objective}): cond {cond:.3g}, sensors {[v + 1 for v in sel.vertices]}")

conds = []
for _ in range(300):
    sel = random_selection(spectrum.n, K, rng)
    conds.append(conditioning_report(build_case1_operator(spectrum, grid, sel)).condition_number)
conds = np.array(conds)
print(f"random: median cond {np.median(conds):.3g}, best {conds.min():.3g}, "
      f"rank deficient {np.isinf(conds).sum()} of {len(conds)}")
