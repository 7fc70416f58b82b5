"""
Noise sensitivity over sensors and snapshots
============================================

Run the shipped noisy plate scenario over a grid of sensor counts K and
snapshot counts T and write the report as CSV. Takes about half a minute.
"""

import sys

from heatgraph.experiments import default_scenario_path, load_scenario, report_to_csv, rmse_sweep

scenario = load_scenario(default_scenario_path().with_name("plate_noisy.json"))
print(f"{scenario.trials} trials, noise variance {scenario.noise_variance}", file=sys.stderr)

report = rmse_sweep(scenario, k_values=[24, 32, 40, 48], t_values=[8, 10, 16])
sys.stdout.write(report_to_csv(report))

# more sensors help a lot; the condition number tells most of the story
for t in report.t_values:
    row = [report.cell(k, t) for k in report.k_values]
    print(f"T={t:3d}: " + "  ".join(f"K={c.k}: {c.rmse_mean:.3g}" for c in row), file=sys.stderr)
