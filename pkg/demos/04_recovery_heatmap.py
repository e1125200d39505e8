"""Support recovery as a function of (lambda, sigma_min).

Below the noise level, the smoothing parameter has no effect on which
lambda recovers the true support: the recovery bands for sigma_min equal to
a tenth of sigma* and sigma*/sqrt(2) coincide.  Far above the noise level
the constraint saturates and the estimator degrades into a plain multitask
Lasso with penalty lambda * sigma_min, shifting the band accordingly."""

from dataclasses import replace

import numpy as np

from pivlasso.experiments import PRESETS, heatmap_cell_means, run_recovery_heatmap

cfg = replace(PRESETS["recovery_heatmap_desk"], replicates=10)
print(f"config: n={cfg.sim.n}, p={cfg.sim.p}, q={cfg.sim.q}, s={cfg.sim.s}, "
      f"rho={cfg.sim.rho_x}, snr={cfg.sim.snr}, replicates={cfg.replicates}")

table = run_recovery_heatmap(cfg)
means = heatmap_cell_means(table)
ratios = list(cfg.lambda_grid.ratios())

print("\nmean hard recovery (rows: sigma_min / sigma*, columns: lambda / lambda_max)")
header = "       " + " ".join(f"{r:5.3f}" for r in ratios)
print(header)
for smin_ratio in cfg.sigma_min_grid:
    cells = " ".join(f"{means[(smin_ratio, r)]:5.2f}" for r in ratios)
    print(f"{smin_ratio:6.3f} {cells}")

print("\nlambda cells with recovery >= 0.9:")
for smin_ratio in cfg.sigma_min_grid:
    good = [f"{r:.3f}" for r in ratios if means[(smin_ratio, r)] >= 0.9]
    print(f"  sigma_min/sigma* = {smin_ratio:6.3f}: {good}")
