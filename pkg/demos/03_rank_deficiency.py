"""Residual rank deficiency along the regularization path.

Even at high regularization, the matrix-noise estimator drives trailing
singular values of the residuals to (numerical) zero, which is why
analyses assuming full-rank residuals are unrealistic and why the
spectrum-clipped smoothing exists.  Singular values below the smoothing
floor sigma_min * sqrt(q) are marked with '*'."""

import math

import numpy as np

from pivlasso.experiments import PRESETS, run_residual_rank

cfg = PRESETS["residual_rank_fig2"]
print(f"config: n={cfg.sim.n}, q={cfg.sim.q}, p={cfg.sim.p}, snr={cfg.sim.snr}")
table = run_residual_rank(cfg)

rows = [dict(zip(table.columns, r)) for r in table.rows]
spectra = {}
for r in rows:
    spectra.setdefault((r["matrix"], r["lambda_ratio"]), []).append(r)

y_vals = sorted(spectra[("Y", 1.0)], key=lambda r: r["k"])
print("\nsingular values of Y:")
print("  " + " ".join(f"{r['singular_value']:9.2e}" for r in y_vals))

print("\nsingular values of the residuals (rows: lambda / lambda_max):")
for (matrix, ratio) in sorted(spectra, key=lambda k: -k[1]):
    if matrix != "residual":
        continue
    vals = sorted(spectra[(matrix, ratio)], key=lambda r: r["k"])
    cells = " ".join(
        f"{r['singular_value']:9.2e}" + ("*" if r["at_floor"] else " ") for r in vals)
    print(f"  {ratio:5.3f}: {cells}")

print("\ntrailing/leading ratios:")
for (matrix, ratio) in sorted(spectra, key=lambda k: -k[1]):
    if matrix != "residual":
        continue
    sv = [r["singular_value"] for r in sorted(spectra[(matrix, ratio)], key=lambda r: r["k"])]
    print(f"  lambda/lambda_max = {ratio:5.3f}: {sv[-1] / sv[0]:.2e}")
