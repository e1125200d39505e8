"""Scripted experiment pipelines emitting tidy, reproducible tables.

Four pipelines mirror the synthetic studies the estimators were designed
for: pivotality of the cross-validated regularization level, rank
deficiency of multivariate residuals, support-recovery heatmaps over
(lambda, sigma_min), and Monte Carlo verification of the high-probability
sup-norm/cone bounds.  Every table row is a pure function of the config
(explicit seed, counter-based streams), so re-running a config reproduces
the CSV byte for byte.
"""

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .core import Dataset, Truth
from .diagnostics import (
    cone_ratio,
    estimate_support,
    event_holds,
    event_probability_bound,
    eta,
    incoherence_alpha,
    recovery_metrics,
    supnorm_bound_check,
    supnorm_constant,
)
from .estimators import (
    EstimatorSpec,
    default_sigma_max,
    fit_mt_lasso,
    fit_path,
    fit_sgcl_annealed,
    lambda_max,
    proposed_lambda,
    tiny_sigma_min,
)
from .simulate import (
    STREAM_NOISE,
    SimulationSpec,
    make_coefficients,
    make_design,
    rng_stream,
)

EXPERIMENTS = ("pivotality", "residual_rank", "recovery_heatmap", "bound_verification")


@dataclass(frozen=True)
class GridSpec:
    """Geometric grid of ``count`` points from ``lambda_max`` down to
    ``min_ratio * lambda_max``."""

    count: int
    min_ratio: float

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"grid count must be >= 1, got {self.count}")
        if not 0 < self.min_ratio <= 1:
            raise ValueError(f"min_ratio must lie in (0, 1], got {self.min_ratio}")

    def ratios(self):
        if self.count == 1:
            return np.array([1.0])
        return np.geomspace(1.0, self.min_ratio, self.count)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment run."""

    experiment: str
    sim: SimulationSpec
    lambda_grid: GridSpec
    replicates: int = 10
    folds: int = 3
    estimators: tuple = ()          # estimator kinds; empty = experiment default
    sigma_min_grid: tuple = ()      # recovery_heatmap: sigma_min / sigma* ratios
    noise_points: int = 10          # pivotality: number of sigma* grid points
    snr_decades: float = 1.0        # pivotality: sigma* spans this many decades
    A: float = 2.0                  # bound_verification: constant of the proposed lambda
    sigma_min_ratio: float = 0.5    # bound_verification/pivotality scl smoothing level
    tol: float = 1e-6
    max_epochs: int = 3000
    output_path: str = "."

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.replicates < 1:
            raise ValueError(f"replicates must be >= 1, got {self.replicates}")
        if self.folds < 2:
            raise ValueError(f"folds must be >= 2, got {self.folds}")
        if self.noise_points < 1:
            raise ValueError(f"noise_points must be >= 1, got {self.noise_points}")
        if any(r <= 0 for r in self.sigma_min_grid):
            raise ValueError("sigma_min_grid ratios must be positive")

    def to_json(self):
        obj = asdict(self)
        obj["estimators"] = list(self.estimators)
        obj["sigma_min_grid"] = list(self.sigma_min_grid)
        return obj

    @classmethod
    def from_json(cls, obj):
        obj = dict(obj)
        obj["sim"] = SimulationSpec.from_json(obj["sim"])
        obj["lambda_grid"] = GridSpec(**obj["lambda_grid"])
        obj["estimators"] = tuple(obj.get("estimators", ()))
        obj["sigma_min_grid"] = tuple(obj.get("sigma_min_grid", ()))
        return cls(**obj)


@dataclass
class ExperimentTable:
    """Column names plus typed rows, one per (grid point, replicate)."""

    columns: list
    rows: list = field(default_factory=list)

    def append(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} cells, expected {len(self.columns)}")
        self.rows.append(tuple(values))

    def column(self, name):
        k = self.columns.index(name)
        return [row[k] for row in self.rows]


def _format_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_table_csv(table, path):
    """UTF-8 CSV with a header row, '.' decimal, LF endings, repr floats."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(table.columns) + "\n")
        for row in table.rows:
            fh.write(",".join(_format_cell(v) for v in row) + "\n")
    return path


def write_config_json(cfg, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(cfg.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# ---------------------------------------------------------------------------
# cross-validation

def cross_validate_lambda(data, estimator, lambda_grid, folds, seed=None):
    """Pick the grid lambda minimizing mean held-out prediction error.

    Rows are split into *folds* contiguous blocks (deterministic, so the
    seed argument is accepted for interface stability but unused); fits are
    warm-started along the descending grid; ties break toward larger lambda.
    """
    lams = np.asarray(lambda_grid, dtype=np.float64)
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    n = data.n
    if n < folds:
        raise ValueError(f"cannot split {n} rows into {folds} folds")
    bounds = [(i * n) // folds for i in range(folds + 1)]
    if any(bounds[k + 1] - bounds[k] < 1 for k in range(folds)):
        raise ValueError(f"degenerate fold in a {folds}-fold split of {n} rows")
    errors = np.zeros(lams.size)
    for k in range(folds):
        test = np.arange(bounds[k], bounds[k + 1])
        train = np.r_[0:bounds[k], bounds[k + 1]:n]
        d_train = Dataset(X=data.X[train], Y=data.Y[train])
        results = fit_path(d_train, estimator, lams)
        X_test, Y_test = data.X[test], data.Y[test]
        for i, res in enumerate(results):
            E = Y_test - X_test @ res.B_hat
            errors[i] += float(np.sum(E * E))
    best_lam, best_err = None, math.inf
    for i in range(lams.size):  # descending grid: first strict win = largest lambda
        if errors[i] < best_err:
            best_lam, best_err = float(lams[i]), errors[i]
    return best_lam


# ---------------------------------------------------------------------------
# pivotality of the cross-validated lambda

def _pivotality_replicate(cfg, rep):
    sim = cfg.sim
    X = make_design(sim)
    B = make_coefficients(sim)
    signal = X @ B
    signal_norm = float(np.linalg.norm(signal))
    G = rng_stream(sim.seed, STREAM_NOISE, rep).standard_normal((sim.n, sim.q))
    g_norm = float(np.linalg.norm(G))
    if cfg.noise_points == 1:
        snrs = np.array([sim.snr])
    else:
        shifts = np.linspace(cfg.snr_decades / 2, -cfg.snr_decades / 2, cfg.noise_points)
        snrs = sim.snr * 10.0 ** shifts
    rows = []
    for snr in snrs:
        sigma_star = signal_norm / (snr * g_norm)
        Y = signal + sigma_star * G
        data = Dataset(X=X, Y=Y)
        for kind in (cfg.estimators or ("lasso", "scl")):
            if kind == "lasso":
                spec = EstimatorSpec(kind="lasso", lam=1.0, tol=cfg.tol,
                                     max_epochs=cfg.max_epochs)
                lmax = lambda_max("lasso", data)
            elif kind == "scl":
                smin = cfg.sigma_min_ratio * float(np.linalg.norm(Y)) / math.sqrt(Y.size)
                spec = EstimatorSpec(kind="scl", lam=1.0, sigma_min=smin, tol=cfg.tol,
                                     max_epochs=cfg.max_epochs)
                lmax = lambda_max("scl", data, sigma_min=smin)
            else:
                raise ValueError(f"pivotality supports lasso and scl, got {kind!r}")
            grid = lmax * cfg.lambda_grid.ratios()
            lam_opt = cross_validate_lambda(data, spec, grid, cfg.folds)
            rows.append((kind, float(snr), sigma_star, rep, lam_opt, lam_opt / lmax))
    return rows


def run_pivotality(cfg, jobs=1):
    """Cross-validated lambda as a function of the noise level.

    The design and coefficients are held fixed; each replicate redraws the
    noise direction, and the noise scale sweeps ``snr_decades`` decades of
    sigma* around the spec's SNR (same draw rescaled, so the lambda/noise
    relation is measured on matched realizations).
    """
    if cfg.sim.q != 1:
        raise ValueError("pivotality is a single-task experiment (q = 1)")
    table = ExperimentTable(
        ["estimator", "snr", "sigma_star", "replicate", "lambda_opt", "lambda_opt_ratio"])
    for rows in _map_replicates(_pivotality_replicate, cfg, jobs):
        for row in rows:
            table.append(*row)
    return table


# ---------------------------------------------------------------------------
# residual rank deficiency

def run_residual_rank(cfg, jobs=1):
    """Singular values of the residuals along the lambda path.

    Uses the generalized concomitant solver at a near-zero smoothing level
    (annealed warm starts); singular values below ``sigma_min * sqrt(q)``
    sit at the smoothing floor and are flagged as such.
    """
    table = ExperimentTable(
        ["replicate", "matrix", "lambda_ratio", "k", "singular_value", "at_floor",
         "converged"])
    for rep in range(cfg.replicates):
        sim = cfg.sim
        X = make_design(sim)
        B = make_coefficients(sim)
        signal = X @ B
        G = rng_stream(sim.seed, STREAM_NOISE, rep).standard_normal((sim.n, sim.q))
        sigma_star = float(np.linalg.norm(signal)) / (sim.snr * float(np.linalg.norm(G)))
        Y = signal + sigma_star * G
        data = Dataset(X=X, Y=Y)
        smin = tiny_sigma_min(Y)
        smax = default_sigma_max(Y)
        floor = smin * math.sqrt(sim.q)
        for k, sv in enumerate(np.linalg.svd(Y, compute_uv=False)):
            table.append(rep, "Y", 1.0, k, float(sv), bool(sv < floor), True)
        lmax = lambda_max("sgcl", data, sigma_min=smin, sigma_max=smax)
        b = None
        for ratio in cfg.lambda_grid.ratios():
            res = fit_sgcl_annealed(data, ratio * lmax, smin, smax, tol=cfg.tol,
                                    max_epochs=cfg.max_epochs, b_init=b)
            b = res.B_hat
            for k, sv in enumerate(np.linalg.svd(res.residuals, compute_uv=False)):
                table.append(rep, "residual", float(ratio), k, float(sv),
                             bool(sv < floor), bool(res.converged))
    return table


# ---------------------------------------------------------------------------
# recovery heatmap over (lambda, sigma_min)

def _heatmap_replicate(cfg, rep):
    sim = cfg.sim
    kind = (cfg.estimators or ("scl",))[0]
    if kind not in ("scl", "sgcl"):
        raise ValueError(f"recovery_heatmap supports scl and sgcl, got {kind!r}")
    X = make_design(sim)
    B_star = make_coefficients(sim)
    support_star = frozenset(int(j) for j in np.nonzero(np.linalg.norm(B_star, axis=1))[0])
    signal = X @ B_star
    G = rng_stream(sim.seed, STREAM_NOISE, rep).standard_normal((sim.n, sim.q))
    sigma_star = float(np.linalg.norm(signal)) / (sim.snr * float(np.linalg.norm(G)))
    Y = signal + sigma_star * G
    data = Dataset(X=X, Y=Y)
    ratios = cfg.lambda_grid.ratios()
    rows = []
    for smin_ratio in (cfg.sigma_min_grid or (0.1, 2 ** -0.5, 10.0)):
        smin = smin_ratio * sigma_star
        if kind == "scl":
            spec = EstimatorSpec(kind="scl", lam=1.0, sigma_min=smin,
                                 tol=cfg.tol, max_epochs=cfg.max_epochs)
            lmax = lambda_max("scl", data, sigma_min=smin)
        else:
            smax = max(default_sigma_max(Y), smin)
            spec = EstimatorSpec(kind="sgcl", lam=1.0, sigma_min=smin, sigma_max=smax,
                                 tol=cfg.tol, max_epochs=cfg.max_epochs)
            lmax = lambda_max("sgcl", data, sigma_min=smin, sigma_max=smax)
        for ratio, res in zip(ratios, fit_path(data, spec, lmax * ratios)):
            support_hat = estimate_support(res.B_hat, 0.0)
            m = recovery_metrics(support_hat, support_star)
            rows.append((rep, float(smin_ratio), float(ratio), float(ratio * lmax),
                         smin, m["hard"], len(support_hat), m["true_positives"],
                         m["false_positives"], bool(res.converged)))
    return rows


def run_recovery_heatmap(cfg, jobs=1):
    """Exact support recovery over a (lambda ratio, sigma_min ratio) grid.

    One row per cell per replicate; the hard-recovery metric uses the exact
    nonzero-row support of the solution.  Cell means are left to consumers
    (see :func:`heatmap_cell_means`).
    """
    table = ExperimentTable(
        ["replicate", "sigma_min_ratio", "lambda_ratio", "lambda", "sigma_min",
         "hard", "support_size", "true_positives", "false_positives", "converged"])
    for rows in _map_replicates(_heatmap_replicate, cfg, jobs):
        for row in rows:
            table.append(*row)
    return table


def heatmap_cell_means(table):
    """Mean hard recovery per (sigma_min_ratio, lambda_ratio) cell."""
    sums = {}
    counts = {}
    cols = table.columns
    i_s, i_l, i_h = cols.index("sigma_min_ratio"), cols.index("lambda_ratio"), cols.index("hard")
    for row in table.rows:
        key = (row[i_s], row[i_l])
        sums[key] = sums.get(key, 0.0) + row[i_h]
        counts[key] = counts.get(key, 0) + 1
    return {key: sums[key] / counts[key] for key in sums}


def saturated_reference_optimum(cfg, lambda_eff_grid, jobs=1):
    """Mean hard recovery of the plain multitask Lasso over a lambda_eff grid.

    Reference curve for the saturated regime, evaluated on the same noise
    replicates as the heatmap; returns the best cell index and the mean
    recovery per grid point.
    """
    grid = np.asarray(lambda_eff_grid, dtype=np.float64)
    means = np.zeros(grid.size)
    for rep in range(cfg.replicates):
        sim = cfg.sim
        X = make_design(sim)
        B_star = make_coefficients(sim)
        support_star = frozenset(int(j) for j in np.nonzero(np.linalg.norm(B_star, axis=1))[0])
        signal = X @ B_star
        G = rng_stream(sim.seed, STREAM_NOISE, rep).standard_normal((sim.n, sim.q))
        sigma_star = float(np.linalg.norm(signal)) / (sim.snr * float(np.linalg.norm(G)))
        data = Dataset(X=X, Y=signal + sigma_star * G)
        b = None
        for i, lam_eff in enumerate(grid):
            res = fit_mt_lasso(data, float(lam_eff), tol=cfg.tol,
                               max_epochs=cfg.max_epochs, b_init=b)
            b = res.B_hat
            hat = estimate_support(res.B_hat, 0.0)
            means[i] += (hat == support_star) / cfg.replicates
    return int(np.argmax(means)), means


# ---------------------------------------------------------------------------
# sup-norm / cone bound verification

def scale_for_signal_condition(B_raw, lam, sigma_star, alpha, margin=1.2):
    """Scale factor making the minimum-signal condition hold with *margin*.

    The threshold itself grows with the signal through eta, so a solution
    only exists when ``min_row_norm / q`` exceeds the eta-induced slope;
    raises otherwise (the design is then too small for the condition).
    """
    C = supnorm_constant(alpha)
    q = B_raw.shape[1]
    row_norms = np.linalg.norm(B_raw, axis=1)
    m0 = float(row_norms[row_norms > 0].min()) / q
    k0 = float(row_norms.sum())
    slope = margin * 2.0 * C * lam * lam * k0
    if m0 <= slope:
        raise ValueError(
            "signal-strength condition unsatisfiable: need min row norm/q "
            f"{m0} > {slope}; increase n or q, or decrease s")
    return margin * 6.0 * C * lam * sigma_star / (m0 - slope)


def _bound_replicate(cfg, rep):
    sim = cfg.sim
    X = make_design(sim)
    alpha = incoherence_alpha(X, sim.s)
    lam = proposed_lambda(sim.n, sim.q, sim.p, cfg.A)
    sigma_star = 1.0
    B_dir = make_coefficients(sim)
    norms = np.linalg.norm(B_dir, axis=1)
    B_dir[norms > 0] /= norms[norms > 0, None]  # equal row norms
    t = scale_for_signal_condition(B_dir, lam, sigma_star, alpha)
    B_star = t * B_dir
    support_star = frozenset(int(j) for j in np.nonzero(np.linalg.norm(B_star, axis=1))[0])
    E = sigma_star * rng_stream(sim.seed, STREAM_NOISE, rep).standard_normal((sim.n, sim.q))
    Y = X @ B_star + E
    truth = Truth(B_star=B_star, sigma_star=sigma_star, support_star=support_star)
    data = Dataset(X=X, Y=Y, truth=truth, normalization=sim.normalization)

    smin = cfg.sigma_min_ratio * sigma_star
    from .estimators import fit_scl  # local import keeps module init light
    res = fit_scl(data, lam, smin, tol=cfg.tol, max_epochs=cfg.max_epochs)
    delta = res.B_hat - B_star
    a1 = event_holds("A1", X, E, lam, sigma_star)
    cratio = cone_ratio(delta, support_star)
    lhs, rhs, sup_ok = supnorm_bound_check(res, data, lam, alpha)
    threshold = supnorm_constant(alpha) * (3.0 + eta(lam, B_star, sigma_star)) * lam * sigma_star
    support_ok = estimate_support(res.B_hat, threshold) == support_star
    bound = event_probability_bound("A1", sim.n, sim.q, sim.p, cfg.A)
    return [(rep, bool(a1), cratio, bool(cratio <= 3.0), lhs, rhs, bool(sup_ok),
             bool(support_ok), eta(lam, B_star, sigma_star), alpha, lam, bound,
             bool(res.converged))]


def run_bound_verification(cfg, jobs=1):
    """Per-replicate certificates of the sup-norm theory on an incoherent design.

    The design must certify incoherence at (alpha > 1, s); coefficients are
    rescaled so the minimum-signal condition holds, sigma* is fixed at 1,
    and the concomitant estimator runs at the noise-free proposed lambda.
    """
    alpha = incoherence_alpha(make_design(cfg.sim), cfg.sim.s)
    if not alpha > 1:
        raise ValueError(f"design is not incoherent: achievable alpha is {alpha}")
    table = ExperimentTable(
        ["replicate", "a1", "cone_ratio", "cone_ok", "supnorm_lhs", "supnorm_rhs",
         "supnorm_ok", "support_ok", "eta", "alpha", "lambda", "a1_bound", "converged"])
    for rows in _map_replicates(_bound_replicate, cfg, jobs):
        for row in rows:
            table.append(*row)
    return table


# ---------------------------------------------------------------------------
# dispatch, parallel fan-out, presets

_RUNNERS = {
    "pivotality": run_pivotality,
    "residual_rank": run_residual_rank,
    "recovery_heatmap": run_recovery_heatmap,
    "bound_verification": run_bound_verification,
}

_REPLICATE_WORKERS = {
    "pivotality": _pivotality_replicate,
    "recovery_heatmap": _heatmap_replicate,
    "bound_verification": _bound_replicate,
}


def _replicate_entry(args):
    cfg_json, name, rep = args
    cfg = ExperimentConfig.from_json(cfg_json)
    return rep, _REPLICATE_WORKERS[name](cfg, rep)


def _map_replicates(worker, cfg, jobs):
    """Run the per-replicate worker serially or on a process pool.

    Results are assembled in replicate order, so the output is independent
    of the job count.
    """
    if jobs <= 1:
        for rep in range(cfg.replicates):
            yield worker(cfg, rep)
        return
    name = next(k for k, v in _REPLICATE_WORKERS.items() if v is worker)
    cfg_json = cfg.to_json()
    args = [(cfg_json, name, rep) for rep in range(cfg.replicates)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        results = dict(pool.map(_replicate_entry, args))
    for rep in range(cfg.replicates):
        yield results[rep]


def run_experiment(cfg, jobs=1):
    """Run the configured experiment and return its table."""
    return _RUNNERS[cfg.experiment](cfg, jobs=jobs)


def emit(cfg, table, directory=None):
    """Write ``<experiment>.csv`` and ``<experiment>.config.json``; return paths."""
    directory = cfg.output_path if directory is None else directory
    os.makedirs(directory, exist_ok=True)
    csv_path = write_table_csv(table, os.path.join(directory, f"{cfg.experiment}.csv"))
    cfg_path = write_config_json(cfg, os.path.join(directory, f"{cfg.experiment}.config.json"))
    return csv_path, cfg_path


PRESETS = {
    # desk-scale runs (minutes), shrunk replicate counts and grids
    "pivotality_desk": ExperimentConfig(
        experiment="pivotality",
        sim=SimulationSpec(n=100, p=200, q=1, s=10, rho_x=0.0, snr=4.74, seed=20260810),
        lambda_grid=GridSpec(count=20, min_ratio=0.01),
        replicates=10, folds=3, noise_points=10, snr_decades=1.0,
        sigma_min_ratio=0.05, tol=1e-5, max_epochs=1500),
    "residual_rank_fig2": ExperimentConfig(
        experiment="residual_rank",
        sim=SimulationSpec(n=10, p=30, q=20, s=5, rho_x=0.0, snr=1.0, seed=20260810),
        lambda_grid=GridSpec(count=10, min_ratio=0.3),
        replicates=1, tol=1e-6, max_epochs=3000),
    "recovery_heatmap_desk": ExperimentConfig(
        experiment="recovery_heatmap",
        sim=SimulationSpec(n=50, p=200, q=20, s=5, rho_x=0.5, snr=3.0, seed=20260810),
        lambda_grid=GridSpec(count=12, min_ratio=0.05),
        replicates=25, estimators=("scl",),
        sigma_min_grid=(0.1, 2 ** -0.5, 10.0)),
    "bound_verification_desk": ExperimentConfig(
        experiment="bound_verification",
        sim=SimulationSpec(n=400, p=20, q=60, s=2, rho_x=1.0 / 28.0, snr=1.0,
                           seed=20260810, design="equicorrelated"),
        lambda_grid=GridSpec(count=1, min_ratio=1.0),
        replicates=200, A=2.0, sigma_min_ratio=0.5, tol=1e-8, max_epochs=10_000),
    # paper-scale figure configurations
    "recovery_heatmap_fig3": ExperimentConfig(
        experiment="recovery_heatmap",
        sim=SimulationSpec(n=50, p=1000, q=20, s=5, rho_x=0.5, snr=2.0, seed=20260810),
        lambda_grid=GridSpec(count=30, min_ratio=0.01),
        replicates=100, estimators=("scl",),
        sigma_min_grid=(0.01, 0.1, 2 ** -0.5, 1.0, 10.0, 100.0)),
    "recovery_heatmap_prose": ExperimentConfig(
        experiment="recovery_heatmap",
        sim=SimulationSpec(n=50, p=1000, q=50, s=5, rho_x=0.5, snr=2.0, seed=20260810),
        lambda_grid=GridSpec(count=30, min_ratio=0.01),
        replicates=100, estimators=("scl",),
        sigma_min_grid=(0.01, 0.1, 2 ** -0.5, 1.0, 10.0, 100.0)),
}
