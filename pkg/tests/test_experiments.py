import json
import math
from dataclasses import replace

import numpy as np
import pytest

from pivlasso.core import Dataset
from pivlasso.estimators import EstimatorSpec, fit_mt_lasso, lambda_max
from pivlasso.experiments import (
    ExperimentConfig,
    ExperimentTable,
    GridSpec,
    PRESETS,
    cross_validate_lambda,
    emit,
    heatmap_cell_means,
    run_experiment,
    run_pivotality,
    run_recovery_heatmap,
    write_table_csv,
)
from pivlasso.simulate import SimulationSpec, simulate


def tiny_cfg(**overrides):
    base = dict(
        experiment="recovery_heatmap",
        sim=SimulationSpec(n=20, p=12, q=4, s=2, rho_x=0.3, snr=3.0, seed=31),
        lambda_grid=GridSpec(count=4, min_ratio=0.2),
        replicates=2,
        sigma_min_grid=(0.1, 10.0),
        tol=1e-5,
        max_epochs=500,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestGridSpec:
    def test_ratios_descend_from_one(self):
        g = GridSpec(count=5, min_ratio=0.1)
        r = g.ratios()
        assert r[0] == 1.0 and r[-1] == pytest.approx(0.1)
        assert np.all(np.diff(r) < 0)

    def test_single_point(self):
        assert GridSpec(count=1, min_ratio=1.0).ratios().tolist() == [1.0]

    def test_validation(self):
        with pytest.raises(ValueError, match="min_ratio"):
            GridSpec(count=3, min_ratio=0.0)


class TestConfig:
    def test_json_roundtrip(self):
        cfg = tiny_cfg()
        assert ExperimentConfig.from_json(cfg.to_json()) == cfg

    def test_unknown_experiment_rejected(self):
        with pytest.raises(ValueError, match="experiment"):
            tiny_cfg(experiment="nope")


class TestCrossValidation:
    def test_noiseless_selects_smallest_decile(self):
        data = simulate(SimulationSpec(n=40, p=10, q=1, s=3, rho_x=0.0, snr=1e6, seed=1))
        lmax = lambda_max("lasso", data)
        grid = lmax * np.geomspace(1, 1e-3, 30)
        spec = EstimatorSpec(kind="lasso", lam=1.0, tol=1e-6)
        best = cross_validate_lambda(data, spec, grid, folds=4)
        assert best <= np.quantile(grid, 0.1)

    def test_pure_noise_selects_near_lambda_max(self):
        # the held-out curve on pure noise has occasional shallow dips below
        # the null model, so the one-grid-step claim is asserted on the
        # median over draws; every single draw must stay in the upper half
        indices = []
        spec = EstimatorSpec(kind="lasso", lam=1.0, tol=1e-6)
        for key in range(5):
            g = np.random.Generator(np.random.Philox(key=key))
            data = Dataset(X=g.standard_normal((400, 50)),
                           Y=g.standard_normal((400, 1)))
            lmax = lambda_max("lasso", data)
            grid = lmax * np.geomspace(1, 0.05, 25)
            best = cross_validate_lambda(data, spec, grid, folds=4)
            indices.append(int(np.argmin(np.abs(grid - best))))
        assert np.median(indices) <= 1  # within one grid step of lambda_max
        assert max(indices) < 12

    def test_leave_one_out_matches_direct_computation(self):
        data = simulate(SimulationSpec(n=10, p=3, q=1, s=2, rho_x=0.0, snr=2.0, seed=3))
        lmax = lambda_max("lasso", data)
        grid = lmax * np.geomspace(0.9, 0.05, 6)
        spec = EstimatorSpec(kind="lasso", lam=1.0, tol=1e-10)
        best = cross_validate_lambda(data, spec, grid, folds=10)
        # brute-force LOO oracle, no warm starts, independent implementation
        from pivlasso.estimators import fit_lasso
        errs = np.zeros(grid.size)
        for i in range(10):
            keep = [j for j in range(10) if j != i]
            d = Dataset(X=data.X[keep], Y=data.Y[keep])
            for k, lam in enumerate(grid):
                res = fit_lasso(d, lam, tol=1e-10)
                pred = data.X[i] @ res.B_hat[:, 0]
                errs[k] += (data.Y[i, 0] - pred) ** 2
        assert best == pytest.approx(grid[np.argmin(errs)])

    def test_degenerate_folds_rejected(self):
        data = simulate(SimulationSpec(n=5, p=3, q=1, s=1, rho_x=0.0, snr=2.0, seed=4))
        spec = EstimatorSpec(kind="lasso", lam=1.0)
        with pytest.raises(ValueError, match="folds"):
            cross_validate_lambda(data, spec, [0.1], folds=6)


class TestHeatmap:
    def test_row_count_and_bookkeeping(self):
        cfg = tiny_cfg()
        table = run_recovery_heatmap(cfg)
        assert len(table.rows) == cfg.replicates * cfg.lambda_grid.count * len(cfg.sigma_min_grid)
        means = heatmap_cell_means(table)
        assert len(means) == cfg.lambda_grid.count * len(cfg.sigma_min_grid)
        assert all(0.0 <= v <= 1.0 for v in means.values())

    def test_jobs_do_not_change_results(self):
        cfg = tiny_cfg()
        a = run_recovery_heatmap(cfg, jobs=1)
        b = run_recovery_heatmap(cfg, jobs=2)
        assert a.rows == b.rows


class TestPivotality:
    def test_single_point_bookkeeping(self):
        cfg = ExperimentConfig(
            experiment="pivotality",
            sim=SimulationSpec(n=30, p=10, q=1, s=3, rho_x=0.0, snr=2.0, seed=5),
            lambda_grid=GridSpec(count=5, min_ratio=0.05),
            replicates=1, noise_points=1, tol=1e-5, max_epochs=500)
        table = run_pivotality(cfg)
        assert len(table.rows) == 2  # one row per estimator
        assert set(table.column("estimator")) == {"lasso", "scl"}

    def test_multitask_rejected(self):
        cfg = ExperimentConfig(
            experiment="pivotality",
            sim=SimulationSpec(n=30, p=10, q=2, s=3, rho_x=0.0, snr=2.0, seed=5),
            lambda_grid=GridSpec(count=5, min_ratio=0.05))
        with pytest.raises(ValueError, match="single-task"):
            run_pivotality(cfg)


class TestEmission:
    def test_csv_bytes_reproducible(self, tmp_path):
        cfg = tiny_cfg(output_path=str(tmp_path))
        table1 = run_experiment(cfg)
        p1, c1 = emit(cfg, table1, tmp_path / "a")
        table2 = run_experiment(cfg)
        p2, c2 = emit(cfg, table2, tmp_path / "b")
        assert open(p1, "rb").read() == open(p2, "rb").read()
        assert open(c1, "rb").read() == open(c2, "rb").read()

    def test_header_only_csv_for_empty_table(self, tmp_path):
        t = ExperimentTable(["a", "b"])
        path = write_table_csv(t, tmp_path / "t.csv")
        assert open(path).read() == "a,b\n"

    def test_distinct_names_for_two_experiments(self, tmp_path):
        cfg1 = tiny_cfg()
        t1 = run_experiment(cfg1)
        emit(cfg1, t1, tmp_path)
        cfg2 = ExperimentConfig(
            experiment="residual_rank",
            sim=SimulationSpec(n=6, p=10, q=8, s=2, rho_x=0.0, snr=1.0, seed=6),
            lambda_grid=GridSpec(count=2, min_ratio=0.5),
            replicates=1, tol=1e-4, max_epochs=200)
        t2 = run_experiment(cfg2)
        emit(cfg2, t2, tmp_path)
        names = {p.name for p in tmp_path.iterdir()}
        assert {"recovery_heatmap.csv", "residual_rank.csv"} <= names

    def test_config_sidecar_reloads(self, tmp_path):
        cfg = tiny_cfg()
        t = run_experiment(cfg)
        _, cfg_path = emit(cfg, t, tmp_path)
        restored = ExperimentConfig.from_json(json.load(open(cfg_path)))
        assert restored == cfg

    def test_float_cells_round_trip(self, tmp_path):
        t = ExperimentTable(["x"])
        value = 0.1 + 0.2  # not representable exactly; repr must round-trip
        t.append(value)
        path = write_table_csv(t, tmp_path / "t.csv")
        body = open(path).read().splitlines()[1]
        assert float(body) == value


class TestSaturatedReference:
    def test_reference_alignment_shapes(self):
        from pivlasso.experiments import saturated_reference_optimum
        cfg = tiny_cfg(replicates=2)
        grid = np.geomspace(1.0, 0.1, 4) * 0.05
        best, means = saturated_reference_optimum(cfg, grid)
        assert means.shape == (4,)
        assert 0 <= best < 4


def test_presets_are_valid_configs():
    for name, cfg in PRESETS.items():
        assert isinstance(cfg, ExperimentConfig), name
        assert cfg.experiment in name or name.startswith(cfg.experiment)
