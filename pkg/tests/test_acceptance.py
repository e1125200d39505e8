"""Acceptance suite: one test per shipped criterion, each printing a
pass/fail line (run with ``pytest tests/test_acceptance.py -s`` to see them).

Tolerances and runtime budgets are pinned here; nothing is deferred to
later calibration.
"""

import math
import time
from contextlib import contextmanager
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import spearmanr

import pivlasso.experiments as ex
from pivlasso.core import Dataset, norm_l2inf
from pivlasso.diagnostics import incoherence_alpha, supnorm_constant
from pivlasso.estimators import (
    default_sigma_max,
    fit_lasso,
    fit_mt_lasso,
    fit_scl,
    fit_sgcl,
    lambda_max,
)
from pivlasso.simulate import SimulationSpec, make_design, mc_event_frequency
from pivlasso.smoothing import (
    SmoothingParams,
    covariance_objective,
    optimal_covariance_root,
    smoothed_frobenius,
    smoothed_frobenius_oracle,
    smoothed_nuclear_oracle,
)


def rng(key):
    return np.random.Generator(np.random.Philox(key=key))


@contextmanager
def criterion(number, name, budget_seconds):
    start = time.time()
    try:
        yield
    except BaseException:
        print(f"[acceptance] criterion {number:2d} ({name}): FAIL "
              f"after {time.time() - start:.1f}s")
        raise
    elapsed = time.time() - start
    status = "PASS" if elapsed < budget_seconds else "FAIL (over budget)"
    print(f"[acceptance] criterion {number:2d} ({name}): {status} "
          f"in {elapsed:.1f}s (budget {budget_seconds:.0f}s)")
    assert elapsed < budget_seconds


def test_criterion_01_smoothing_identity():
    with criterion(1, "smoothing identity", 5.0):
        g = rng(101)
        for _ in range(1000):
            Z = g.standard_normal((int(g.integers(1, 21)), int(g.integers(1, 21))))
            for smin in (0.1, 1.0, 10.0):
                closed = smoothed_frobenius(Z, smin)
                oracle = smoothed_frobenius_oracle(Z, smin)
                assert abs(closed - oracle) <= 1e-9


def test_criterion_02_covariance_root_closed_form():
    with criterion(2, "covariance root closed form", 30.0):
        params = SmoothingParams(0.5, 2.0)
        g = rng(102)
        for trial in range(100):
            R = g.standard_normal((3, 5))
            S_hat = optimal_covariance_root(R, params)
            value = covariance_objective(R, S_hat)
            oracle = smoothed_nuclear_oracle(R, params, n_starts=20, iters=300,
                                             seed=trial)
            assert value <= oracle + 1e-6


def _random_fit_instance(g, q):
    n = int(g.integers(15, 35))
    p = int(g.integers(5, 25))
    s = int(g.integers(1, min(p, 5) + 1))
    X = g.standard_normal((n, p))
    X *= math.sqrt(n) / np.linalg.norm(X, axis=0)
    B = np.zeros((p, q))
    B[g.choice(p, size=s, replace=False)] = g.standard_normal((s, q))
    Y = X @ B + 0.5 * g.standard_normal((n, q))
    return Dataset(X=X, Y=Y)


def test_criterion_03_kkt_certificates():
    with criterion(3, "KKT certificates", 120.0):
        g = rng(103)
        for trial in range(50):
            frac = float(g.uniform(0.2, 0.8))

            data = _random_fit_instance(g, 1)
            lam = frac * lambda_max("lasso", data)
            res = fit_lasso(data, lam)
            assert res.converged
            lhs = np.abs(data.X.T @ res.residuals[:, 0]).max() / data.n
            assert lhs <= lam + 1e-6 * lam

            data = _random_fit_instance(g, 4)
            nq = data.n * data.q
            lam = frac * lambda_max("mt_lasso", data)
            res = fit_mt_lasso(data, lam)
            assert res.converged
            lhs = np.linalg.norm(data.X.T @ res.residuals, axis=1).max() / nq
            assert lhs <= lam + 1e-6 * lam

            data = _random_fit_instance(g, 3)
            nq = data.n * data.q
            smin = 0.05 * float(np.linalg.norm(data.Y)) / math.sqrt(nq)
            lam = frac * lambda_max("scl", data, sigma_min=smin)
            res = fit_scl(data, lam, smin)
            assert res.converged
            lhs = np.linalg.norm(data.X.T @ res.residuals, axis=1).max() / nq
            rhs = lam * max(np.linalg.norm(res.residuals) / math.sqrt(nq), smin)
            assert lhs <= rhs + 1e-6 * lam

            data = _random_fit_instance(g, 3)
            nq = data.n * data.q
            smin = 0.1 * float(np.linalg.norm(data.Y)) / math.sqrt(nq)
            smax = default_sigma_max(data.Y)
            lam = frac * lambda_max("sgcl", data, sigma_min=smin, sigma_max=smax)
            res = fit_sgcl(data, lam, smin, smax)
            assert res.converged
            w, V = np.linalg.eigh(res.S_hat)
            lhs = np.linalg.norm(
                data.X.T @ ((V / w) @ V.T @ res.residuals), axis=1).max()
            assert lhs <= lam * nq + 1e-6 * lam * nq


def test_criterion_04_saturated_equivalence():
    with criterion(4, "saturated equivalence", 60.0):
        g = rng(104)
        for _ in range(20):
            data = _random_fit_instance(g, 3)
            nq = data.n * data.q
            smin = 2.0 * float(np.linalg.norm(data.Y)) / math.sqrt(nq)
            lam = float(g.uniform(0.2, 0.8)) * lambda_max("scl", data, sigma_min=smin)
            a = fit_scl(data, lam, smin, tol=1e-10)
            b = fit_mt_lasso(data, lam * smin, tol=1e-10)
            assert np.linalg.norm(a.residuals) / math.sqrt(nq) < smin
            diff = np.linalg.norm(a.B_hat - b.B_hat)
            assert diff <= 1e-8 * (1 + np.linalg.norm(a.B_hat))


def test_criterion_05_pivotality():
    with criterion(5, "pivotality of cross-validated lambda", 300.0):
        table = ex.run_pivotality(ex.PRESETS["pivotality_desk"])
        est = np.array(table.column("estimator"))
        sigma = np.array(table.column("sigma_star"))
        lam = np.array(table.column("lambda_opt"))
        snr = np.array(table.column("snr"))

        def noise_level_means(kind):
            mask = est == kind
            return np.array([lam[mask & (snr == s)].mean()
                             for s in np.unique(snr[mask])])

        lasso_means = noise_level_means("lasso")
        assert lasso_means.max() / lasso_means.min() >= 5.0
        mask = est == "lasso"
        assert spearmanr(sigma[mask], lam[mask]).statistic >= 0.9
        scl_means = noise_level_means("scl")
        assert scl_means.max() / scl_means.min() <= 2.0


def test_criterion_06_residual_rank_deficiency():
    with criterion(6, "residual rank deficiency", 60.0):
        cfg = ex.PRESETS["residual_rank_fig2"]
        table = ex.run_residual_rank(cfg)
        cols = table.columns
        rows = [dict(zip(cols, r)) for r in table.rows]
        spectra = {}
        for r in rows:
            spectra.setdefault((r["matrix"], r["lambda_ratio"]), []).append(
                (r["k"], r["singular_value"]))
        y_sv = [v for _, v in sorted(spectra[("Y", 1.0)])]
        assert y_sv[-1] / y_sv[0] > 1e-2
        found = False
        for (matrix, ratio), pairs in spectra.items():
            if matrix != "residual" or ratio < 0.3:
                continue
            sv = [v for _, v in sorted(pairs)]
            if sv[0] > 0 and sv[-1] / sv[0] < 1e-4:
                found = True
        assert found


def test_criterion_07_recovery_heatmap_pivotality():
    with criterion(7, "recovery heatmap pivotality", 600.0):
        cfg = ex.PRESETS["recovery_heatmap_desk"]
        table = ex.run_recovery_heatmap(cfg)
        means = ex.heatmap_cell_means(table)
        ratios = list(cfg.lambda_grid.ratios())

        small, mid, big = cfg.sigma_min_grid  # 0.1, 1/sqrt(2), 10
        good_small = {r for r in ratios if means[(small, r)] >= 0.9}
        good_mid = {r for r in ratios if means[(mid, r)] >= 0.9}
        assert good_small & good_mid  # lambda cells overlap: sigma_min-free

        # saturated regime: lambda * sigma_min matches the plain multitask
        # optimum within one grid step (the product grid aligns with the
        # multitask lambda_eff grid cell by cell)
        heat_big = [means[(big, r)] for r in ratios]
        best_big = int(np.argmax(heat_big))
        from pivlasso.core import Dataset
        from pivlasso.estimators import EstimatorSpec, fit_path
        from pivlasso.simulate import STREAM_NOISE, make_coefficients, rng_stream
        sim = cfg.sim
        mt_hard = np.zeros(len(ratios))
        for rep in range(cfg.replicates):
            X = make_design(sim)
            B = make_coefficients(sim)
            support = frozenset(np.nonzero(np.linalg.norm(B, axis=1))[0].tolist())
            signal = X @ B
            G = rng_stream(sim.seed, STREAM_NOISE, rep).standard_normal((sim.n, sim.q))
            sstar = float(np.linalg.norm(signal)) / (sim.snr * float(np.linalg.norm(G)))
            data = Dataset(X=X, Y=signal + sstar * G)
            lmax_mt = lambda_max("mt_lasso", data)
            spec = EstimatorSpec(kind="mt_lasso", lam=1.0, tol=cfg.tol,
                                 max_epochs=cfg.max_epochs)
            for i, res in enumerate(fit_path(data, spec, lmax_mt * np.array(ratios))):
                got = frozenset(np.nonzero(np.linalg.norm(res.B_hat, axis=1))[0].tolist())
                mt_hard[i] += (got == support) / cfg.replicates
        best_mt = int(np.argmax(mt_hard))
        assert abs(best_big - best_mt) <= 1


def test_criterion_08_concentration_bounds():
    with criterion(8, "concentration bounds", 300.0):
        shapes = ((20, 12, 50), (50, 20, 200))
        events = ("C1", "C3", "C4", "C5", "C6", "A1", "A2")
        trials = 10_000
        for n, q, p in shapes:
            spec = SimulationSpec(n=n, p=p, q=q, s=1, rho_x=0.0, snr=1.0,
                                  seed=1000 + n)
            for event in events:
                emp, bound = mc_event_frequency(event, spec, None, 2.0, trials)
                mc_err = 3.0 * math.sqrt(emp * (1 - emp) / trials)
                assert emp >= bound - mc_err, (event, n, q, p, emp, bound)


def test_criterion_09_cone_and_supnorm_bound():
    with criterion(9, "cone and sup-norm bound", 300.0):
        cfg = ex.PRESETS["bound_verification_desk"]
        table = ex.run_bound_verification(cfg)
        cols = table.columns
        rows = [dict(zip(cols, r)) for r in table.rows]
        assert len(rows) == 200
        assert rows[0]["alpha"] == pytest.approx(2.0, abs=1e-6)
        on_a1 = [r for r in rows if r["a1"]]
        assert on_a1, "event never happened; cannot condition"
        assert all(r["cone_ratio"] <= 3.0 for r in on_a1)
        assert all(r["supnorm_ok"] for r in on_a1)
        emp = np.mean([r["supnorm_ok"] for r in rows])
        bound = rows[0]["a1_bound"]
        mc_err = 3.0 * math.sqrt(max(emp * (1 - emp), 0.0) / len(rows))
        assert emp >= bound - mc_err


def test_criterion_10_incoherence_chain():
    with criterion(10, "incoherence chain inequality", 30.0):
        s = 3
        spec = SimulationSpec(n=60, p=15, q=1, s=s, rho_x=1.0 / (14 * s), snr=1.0,
                              seed=110, design="equicorrelated")
        X = make_design(spec)
        alpha = incoherence_alpha(X, s)
        assert alpha == pytest.approx(2.0, abs=1e-9)
        C = supnorm_constant(2.0)
        assert C == pytest.approx(23.0 / 7.0)
        psi = X.T @ X / X.shape[0]
        g = rng(111)
        mask = np.zeros(15, dtype=bool)
        mask[:s] = True
        for _ in range(10_000):
            D = g.standard_normal((15, 1))
            on = np.abs(D[mask]).sum()
            off = np.abs(D[~mask]).sum()
            if off > 3 * on:
                D[~mask] *= 3 * on / off
            assert norm_l2inf(D) <= C * norm_l2inf(psi @ D) * (1 + 1e-12)


def test_criterion_11_deterministic_experiment_output(tmp_path):
    with criterion(11, "byte-identical experiment reruns", 120.0):
        cfg = replace(
            ex.PRESETS["recovery_heatmap_desk"],
            sim=replace(ex.PRESETS["recovery_heatmap_desk"].sim, n=20, p=30),
            replicates=3,
            lambda_grid=ex.GridSpec(count=4, min_ratio=0.2),
        )
        table_a = ex.run_experiment(cfg)
        csv_a, cfg_a = ex.emit(cfg, table_a, tmp_path / "a")
        table_b = ex.run_experiment(cfg)
        csv_b, cfg_b = ex.emit(cfg, table_b, tmp_path / "b")
        assert open(csv_a, "rb").read() == open(csv_b, "rb").read()
        assert open(cfg_a, "rb").read() == open(cfg_b, "rb").read()
