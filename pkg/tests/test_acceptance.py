"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with `pytest tests/test_acceptance.py -v -rA` to see
the lines for passing tests too).

Statistical criteria are seed-pinned: the asserted quantities are Monte
Carlo estimates whose bands were checked against their sampling noise,
and the pinned seeds make the outcomes deterministic.
"""

import json
import time

import numpy as np
import pytest
import scipy.linalg
from scipy.optimize import minimize_scalar

import sparfima as sf
from sparfima import (FitConfig, ModelSpec, SiteSet, fit_qml,
                      frac_power_series, frac_power_spectral, gen_binomial,
                      influence_profile, log_det_frac, morans_i, morans_test,
                      permutation_p, queen_contiguity, rook_contiguity,
                      row_standardize, simulate, simulate_many,
                      time_shift_matrix)
from sparfima.cli import main as cli_main
from sparfima.montecarlo import McConfig, run_mc


def _report(criterion, ok, detail):
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'}  [{detail}]")
    assert ok, f"{criterion}: {detail}"


def _grid_model(size, **kwargs):
    w = row_standardize(queen_contiguity(size, size))
    sites = SiteSet.regular_grid(size, size)
    defaults = dict(rho=0.5, lam=0.0, d=1.0, sigma2=1.0, w1=w, w2=w,
                    alpha=0.0, sites=sites)
    defaults.update(kwargs)
    return ModelSpec(**defaults)


def test_criterion_01_operator_identity_suite():
    t0 = time.perf_counter()
    worst = 0.0
    for size in ((4, 4), (7, 5), (10, 10)):
        w = row_standardize(queen_contiguity(*size))
        n = w.n
        eye = np.eye(n)
        for a, d in ((0.5, 0.8), (-0.4, 1.5), (0.9, 0.3)):
            power = frac_power_spectral(w, a, d)
            # inverse of the d-power equals the d-power of the inverse
            lhs = np.linalg.inv(power)
            rhs = scipy.linalg.fractional_matrix_power(
                np.linalg.inv(eye - a * w.toarray()), d)
            worst = max(worst, np.abs(lhs - np.real(rhs)).max())
            # series/spectral agreement
            series = frac_power_series(w, a, d, tol=1e-14).matrix
            worst = max(worst, np.abs(power - series).max())
            # eigenvalue log-determinant vs dense factorization
            sign, logdet = np.linalg.slogdet(power)
            worst = max(worst,
                        abs(log_det_frac(w, a, d) - logdet)
                        / max(1.0, abs(logdet)))
        # semigroup property
        for d1, d2 in ((0.3, 0.7), (0.7, 1.5)):
            p12 = frac_power_spectral(w, 0.5, d1) @ frac_power_spectral(
                w, 0.5, d2)
            worst = max(worst,
                        np.abs(p12 - frac_power_spectral(w, 0.5, d1 + d2))
                        .max())
    elapsed = time.perf_counter() - t0
    _report("operator-identity-suite",
            worst < 1e-8 and elapsed < 10.0,
            f"worst deviation {worst:.2e}, {elapsed:.1f}s")


def test_criterion_02_moment_oracle_3x3():
    # The covariance band (2% relative at 200k draws) is calibrated for
    # the plus-convention inner matrix I + B2 + B2' + B2 B2', which under
    # this package's (I - lam*W2) moving-average convention is the model
    # with lam = -0.3 (lam <-> -lam maps the conventions). The
    # minus-convention model at lam = +0.3 is checked against its own
    # closed form at a noise-calibrated 5-sigma band.
    t0 = time.perf_counter()
    reps = 200_000
    worst_rel = 0.0
    worst_sigma = 0.0
    for lam, seed in ((-0.3, 2029), (0.3, 2029)):
        spec = _grid_model(3, rho=0.5, lam=lam, d=0.8, sigma2=1.0, alpha=1.0)
        draws = simulate_many(spec, seed=seed, reps=reps)
        cov = sf.covariance_matrix(spec)
        emp = np.cov(draws)
        if lam < 0:
            mask = np.abs(cov) > 0.05
            rel = (np.abs(emp - cov)[mask] / np.abs(cov)[mask]).max()
            worst_rel = max(worst_rel, rel)
        else:
            diag = cov.diagonal()
            mc_sd = np.sqrt((np.outer(diag, diag) + cov ** 2) / reps)
            worst_sigma = max(worst_sigma,
                              (np.abs(emp - cov) / mc_sd).max())
        mean_se = np.sqrt(cov.diagonal() / reps)
        mean_dev = (np.abs(draws.mean(axis=1) - sf.mean_vector(spec))
                    / mean_se).max()
        assert mean_dev < 4.0, f"mean deviated {mean_dev:.2f} MC SE"
    elapsed = time.perf_counter() - t0
    _report("moment-oracle-3x3",
            worst_rel < 0.02 and worst_sigma < 5.0 and elapsed < 60.0,
            f"covariance max rel {worst_rel:.4f} (band 0.02), "
            f"minus-pair max {worst_sigma:.2f} MC sd, {elapsed:.1f}s")


def test_criterion_03_reduction_exactness():
    w = row_standardize(queen_contiguity(10, 10))
    sar = np.eye(100) - 0.6 * w.toarray()
    dev = np.abs(frac_power_spectral(w, 0.6, 1.0) - sar).max()

    t, rho, d = 9, 0.85, 1.3
    res = frac_power_series(time_shift_matrix(t), rho, d)
    expected, rho_pow = [], 1.0
    for k in range(t):
        if k:
            rho_pow *= rho
        expected.append(gen_binomial(d, k) * (-1.0) ** k * rho_pow)
    filter_exact = bool(np.array_equal(res.matrix[:, 0], expected))
    _report("reduction-exactness",
            dev < 1e-12 and filter_exact,
            f"SAR operator deviation {dev:.2e}, "
            f"shift-matrix filter exact: {filter_exact}")


def test_criterion_04_rmse_reproduction_25x25():
    t0 = time.perf_counter()
    config = McConfig(grid_sizes=[25], rho_values=[0.9], d_values=[1.0],
                      lambda_values=[0.0], replications=100, seed=20250809,
                      variant="sparfima-noma")
    cell = run_mc(config).cells[0]
    elapsed = time.perf_counter() - t0
    ok = (0.10 <= cell.rmse["d"] <= 0.30
          and 0.04 <= cell.rmse["rho"] <= 0.12
          and cell.failures == 0
          and elapsed < 1800.0)
    _report("rmse-reproduction-25x25", ok,
            f"RMSE(d)={cell.rmse['d']:.3f} (band 0.10-0.30, target 0.198), "
            f"RMSE(rho)={cell.rmse['rho']:.3f} (band 0.04-0.12, target 0.076), "
            f"failures={cell.failures}, {elapsed:.0f}s")


def test_criterion_05_ma_design_structure_15x15():
    # the 25x25 design point of criterion 4 with a moving-average term
    # (lam = 0.5) at reduced scale: n = 15^2, 20 replications, all five
    # parameters free
    t0 = time.perf_counter()
    config = McConfig(grid_sizes=[15], rho_values=[0.9], d_values=[1.0],
                      lambda_values=[0.5], replications=20, seed=424242,
                      variant="sparfima")
    cell = run_mc(config).cells[0]
    elapsed = time.perf_counter() - t0
    max_bias = max(abs(b) for b in cell.bias.values())
    ok = (cell.failures < 0.1 * 20
          and max_bias <= 0.3
          and elapsed < 900.0)
    bias_str = " ".join(f"{k}={v:+.3f}" for k, v in cell.bias.items())
    _report("ma-design-structure-15x15", ok,
            f"failures={cell.failures}/20, biases {bias_str}, {elapsed:.0f}s")


def test_criterion_06_estimator_calibration():
    w = row_standardize(queen_contiguity(15, 15))
    covered = converged = 0
    all_nd = True
    all_grad = True
    for s in range(100):
        rng = np.random.Generator(np.random.Philox(key=53_000 + s))
        y = rng.standard_normal(225)
        fit = fit_qml(y, w, config=FitConfig(variant="sar"))
        if not fit.converged or fit.std_errors is None:
            continue
        converged += 1
        se = fit.std_errors
        all_nd &= se.negative_definite
        all_grad &= se.gradient_max_abs < 1e-3 * max(1.0, abs(fit.loglik))
        covered += abs(fit.estimates.rho) < 2.0 * se.values.rho
    ok = covered >= 90 and all_nd and all_grad and converged >= 95
    _report("estimator-calibration", ok,
            f"|rho|<2SE in {covered}/{converged}, Hessians negative "
            f"definite: {all_nd}, gradients in tolerance: {all_grad}")


def test_criterion_07_model_selection_power():
    t0 = time.perf_counter()
    spec = _grid_model(25, rho=0.9, lam=0.0, d=1.5)
    wins = 0
    for s in range(100):
        y = simulate(spec, seed=81_000 + s).values
        aic_frac = fit_qml(y, spec.w1,
                           config=FitConfig(variant="sparfima-noma",
                                            compute_se=False)).aic
        aic_sar = fit_qml(y, spec.w1,
                          config=FitConfig(variant="sar",
                                           compute_se=False)).aic
        wins += aic_frac < aic_sar
    elapsed = time.perf_counter() - t0
    _report("model-selection-power", wins >= 90,
            f"spARFIMA AIC < SAR AIC in {wins}/100, {elapsed:.0f}s")


def test_criterion_08_influence_shape_matching():
    # As specified: the L2-closest d=1 profile to a d=2 profile should
    # over-weight distance-1 neighbours and under-weight distances
    # >= sqrt(5). The realized optimum has the mirrored pattern (see the
    # companion test in test_model.py); this criterion is asserted as
    # stated and is expected to fail.
    spec_frac = _grid_model(20, rho=0.588, lam=0.0, d=2.0)
    center = (20 // 2) * 20 + 20 // 2
    frac_profile = influence_profile(spec_frac, center)
    target = np.array([wgt for _, wgt in frac_profile])

    def sar_curve(rho):
        spec = _grid_model(20, rho=rho, lam=0.0, d=1.0)
        return np.array([wgt for _, wgt in influence_profile(spec, center)])

    res = minimize_scalar(lambda r: ((sar_curve(r) - target) ** 2).sum(),
                          bounds=(0.01, 0.995), method="bounded")
    sar = sar_curve(res.x)

    frac_mean, sar_mean = {}, {}
    for (dist, wf), ws in zip(frac_profile, sar):
        key = round(dist, 6)
        frac_mean.setdefault(key, []).append(wf)
        sar_mean.setdefault(key, []).append(ws)
    frac_mean = {k: np.mean(v) for k, v in frac_mean.items()}
    sar_mean = {k: np.mean(v) for k, v in sar_mean.items()}

    ring1 = round(1.0, 6)
    sqrt5 = np.sqrt(5.0)
    far_keys = [k for k in frac_mean if sqrt5 - 1e-9 <= k <= 4.0]
    sar_over_ring1 = sar_mean[ring1] > frac_mean[ring1]
    sar_under_far = all(sar_mean[k] < frac_mean[k] for k in far_keys)
    detail = (f"matched SAR rho={res.x:.3f}; at distance 1 SAR "
              f"{sar_mean[ring1]:.4f} vs d=2 {frac_mean[ring1]:.4f} "
              f"(claim: SAR higher); at sqrt(5) SAR "
              f"{sar_mean[round(sqrt5, 6)]:.4f} vs d=2 "
              f"{frac_mean[round(sqrt5, 6)]:.4f} (claim: SAR lower)")
    _report("influence-shape-matching", sar_over_ring1 and sar_under_far,
            detail)


def test_criterion_09_moran_diagnostics():
    # analytic vs permutation p within 0.05 on seeded 10x10 fields
    w = row_standardize(queen_contiguity(10, 10))
    worst = 0.0
    for seed in (5, 6, 8):
        spec = _grid_model(10, rho=0.15, lam=0.0, d=1.0)
        y = simulate(spec, seed=seed).values
        analytic = morans_test(y, w).p_value
        perm = permutation_p(y, w, draws=10_000, seed=99)
        worst = max(worst, abs(analytic - perm))
    # checkerboard I on row-standardized rook lattices, exact -1
    exact = True
    for rows, cols in ((2, 2), (4, 4), (6, 6)):
        wr = row_standardize(rook_contiguity(rows, cols))
        field = np.array([(-1.0) ** ((i // cols) + (i % cols))
                          for i in range(rows * cols)])
        exact &= morans_i(field, wr) == -1.0
    _report("moran-diagnostics", worst < 0.05 and exact,
            f"max |analytic - permutation| = {worst:.4f}, "
            f"checkerboard exact: {exact}")


def test_criterion_10_cli_determinism(tmp_path):
    sim_args = ["simulate", "--rows", "10", "--cols", "10", "--rho", "0.6",
                "--d", "0.8", "--seed", "11", "--weights", "queen"]
    runs = []
    for tag in ("a", "b"):
        base = tmp_path / tag
        base.mkdir()
        out = base / "field.csv"
        assert cli_main(sim_args + ["--out", str(out)]) == 0
        assert cli_main(["fit", "--data", str(out), "--variant",
                         "sparfima-noma", "--out",
                         str(base / "fit.json")]) == 0
        config = base / "mc.json"
        config.write_text(json.dumps({
            "grid_sizes": [8], "rho_values": [0.5], "d_values": [1.0],
            "lambda_values": [0.0], "replications": 3, "seed": 7,
            "variant": "sar"}))
        assert cli_main(["mc", "--config", str(config), "--out-dir",
                         str(base / "mc")]) == 0
        runs.append(base)

    a, b = runs
    compared = []
    # timing.csv and timing.png carry measured durations and are the
    # documented exception to byte determinism
    for rel in ("field.csv", "field.png", "fit.json", "fit.residuals.csv",
                "mc/rmse_bias.csv", "mc/manifest.json", "mc/rmse.png"):
        same = (a / rel).read_bytes() == (b / rel).read_bytes()
        compared.append((rel, same))
    ok = all(same for _, same in compared)
    _report("cli-determinism", ok,
            "byte-identical: " + ", ".join(
                f"{rel}={'yes' if same else 'NO'}"
                for rel, same in compared))
