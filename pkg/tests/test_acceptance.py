"""Acceptance criteria 1 to 11. Each test prints one PASS/FAIL line and asserts it."""

import time

import numpy as np
import pytest

from conftest import MASTER_SEED, record_acceptance
from spectral_levy import (
    EstimateConfig,
    LevyModel,
    SpectralData,
    char_fn,
    check_assumptions,
    ecf,
    estimate,
    estimate_spectral,
    eval_Fg,
    eval_Fg_quad,
    flat_top_kernel,
    frequency_grid,
    gamma_sigma_closed_form,
    invert_kernel,
    levy_tail,
    log_deriv_ratio,
    oracle_covariance,
    sample_increments,
)
from spectral_levy.montecarlo import _oracle_seed

T_GRID = [-1.0, -0.5, 0.5, 1.0, 2.0]
# frozen after one calibration probe, see test_estimator
DRIFT_C = 1.0


def verdict(number, checks, detail, elapsed, budget):
    ok = all(checks) and elapsed < budget
    record_acceptance(number, ok, f"{detail} [{elapsed:.1f}s, budget {budget:.0f}s]")
    return ok


def test_criterion_01_kernel_contract():
    t0 = time.perf_counter()
    k = flat_top_kernel(1.0)
    flat = np.linspace(-0.5, 0.5, 1001)
    outside = np.concatenate([np.linspace(-5, -1, 500), np.linspace(1, 5, 500)])
    exact_flat = bool(np.all(k.ft_unit(flat) == 1.0))
    exact_out = bool(np.all(k.ft_unit(outside) == 0.0))
    x, kx, _ = invert_kernel(k, 200.0, 2**15)
    mass = float(np.sum(kx) * (x[1] - x[0]))

    def bound(size):
        x, kk, dk = invert_kernel(k, 250.0, size)
        band = (np.abs(x) >= 10) & (np.abs(x) <= 200)
        return float(np.max((np.abs(kk[band]) + np.abs(dk[band])) * (1 + np.abs(x[band])) ** 2.5))

    b1, b2 = bound(2**15), bound(2**16)
    change = abs(b2 - b1) / b1
    ok = verdict(1, [exact_flat, exact_out, k.ft_unit(0.0) == 1.0, abs(mass - 1) < 1e-10,
                     np.isfinite(b1), change < 0.01],
                 f"FK flat={exact_flat} zero-outside={exact_out} int K={mass:.12f} "
                 f"decay bound {b1:.3g}, doubling change {change:.1e}",
                 time.perf_counter() - t0, 10)
    assert ok


def test_criterion_02_identification_identity():
    t0 = time.perf_counter()
    u = np.linspace(-50, 50, 2001)
    step = 1e-6
    cases = {
        # F[x nu] in closed form: alpha / (lam - iu) and c / (1 - iu)^2
        "gamma": (LevyModel.gamma_process(0.4, 1.3), 0.4 / (1.3 - 1j * u)),
        "cp": (LevyModel.compound_poisson(1.0), 1.0 / (1.0 - 1j * u) ** 2),
    }
    errs = {}
    for name, (m, fxnu) in cases.items():
        for delta in (1.0, 0.5):
            d = (char_fn(m, delta, u + step) - char_fn(m, delta, u - step)) / (2 * step)
            lhs = d / char_fn(m, delta, u) / (1j * delta)
            errs[f"{name}/{delta:g}"] = float(np.max(np.abs(lhs - fxnu) / np.abs(fxnu)))
    worst = max(errs.values())
    ok = verdict(2, [worst < 1e-5], f"max relative error {worst:.1e} over {sorted(errs)}",
                 time.perf_counter() - t0, 10)
    assert ok


def test_criterion_03_drift_shift():
    t0 = time.perf_counter()
    models = [LevyModel.gamma_process(0.4), LevyModel.compound_poisson(1.0)]
    u = frequency_grid(0.05, 1024)
    ecf_err = ratio_err = 0.0
    worst_ratio = 0.0
    for i, m in enumerate(models):
        x = sample_increments(m, 5000, 1.0, MASTER_SEED + i)
        for c in (-0.5, 0.2, 0.5):
            ecf_err = max(ecf_err, float(np.max(np.abs(ecf(x + c, u) - np.exp(1j * u * c) * ecf(x, u)))))
            a = SpectralData.from_sample(x, u)
            b = SpectralData.from_sample(x + c, u)
            keep = ~(a.clip_mask | b.clip_mask)
            ra, rb = log_deriv_ratio(a)[keep], log_deriv_ratio(b)[keep]
            scale = np.maximum(1.0, np.abs(ra))
            ratio_err = max(ratio_err, float(np.max(np.abs(rb - ra - 1j * c) / scale)))
            for h in ("auto", 0.01, 0.05, 0.1):
                cfg = EstimateConfig(h=h)
                base = estimate(x, cfg, T_GRID)
                shifted = estimate(x + c, cfg, T_GRID)
                worst_ratio = max(worst_ratio, float(np.max(np.abs(shifted.n_hat - base.n_hat))) / base.h)
    ok = verdict(3, [ecf_err < 1e-12, ratio_err < 1e-12, worst_ratio <= DRIFT_C],
                 f"ecf shift error {ecf_err:.1e}, ratio shift error {ratio_err:.1e}, "
                 f"max |dN|/h {worst_ratio:.3f} <= C={DRIFT_C}", time.perf_counter() - t0, 30)
    assert ok


def test_criterion_04_oracle_bias_decay():
    t0 = time.perf_counter()
    m = LevyModel.gamma_process(0.4)
    hs = (0.2, 0.1, 0.05, 0.025)
    bias = []
    for h in hs:
        data = SpectralData.from_model(m, 1.0, frequency_grid(h, 2**14))
        bias.append(abs(estimate_spectral(data, flat_top_kernel(h), [1.0], 1.0).n_hat[0]
                        - levy_tail(m, 1.0)))
    mono = [bias[i + 1] <= 1.1 * bias[i] for i in range(3)]
    ok = verdict(4, mono, "bias " + ", ".join(f"h={h}: {b:.2e}" for h, b in zip(hs, bias)),
                 time.perf_counter() - t0, 60)
    assert ok


def test_criterion_05_route_equivalence():
    t0 = time.perf_counter()
    gaps = {}
    for i, (name, m) in enumerate([("gamma", LevyModel.gamma_process(0.4)),
                                   ("cp", LevyModel.compound_poisson(1.0))]):
        x = sample_increments(m, 5000, 1.0, MASTER_SEED + i)
        gaps[name] = estimate(x, EstimateConfig(route="both"), T_GRID).cross_route_gap
    ok = verdict(5, [g < 1e-3 for g in gaps.values()],
                 "sup gap " + ", ".join(f"{k} {v:.1e}" for k, v in gaps.items()),
                 time.perf_counter() - t0, 60)
    assert ok


def test_criterion_06_exponential_integral_pinning():
    t0 = time.perf_counter()
    ts = (0.5, -2.0, 10.0, -0.1)
    us = (0.01, 0.1, 1.0, 10.0, -100.0)
    worst = 0.0
    for t in ts:
        for u in us:
            ref = eval_Fg_quad(t, u)
            worst = max(worst, abs(complex(eval_Fg(t, u)) - ref) / max(1.0, abs(ref)))
    ok = verdict(6, [worst < 1e-8], f"{len(ts) * len(us)} pairs, |u| in [1e-2, 1e2], "
                 f"max error {worst:.1e}", time.perf_counter() - t0, 30)
    assert ok


def test_criterion_07_gamma_variance_triangle(gamma_mc):
    t0 = time.perf_counter()
    closed = gamma_sigma_closed_form(0.4, 1.0, 1.0)
    oracle = oracle_covariance(LevyModel.gamma_process(0.4), EstimateConfig(), [1.0], 10**5, 1e-3,
                               seed=_oracle_seed(MASTER_SEED)).sigma[0, 0]
    mcv = gamma_mc.record(1.0)["var_stat"]
    co, cm, om = abs(oracle / closed - 1), abs(mcv / closed - 1), abs(mcv / oracle - 1)
    ok = verdict(7, [co < 0.10, cm < 0.15, om < 0.20],
                 f"closed {closed:.4f}, oracle {oracle:.4f}, MC {mcv:.4f}; closed-oracle {co:.1%} "
                 f"(<10%), closed-MC {cm:.1%} (<15%), oracle-MC {om:.1%} (<20%)",
                 time.perf_counter() - t0, 1800)
    assert ok


def test_criterion_08_clt_normality(cp_mc, gamma_mc):
    ks = {f"{name} t={r['t']:g}": r["ks_vs_normal"]
          for name, rep in (("cp", cp_mc), ("gamma", gamma_mc)) for r in rep.records}
    ok = all(v < 0.08 for v in ks.values())
    record_acceptance(8, ok, "KS " + ", ".join(f"{k} {v:.3f}" for k, v in ks.items()) + " (<0.08)")
    assert ok


def test_criterion_09_coverage(cp_mc, gamma_mc):
    cov = {f"{name} t={r['t']:g}": r["coverage"]
           for name, rep in (("cp", cp_mc), ("gamma", gamma_mc)) for r in rep.records}
    ok = all(0.90 <= v <= 0.99 for v in cov.values())
    record_acceptance(9, ok, "coverage " + ", ".join(f"{k} {v:.3f}" for k, v in cov.items())
                      + " (in [0.90, 0.99])")
    assert ok


def test_criterion_10_pathology():
    t0 = time.perf_counter()
    m = LevyModel.gamma_plus_poisson(0.4, 1.0, 1.0)
    hs = (0.1, 0.05, 0.025)
    rows = [np.diag(oracle_covariance(m, EstimateConfig(), [1.0, 1.5], 10**5, h,
                                      seed=_oracle_seed(MASTER_SEED)).sigma) for h in hs]
    at1 = [r[0] for r in rows]
    at15 = [r[1] for r in rows]
    increasing = at1[0] < at1[1] < at1[2]
    change = max(abs(at15[i + 1] / at15[i] - 1) for i in range(2))
    ratio = at1[-1] / at15[-1]
    ok = verdict(10, [increasing, change < 0.10, ratio > 3],
                 f"Sigma(1) {', '.join(f'{v:.3f}' for v in at1)} increasing={increasing}; "
                 f"Sigma(1.5) {', '.join(f'{v:.3f}' for v in at15)} max step change {change:.1%} "
                 f"(<10%); ratio at h=0.025 {ratio:.2f} (>3)", time.perf_counter() - t0, 300)
    assert ok


def test_criterion_11_assumption_gate():
    t0 = time.perf_counter()
    g4 = check_assumptions(LevyModel.gamma_process(0.4), 1.0)
    cp = check_assumptions(LevyModel.compound_poisson(1.0), 1.0)
    g6 = check_assumptions(LevyModel.gamma_process(0.6), 1.0)
    p4 = g4.pass_a and g4.pass_b and g4.pass_c
    pcp = cp.pass_a and cp.pass_b and cp.pass_c
    f6 = not g6.pass_c
    ok = verdict(11, [p4, pcp, f6], f"gamma 0.4 passes={p4}, cp passes={pcp}, gamma 0.6 fails={f6}",
                 time.perf_counter() - t0, 60)
    assert ok
