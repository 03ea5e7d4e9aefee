"""Acceptance checks. Each test prints one PASS/FAIL line, then asserts.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are written
straight to the terminal, bypassing capture). Criteria 3 and 7 run real
benchmark grids and take several minutes each.
"""
import time

import mpmath as mp
import numpy as np
import pytest
from scipy.stats import norm

from cmes import acquisition as acq
from cmes import gp
from cmes.bias import bias_study
from cmes.constraint import feasibility_stats, local_laplace
from cmes.experiments import toy2d_head_to_head, ystar_ablation
from cmes.gp import KernelParams
from cmes.numerics import hazard, log_phi
from cmes.ranking import rank_cell
from oracles import (binary_entropy_diff, marginal_y_entropy_diff, marginal_zc_entropy_diff,
                     real_entropy_diff)


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail, seconds):
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        with capsys.disabled():
            print(f"\nCRITERION {number}: {status} ({seconds:.1f}s) {detail}")
    return emit


# ------------------------------------------------------------------ 1

def _criterion1_cases():
    grid = [-3.0, -1.0, 0.0, 1.0, 3.0]
    cases = [(gy, gc, 1.0, 0.0) for gy in grid for gc in grid]   # (gamma_y, gamma_c, sd_c, delta)
    rng = np.random.default_rng(2024)
    for _ in range(20):
        mu_y, mu_c, delta = rng.normal(0, 2, size=3)
        s_y, s_c = np.exp(rng.uniform(-1, 1, size=2))
        ystar = mu_y + rng.normal(0, 1.5) * s_y
        cases.append(((ystar - mu_y) / s_y, (delta - mu_c) / s_c, s_c, delta))
    return cases


def test_criterion_1_closed_forms_match_quadrature(report):
    t0 = time.time()
    worst = {"real": 0.0, "binary": 0.0, "marginal_y": 0.0, "marginal_zc": 0.0}
    for gy, gc, s_c, delta in _criterion1_cases():
        lzy = log_phi(gy)
        got = acq.entropy_diff_real(acq.StandardizedInputs.from_gammas(gy, gc))
        worst["real"] = max(worst["real"], abs(got - real_entropy_diff(gy, gc)))
        got = acq.entropy_diff_marginal_y(gy, lzy, log_phi(gc))
        worst["marginal_y"] = max(worst["marginal_y"], abs(got - marginal_y_entropy_diff(gy, norm.cdf(gc))))
        # binary inputs: latent constraint belief N(mu, s^2) whose threshold sits gc sd above the mean
        mu = delta - gc * s_c
        local = local_laplace(np.array([mu]), np.array([s_c ** 2]))
        fs = feasibility_stats(local, delta)
        q, F = local.q[0], np.exp(fs.log_F[0])
        got = float(np.squeeze(acq.entropy_diff_binary(gy, lzy, local, fs)))
        worst["binary"] = max(worst["binary"], abs(got - binary_entropy_diff(gy, q, F)))
        got = float(np.squeeze(acq.entropy_diff_marginal_zc(lzy, local, fs)))
        worst["marginal_zc"] = max(worst["marginal_zc"], abs(got - marginal_zc_entropy_diff(norm.cdf(gy), q, F)))
    dt = time.time() - t0
    ok = max(worst.values()) <= 1e-6 and dt < 60
    report(1, ok, "max |closed form - oracle|: " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items()), dt)
    assert ok


# ------------------------------------------------------------------ 2

def test_criterion_2_mean_field_bias(report):
    t0 = time.time()
    r = bias_study([200, 2000], n_draws=5000, seed=0)
    dt = time.time() - t0
    ok = (r.marginal[2000].mean < r.marginal[200].mean and r.divergence_p < 0.01
          and r.joint_shift_fraction < 0.1 and dt < 120)
    report(2, ok, f"marginal mean {r.marginal[200].mean:.4f} -> {r.marginal[2000].mean:.4f} "
                  f"(p={r.divergence_p:.2g}); joint shift {100 * r.joint_shift_fraction:.1f}% of "
                  f"range {r.posterior_range:.3f}", dt)
    assert ok


# ------------------------------------------------------------------ 3

@pytest.fixture(scope="module")
def head_to_head(tmp_path_factory):
    t0 = time.time()
    res = toy2d_head_to_head(tmp_path_factory.mktemp("toy2d"), seeds=20, budget=50)
    return res, time.time() - t0


@pytest.mark.slow
def test_criterion_3_toy2d_head_to_head(report, head_to_head):
    res, dt = head_to_head
    m = res.medians
    ok = (m["cmes"] <= m["cei"] and m["cmes"] < m["random"] and m["cei"] < m["random"]
          and res.p_cmes_vs_random < 0.05 and dt < 900)
    report(3, ok, f"median final best: cmes={m['cmes']:.4f} cei={m['cei']:.4f} random={m['random']:.4f}; "
                  f"rank test cmes<random p={res.p_cmes_vs_random:.3g}", dt)
    assert ok


@pytest.mark.slow
def test_cmes_ends_in_a_feasible_basin(head_to_head):
    res, _ = head_to_head
    finals = res.final_best["cmes"]
    assert sum(v is not None and v <= 0.95 for v in finals) >= 0.95 * len(finals)


# ------------------------------------------------------------------ 4

def test_criterion_4_rank_protocol(report):
    t0 = time.time()
    r = rank_cell({f"s{i}": (float(i) if i < 5 else None) for i in range(10)})
    exact = all(r[f"s{i}"] == 8.0 for i in range(5, 10)) and [r[f"s{i}"] for i in range(5)] == [1, 2, 3, 4, 5]
    rng = np.random.default_rng(0)
    sums_ok = True
    for _ in range(1000):
        n = int(rng.integers(1, 15))
        vals = {i: (None if rng.uniform() < 0.3 else float(rng.integers(0, 5))) for i in range(n)}
        sums_ok &= sum(rank_cell(vals).values()) == n * (n + 1) / 2
    dt = time.time() - t0
    ok = exact and sums_ok and dt < 5
    report(4, ok, f"worked example exact={exact}; rank-sum invariant on 1000 cells={sums_ok}", dt)
    assert ok


# ------------------------------------------------------------------ 5

def test_criterion_5_gp_correctness(report):
    t0 = time.time()
    rng = np.random.default_rng(5)
    X = rng.uniform(size=(10, 2))
    z = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
    params = KernelParams(np.array([0.3, 0.5]), 1.3, 100.0)
    Xs = rng.uniform(size=(6, 2))
    K = gp.kernel_matrix(X, X, params) + np.eye(10) / params.noise_precision
    Ks = gp.kernel_matrix(Xs, X, params)
    dense_cov = gp.kernel_matrix(Xs, Xs, params) - Ks @ np.linalg.solve(K, Ks.T)
    belief = gp.predict_joint(gp.fit_posterior(X, z, params), Xs)
    cov_err = float(np.max(np.abs(belief.covariance - dense_cov)))

    b3 = gp.predict_joint(gp.fit_posterior(np.array([[0.0], [1.0]]), np.array([0.5, -0.3]),
                                           KernelParams(np.array([1.5]), 2.0, 50.0)),
                          np.array([[1.9], [2.0], [2.1]]))
    S = gp.sample_joint(b3, 50000, np.random.default_rng(1))
    mc_err = float(np.max(np.abs(np.cov(S) - b3.covariance) / np.abs(b3.covariance)))

    grad_err = 0.0
    for kind in ("matern52", "se"):
        p = KernelParams(params.lengthscales, params.amplitude, params.noise_precision, kind)
        _, g = gp.log_marginal_likelihood(X, z, p, return_grad=True)
        theta = p.to_log_vector()
        for j in range(len(theta)):
            tp, tm = theta.copy(), theta.copy()
            tp[j] += 1e-5
            tm[j] -= 1e-5
            fd = (gp.log_marginal_likelihood(X, z, KernelParams.from_log_vector(tp, kind))
                  - gp.log_marginal_likelihood(X, z, KernelParams.from_log_vector(tm, kind))) / 2e-5
            grad_err = max(grad_err, abs(g[j] - fd) / max(abs(fd), 1e-8))
    dt = time.time() - t0
    ok = cov_err <= 1e-8 and mc_err <= 0.05 and grad_err <= 1e-4 and dt < 60
    report(5, ok, f"cov vs dense {cov_err:.1e}; MC cov rel {mc_err:.3f}; evidence grad rel {grad_err:.1e}", dt)
    assert ok


# ------------------------------------------------------------------ 6

def test_criterion_6_scalar_numerics(report):
    t0 = time.time()
    mp.mp.dps = 50
    xs = np.linspace(-40, 10, 501)
    lp_err = max(abs(log_phi(x) - float(mp.log(mp.ncdf(x)))) / abs(float(mp.log(mp.ncdf(x)))) for x in xs)
    h_err = h64_err = 0.0
    for x in xs:
        exact = mp.npdf(x) / mp.ncdf(-x)
        ref = np.longdouble(mp.nstr(exact, 30))
        h_err = max(h_err, float(abs(hazard(x, dtype=np.longdouble) - ref) / ref))
        if exact > np.finfo(float).tiny:
            h64_err = max(h64_err, abs(hazard(x) - float(exact)) / float(exact))
    wide = np.linspace(-100, 100, 20001)
    finite = bool(np.all(np.isfinite(log_phi(wide))) and np.all(np.isfinite(hazard(wide))))
    dt = time.time() - t0
    ok = lp_err <= 1e-10 and h_err <= 1e-10 and h64_err <= 1e-10 and finite and dt < 5
    report(6, ok, f"log_phi rel {lp_err:.1e}; hazard rel {h_err:.1e} (long double), "
                  f"{h64_err:.1e} (float64 where normal); "
                  f"finite on |x|<=100: {finite}", dt)
    assert ok


# ------------------------------------------------------------------ 7

@pytest.mark.slow
def test_criterion_7_ystar_ablation(report, tmp_path):
    t0 = time.time()
    table = ystar_ablation(tmp_path, sizes=(2, 10, 40), seeds=3, budget=20)
    dt = time.time() - t0
    names = ["cmes_k10", "cmes_k2", "cmes_k40"]
    n_cells = len(table.cells)
    valid = (table.strategies == names and n_cells == 4 * 3 * 20
             and all(sum(c.values()) == 6.0 for c in table.cells.values())
             and all(lo <= table.mean_rank[s] <= hi for s, (lo, hi) in table.ci.items()))
    ok = valid and dt < 1800
    report(7, ok, "mean ranks " + ", ".join(f"{s}={table.mean_rank[s]:.3f}" for s in names)
                  + f" over {n_cells} cells", dt)
    assert ok


# ------------------------------------------------------------------ 8

def test_criterion_8_not_reproducible_at_desk_scale(report):
    report(8, "SKIP", "not reproduced: real-HPO rank tables and figures need external training "
                    "stacks; covered by criteria 3 and 7", 0.0)
    pytest.skip("requires external ML training workloads")
