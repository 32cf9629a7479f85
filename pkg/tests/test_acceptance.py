"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run ``python3 tests/test_acceptance.py`` for the report alone, or through
pytest (the lines are repeated in the terminal summary).  Tolerances are the
stated ones; the Fisher targets come from the quadrature oracle, I = 4.5 for
the quartic model (see ``test_stationary`` for the independent Gamma-function
and Stein-identity checks of that value).
"""

from __future__ import annotations

import sys
import time
from functools import lru_cache

import numpy as np
import pytest

from multistep_mle import estimate as est
from multistep_mle.models import get_model
from multistep_mle.montecarlo import (
    ExperimentConfig,
    run_experiment,
    trajectory_cost_ratio,
    wiener_increment_check,
)
from multistep_mle.simulate import SamplePath, simulate_paths
from multistep_mle.stationary import (
    build_density,
    empirical_fisher,
    fisher_quadrature,
    mde_limit_variance_quartic,
)

REPORT: list[str] = []
QUARTIC_I = 4.5
TAUS = [0.25, 0.5, 0.75, 1.0]
SEED = 20240611


def record(name: str, passed: bool, detail: str) -> bool:
    line = f"{name:<4} {'PASS' if passed else 'FAIL'}  {detail}"
    REPORT.append(line)
    print(line)
    return passed


@lru_cache(maxsize=None)
def one_step_quartic():
    cfg = ExperimentConfig("quartic", [1.0], 1000.0, 0.01, 0.75, tau_grid=TAUS,
                           replicates=300, seed=SEED, lower=[0.0], upper=[2.0])
    return run_experiment(cfg)


@lru_cache(maxsize=None)
def two_step_quartic():
    cfg = ExperimentConfig("quartic", [1.0], 1000.0, 0.01, 0.375, method="two_step",
                           tau_grid=TAUS, replicates=300, seed=SEED, lower=[0.0], upper=[2.0])
    return run_experiment(cfg)


def c1_fisher_oracle():
    t0 = time.perf_counter()
    q = get_model("quartic", [0.0], [2.0])
    vals = np.array([fisher_quadrature(q, [th]).mat[0, 0] for th in (0.2, 0.7, 1.0, 1.5, 1.9)])
    ou = fisher_quadrature(get_model("ou"), [1.0]).mat[0, 0]
    elapsed = time.perf_counter() - t0
    ok = (
        np.all(np.abs(vals - QUARTIC_I) < 1e-6)
        and np.ptp(vals) < 1e-8
        and abs(ou - 0.5) < 1e-8
        and elapsed < 1.0
    )
    return record("C1", ok, f"I_quartic={vals[2]:.10f} (oracle 4.5) spread={np.ptp(vals):.1e} "
                            f"I_ou={ou:.12f} time={elapsed:.2f}s")


def c2_one_step():
    s = one_step_quartic()
    var = s.scaled_cov[-1, 0, 0]
    mean = s.mean[-1, 0]
    target = 1.0 / QUARTIC_I
    ok = 0.8 * target <= var <= 1.2 * target and abs(mean) < 0.15
    return record("C2", ok, f"Var(sqrt(T)(theta*_1-theta0))={var:.4f} target [{0.8*target:.4f}, "
                            f"{1.2*target:.4f}] ratio={var/target:.3f} mean_std={mean:+.3f}")


def c3_two_step():
    s2 = two_step_quartic()
    s1 = one_step_quartic()
    var2 = s2.scaled_cov[-1, 0, 0]
    var1 = s1.scaled_cov[-1, 0, 0]
    target = 1.0 / QUARTIC_I
    rel = abs(var2 - var1) / var1
    ok = 0.8 * target <= var2 <= 1.2 * target and rel < 0.15 and abs(s2.mean[-1, 0]) < 0.15
    return record("C3", ok, f"two-step var={var2:.4f} ratio={var2/target:.3f} "
                            f"mean_std={s2.mean[-1, 0]:+.3f} one/two rel diff={rel:.3f}")


def c4_wiener():
    rep = wiener_increment_check(one_step_quartic(), [(0.25, 0.5), (0.75, 1.0)])
    rho = rep["correlation"][0, 1]
    vr = rep["variance_ratio"]
    return record("C4", rep["passed"], f"corr={rho:+.3f} var_ratio=[{vr[0]:.3f}, {vr[1]:.3f}]")


def c5_consistency():
    parts = []
    ok = True
    for model_id, theta in (("quartic", 1.0), ("ou", 1.0)):
        meds = []
        for T in (500.0, 2000.0):
            cfg = ExperimentConfig(model_id, [theta], T, 0.01, 0.75, replicates=200, seed=SEED)
            meds.append(float(np.median(run_experiment(cfg).sup_error(tau_min=0.1))))
        ok &= meds[1] < meds[0]
        parts.append(f"{model_id}: {meds[0]:.4f} -> {meds[1]:.4f}")
    return record("C5", ok, "median sup error T=500 -> 2000; " + "; ".join(parts))


def score_gap_rms(n_paths=50, T=200.0, h_fine=0.0025, delta=0.75, seed=SEED):
    """RMS over fixed paths of |pathwise score - Ito score| at h, 2h, 4h."""
    q = get_model("quartic", [0.0], [2.0])
    theta = np.array([1.0])
    batch = simulate_paths(q, theta, T, h_fine, seed, range(n_paths))
    gaps = {0.01: [], 0.005: [], 0.0025: []}
    for row in range(n_paths):
        fine = batch.values[row]
        for h, stride in ((0.0025, 1), (0.005, 2), (0.01, 4)):
            p = SamplePath(h=h, values=fine[::stride])
            d = est.score_delta(q, theta, p, delta, 1.0).value[0]
            dp = est.score_delta_pathwise(q, theta, p, delta, 1.0).value[0]
            gaps[h].append(abs(dp - d))
    return {h: float(np.sqrt(np.mean(np.square(v)))) for h, v in gaps.items()}


def c6_score_equivalence():
    rms = score_gap_rms()
    r1 = rms[0.01] / rms[0.005]
    r2 = rms[0.005] / rms[0.0025]
    ok = 1.5 <= r1 <= 3.0 and 1.5 <= r2 <= 3.0
    return record("C6", ok, f"RMS|D-D0| h=.01/.005/.0025: {rms[0.01]:.4f}/{rms[0.005]:.4f}/"
                            f"{rms[0.0025]:.4f}; contraction {r1:.3f}, {r2:.3f} (need [1.5, 3])")


def c7_ou_mle():
    ou = get_model("ou")
    theta0 = np.array([1.0])
    batch = simulate_paths(ou, theta0, 1000.0, 0.01, SEED, range(300))
    exact_gap = 0.0
    gaps = []
    for row in range(300):
        p = batch.path(row)
        closed = est.ou_mle_closed_form(p)
        if row < 20:
            exact_gap = max(exact_gap, abs(est.reference_mle(ou, p)[0] - closed))
        one = est.one_step_process(ou, p, 0.75, [1.0]).estimates[-1, 0]
        gaps.append(abs(one - closed))
    mean_gap = float(np.mean(gaps))
    ok = exact_gap < 1e-8 and mean_gap < 0.02
    return record("C7", ok, f"max |grid+Newton - closed form|={exact_gap:.1e} (20 paths); "
                            f"mean |one-step - MLE|={mean_gap:.4f} (M=300)")


def c8_empirical_fisher():
    parts = []
    ok = True
    for model_id in ("quartic", "ou"):
        model = get_model(model_id)
        theta = np.array([1.0])
        exact = fisher_quadrature(model, theta).mat[0, 0]
        batch = simulate_paths(model, theta, 1000.0, 0.01, SEED, range(100))
        vals = [empirical_fisher(model, theta, batch.path(r), 0.0, 1000.0).mat[0, 0] for r in range(100)]
        rel = abs(np.mean(vals) - exact) / exact
        ok &= rel < 0.05
        parts.append(f"{model_id}: mean {np.mean(vals):.4f} vs {exact:.4f} ({rel:.2%})")
    return record("C8", ok, "; ".join(parts))


def c9_cost():
    q = get_model("quartic", [0.0], [2.0])
    p = simulate_paths(q, [1.0], 1000.0, 0.01, SEED, [0]).path(0)
    grid = est.default_tau_grid(p.T, 0.75)
    rep = trajectory_cost_ratio(q, p, 0.75, grid, repeats=3)
    ok = rep["ratio"] < 0.05
    return record("C9", ok, f"one-step {rep['one_step_seconds']*1e3:.1f} ms vs per-tau MLE "
                            f"{rep['reference_seconds']:.2f} s on 100 taus: ratio {rep['ratio']:.4f}")


def c10_preliminary_clt():
    q = get_model("quartic", [0.0], [2.0])
    d2 = mde_limit_variance_quartic(build_density(q, [1.0]))
    cfg = ExperimentConfig("quartic", [1.0], 2000.0, 0.01, 0.75, method="preliminary",
                           replicates=500, seed=SEED, lower=[0.0], upper=[2.0])
    s = run_experiment(cfg)
    var = s.scaled_cov[0, 0, 0]
    rel = abs(var - d2) / d2
    return record("C10", rel < 0.2, f"Var(T^(delta/2)(theta_bar-theta0))={var:.4f} vs D2={d2:.4f} "
                                    f"(rel {rel:.2%}, need < 20%)")


CRITERIA = [
    c1_fisher_oracle, c2_one_step, c3_two_step, c4_wiener, c5_consistency,
    c6_score_equivalence, c7_ou_mle, c8_empirical_fisher, c9_cost, c10_preliminary_clt,
]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"C{i + 1}" for i in range(len(CRITERIA))])
def test_criterion(criterion):
    assert criterion()


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria pass")
    sys.exit(0 if all(results) else 1)
