import json

import numpy as np
import pytest

from multistep_mle.errors import ConfigError, ExperimentFailedError, SimulationDivergedError
from multistep_mle.models import get_model
from multistep_mle.montecarlo import (
    ExperimentConfig,
    efficiency_report,
    run_experiment,
    wiener_increment_check,
)
from multistep_mle.simulate import euler_maruyama


def small(**kw):
    base = dict(model_id="quartic", theta_true=[1.0], T=50.0, h=0.01, delta=0.75,
                tau_grid=[0.5, 0.75, 1.0], replicates=12, seed=77, batch_size=5)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        small(T=5.0)
    with pytest.raises(ConfigError):
        small(h=0.2)
    with pytest.raises(ConfigError):
        small(replicates=0)
    with pytest.raises(ConfigError):
        small(delta=0.4)
    with pytest.raises(ConfigError):
        small(method="two_step", delta=0.75)
    with pytest.raises(ConfigError):
        small(theta_true=[3.0])
    with pytest.raises(ConfigError):
        small(tau_grid=[])
    with pytest.raises(ConfigError):
        small(method="magic")


def test_noise_free_injection_gives_zero_error():
    quartic = get_model("quartic")

    def source(cfg, i):
        return euler_maruyama(quartic, cfg.theta_true, 1.0, cfg.T, cfg.h, seed=i, noise=np.zeros(5000))

    stats = run_experiment(small(replicates=1, path_source=source))
    assert np.all(stats.errors == 0.0)
    assert stats.n_ok == 1 and stats.n_failed == 0


def test_deterministic_and_batch_invariant():
    a = run_experiment(small())
    b = run_experiment(small())
    c = run_experiment(small(batch_size=12))
    d = run_experiment(small(batch_size=1))
    def dump(stats):
        out = stats.to_dict(include_timing=False, include_replicates=True)
        out["config"].pop("batch_size")
        return json.dumps(out)

    assert dump(a) == dump(b) == dump(c) == dump(d)


def test_worker_count_does_not_change_results():
    a = run_experiment(small())
    b = run_experiment(small(workers=2))
    np.testing.assert_array_equal(a.estimates, b.estimates)
    np.testing.assert_array_equal(a.errors, b.errors)


def test_stats_shapes_and_symmetry():
    stats = run_experiment(small(model_id="quartic2d", theta_true=[0.0, 1.0], replicates=8))
    assert stats.errors.shape == (8, 3, 2)
    assert stats.cov.shape == (3, 2, 2)
    np.testing.assert_allclose(stats.cov, np.swapaxes(stats.cov, 1, 2))
    assert stats.n_ok + stats.n_failed == 8
    assert "var_ratio" in stats.summary_line()


def test_standardization_uses_true_fisher():
    stats = run_experiment(small())
    scaled = np.sqrt(np.array([0.5, 0.75, 1.0]) * 50.0)[None, :, None] * (stats.estimates - 1.0)
    np.testing.assert_allclose(stats.errors, scaled * np.sqrt(4.5), rtol=1e-12)


def test_estimate_standardization_mode():
    stats = run_experiment(small(standardize="estimate"))
    assert np.all(np.isfinite(stats.errors))


def _failing_source(bad):
    quartic = get_model("quartic")

    def source(cfg, i):
        if i in bad:
            raise SimulationDivergedError(10)
        return euler_maruyama(quartic, cfg.theta_true, 1.0, cfg.T, cfg.h, seed=i)

    return source


def test_failures_recorded_below_threshold():
    stats = run_experiment(small(replicates=40, path_source=_failing_source({3, 17})))
    assert stats.n_failed == 2 and stats.n_ok == 38
    assert [f["replicate"] for f in stats.failures] == [3, 17]


def test_failures_above_threshold_raise():
    with pytest.raises(ExperimentFailedError) as info:
        run_experiment(small(replicates=20, path_source=_failing_source({1, 2})))
    assert info.value.stats.n_failed == 2


def test_wiener_check_validation():
    stats = run_experiment(small(replicates=100, T=20.0, tau_grid=[0.5, 0.6, 0.8, 1.0], batch_size=100))
    with pytest.raises(ConfigError):
        wiener_increment_check(stats, [(0.6, 0.6)])
    with pytest.raises(ConfigError):
        wiener_increment_check(stats, [(0.5, 0.8), (0.6, 1.0)])
    with pytest.raises(ConfigError):
        wiener_increment_check(stats, [(0.55, 0.8)])
    rep = wiener_increment_check(stats, [(0.5, 0.6), (0.8, 1.0)])
    assert rep["correlation"].shape == (2, 2)
    assert rep["variance_ratio"].shape == (2,)
    few = run_experiment(small(replicates=20))
    with pytest.raises(ConfigError):
        wiener_increment_check(few, [(0.5, 0.75)])


def test_sup_error_and_clamp_rate():
    stats = run_experiment(small())
    sup = stats.sup_error(tau_min=0.6)
    assert sup.shape == (12,)
    np.testing.assert_allclose(sup, np.abs(stats.estimates[:, 1:, 0] - 1.0).max(axis=1))
    assert 0.0 <= stats.clamp_rate <= 1.0


def test_efficiency_report_validation():
    with pytest.raises(ConfigError):
        efficiency_report([small()])
    with pytest.raises(ConfigError):
        efficiency_report([small(), small(T=60.0)])


def test_efficiency_report_contents():
    one = small(tau_grid=[1.0], replicates=10)
    ref = one.replace(method="reference_mle", grid_points=21)
    report = efficiency_report([one, ref])
    assert {r["method"] for r in report["rows"]} == {"one_step", "reference_mle"}
    assert report["cost_ratio"] > 0


@pytest.mark.xfail(strict=True, reason="finite-T preliminary excess: one-step second moment "
                   "is ~1.24x the MLE's at T=1000 (same mechanism as the one-step variance gate)")
def test_one_step_and_mle_second_moments_agree():
    # Both are efficient, so at large T their standardized second moments coincide.
    # At T = 1000 the one-step process still carries the preliminary's tau_delta share.
    one = ExperimentConfig("quartic", [1.0], 1000.0, 0.01, 0.75, tau_grid=[1.0], replicates=100, seed=5)
    ref = one.replace(method="reference_mle")
    report = efficiency_report([one, ref])
    m1, m2 = (r["second_moment_final"][0] for r in report["rows"])
    assert report["cost_ratio"] < 1.0
    assert abs(m1 - m2) / m2 < 0.15
