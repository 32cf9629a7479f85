import numpy as np
import pytest

from multistep_mle.errors import ConfigError, SimulationDivergedError
from multistep_mle.models import DiffusionModel, ParameterSpace
from multistep_mle.simulate import (
    SamplePath,
    euler_maruyama,
    n_steps_for,
    simulate_paths,
    stationary_draw,
    stationary_draws,
)
from multistep_mle.stationary import build_density


def test_drift_only_step_ou(ou):
    p = euler_maruyama(ou, [1.0], 2.0, 0.01, 0.01, seed=0, noise=np.zeros(1))
    assert p.values[1] == 2.0 - 2.0 * 0.01


def test_equilibrium_quartic(quartic):
    p = euler_maruyama(quartic, [0.0], 0.0, 0.01, 0.01, seed=0, noise=np.zeros(1))
    assert p.values[1] == 0.0


def test_ou_path_moments_and_autocorrelation(ou):
    p = euler_maruyama(ou, [1.0], 0.0, 1000.0, 0.01, seed=5)
    assert -0.1 < p.values.mean() < 0.1
    assert p.values.var() == pytest.approx(0.5, rel=0.15)
    x = p.values - p.values.mean()
    lag1 = np.dot(x[:-1], x[1:]) / np.dot(x, x)
    assert lag1 == pytest.approx(np.exp(-0.01), rel=0.02)


def test_reproducible(quartic):
    a = euler_maruyama(quartic, [1.0], 0.5, 50.0, 0.01, seed=42)
    b = euler_maruyama(quartic, [1.0], 0.5, 50.0, 0.01, seed=42)
    c = euler_maruyama(quartic, [1.0], 0.5, 50.0, 0.01, seed=43)
    assert a == b
    assert not np.array_equal(a.values, c.values)


def test_batch_membership_does_not_change_paths(quartic):
    table = build_density(quartic, [1.0])
    full = simulate_paths(quartic, [1.0], 20.0, 0.01, 9, range(6), table=table)
    part = simulate_paths(quartic, [1.0], 20.0, 0.01, 9, [4, 1], table=table)
    np.testing.assert_array_equal(full.values[4], part.values[0])
    np.testing.assert_array_equal(full.values[1], part.values[1])


def test_stationary_draws_quartic(quartic):
    table = build_density(quartic, [0.0])
    x = stationary_draws(table, 17, 10_000)
    assert -0.05 < x.mean() < 0.05
    # E y^4 = 1/2 for the unit quartic law
    assert np.mean(x ** 4) == pytest.approx(0.5, rel=0.10)


def test_stationary_draws_ou(ou):
    x = stationary_draws(build_density(ou, [1.0]), 3, 10_000)
    assert x.var() == pytest.approx(0.5, rel=0.10)


def test_stationary_draw_deterministic(quartic):
    assert stationary_draw(quartic, [1.0], 11) == stationary_draw(quartic, [1.0], 11)


def test_occupation_measure_matches_density(quartic):
    table = build_density(quartic, [1.0])
    path = simulate_paths(quartic, [1.0], 2000.0, 0.01, 8, [0], table=table).path(0)
    edges = table.quantile(np.linspace(0, 1, 51))
    edges[0], edges[-1] = -np.inf, np.inf
    counts, _ = np.histogram(path.values, bins=edges)
    tv = 0.5 * np.abs(counts / counts.sum() - 1 / 50).sum()
    assert tv < 0.05


def test_burn_in_start(quartic):
    batch = simulate_paths(quartic, [1.0], 10.0, 0.01, 1, [0, 1], init="burn_in", init_range=(0.0, 2.0))
    assert np.all(np.isfinite(batch.values))
    assert batch.values[0, 0] != 1.0


def test_noise_free_burn_in_stays_at_midpoint(quartic):
    batch = simulate_paths(quartic, [1.0], 10.0, 0.01, 1, [0], init="burn_in",
                           init_range=(0.0, 2.0), noise_free=True)
    assert np.all(batch.values == 1.0)


def test_divergence_reports_step():
    model = DiffusionModel(
        name="explosive", dim_param=1,
        drift=lambda th, x: th[0] * x * x * x,
        drift_grad=lambda th, x: (x * x * x)[..., None],
        drift_hess=lambda th, x: np.zeros(np.shape(x) + (1, 1)),
        drift_grad_dx=lambda th, x: (3 * x * x)[..., None],
        sigma=lambda x: np.ones_like(x),
        sigma_dx=lambda x: np.zeros_like(x),
        theta_space=ParameterSpace((0.5,), (2.0,)),
    )
    with pytest.raises(SimulationDivergedError) as info:
        euler_maruyama(model, [1.0], 3.0, 10.0, 0.1, seed=0, noise=np.zeros(100))
    assert 0 < info.value.step < 100


def test_n_steps_for():
    assert n_steps_for(1000.0, 0.01) == 100_000
    with pytest.raises(ConfigError):
        n_steps_for(1.0, 0.3)
    with pytest.raises(ConfigError):
        n_steps_for(0.001, 0.01)
    with pytest.raises(ConfigError):
        n_steps_for(1.0, 0.0)


def test_horizon_matches_grid(quartic):
    p = euler_maruyama(quartic, [1.0], 0.0, 12.5, 0.05, seed=1)
    assert p.n_steps == 250 and p.values.size == 251
    assert p.T == pytest.approx(12.5, rel=1e-12)


def test_csv_round_trip_bit_exact(quartic, tmp_path):
    p = euler_maruyama(quartic, [1.0], 0.3, 5.0, 0.01, seed=3)
    q = SamplePath.from_csv(p.to_csv(tmp_path / "p.csv"))
    assert q == p
    assert SamplePath.from_csv(tmp_path / "p.csv") == p


def test_binary_round_trip_bit_exact(quartic, tmp_path):
    p = euler_maruyama(quartic, [1.0], 0.3, 5.0, 0.01, seed=2 ** 63 + 5)
    p.write_binary(tmp_path / "p.bin")
    assert SamplePath.read_binary(tmp_path / "p.bin") == p
    bare = SamplePath(h=0.5, values=[1.0, 2.0, -3.0])
    assert SamplePath.from_bytes(bare.to_bytes()) == bare


def test_sample_path_validation():
    with pytest.raises(ValueError):
        SamplePath(h=0.1, values=[1.0, np.nan])
    with pytest.raises(ValueError):
        SamplePath(h=0.0, values=[1.0, 2.0])
    with pytest.raises(ValueError):
        SamplePath(h=0.1, values=[1.0])
