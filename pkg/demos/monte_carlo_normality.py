"""Monte Carlo check of the one-step process at several horizons.

Reports the variance of sqrt(tau T)(estimate - theta) times the Fisher
information at tau = 1; the ratio approaches 1 as T grows, with the finite-T
excess coming from the preliminary estimator's share of the learning window.

    python3 demos/monte_carlo_normality.py [replicates]
"""

import sys

from multistep_mle.montecarlo import ExperimentConfig, run_experiment

M = int(sys.argv[1]) if len(sys.argv) > 1 else 200
for T in (250.0, 1000.0, 4000.0):
    cfg = ExperimentConfig("quartic", [1.0], T, 0.01, 0.75, tau_grid=[0.5, 1.0], replicates=M,
                           seed=2024, lower=[0.0], upper=[2.0])
    stats = run_experiment(cfg)
    print(f"T={T:6.0f}: {stats.summary_line()}")
