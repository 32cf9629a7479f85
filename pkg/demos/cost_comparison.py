"""Wall-clock cost of a 100-point estimator trajectory versus per-tau MLE.

The one-step process reuses one Fisher matrix and a cumulative score sum, so
the whole trajectory costs about one likelihood pass.  Recomputing the MLE at
each tau costs a grid search plus Newton iterations per point.
"""

from multistep_mle import estimate as est
from multistep_mle.models import get_model
from multistep_mle.montecarlo import trajectory_cost_ratio
from multistep_mle.simulate import simulate_paths

model = get_model("quartic", [0.0], [2.0])
path = simulate_paths(model, [1.0], 1000.0, 0.01, 7, [0]).path(0)
grid = est.default_tau_grid(path.T, 0.75)
rep = trajectory_cost_ratio(model, path, 0.75, grid, repeats=3)
print(f"tau points:          {len(grid)}")
print(f"one-step trajectory: {rep['one_step_seconds'] * 1e3:.1f} ms")
print(f"per-tau MLE:         {rep['reference_seconds']:.2f} s")
print(f"ratio:               {rep['ratio']:.4f}")
