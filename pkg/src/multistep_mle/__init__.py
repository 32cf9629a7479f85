"""Multi-step MLE estimator-processes for ergodic diffusions.

The public surface re-exports the pieces most callers need: the built-in
models, path simulation, the invariant-density and Fisher quadrature, and
the one-step and two-step estimator-processes.
"""

from .errors import (
    ConfigError,
    DegenerateInformationError,
    DegeneratePreliminaryError,
    ErgodicityError,
    ExperimentFailedError,
    InsufficientDataError,
    MultistepMLEError,
    NumericalError,
    QuadratureError,
    SimulationDivergedError,
    WindowError,
)
from .models import (
    DiffusionModel,
    ParameterSpace,
    get_model,
    ou_model,
    quartic2d_model,
    quartic_model,
)
from .simulate import SamplePath, euler_maruyama, simulate_paths, stationary_draw
from .stationary import (
    DensityTable,
    FisherMatrix,
    build_density,
    density_moment,
    empirical_fisher,
    fisher_quadrature,
    mde_limit_variance_quartic,
)
from .estimate import (
    EstimatorTrajectory,
    ScoreSample,
    default_tau_grid,
    one_step_process,
    reference_mle,
    score_delta,
    score_delta_mixed,
    score_delta_pathwise,
    second_preliminary,
    two_step_process,
)

__version__ = "0.1.0"
