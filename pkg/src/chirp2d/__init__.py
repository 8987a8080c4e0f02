"""Parameter estimation for one- and multi-component 2-D chirp signals.

The estimators reduce the 4-D least-squares problem of each component to two
2-D searches: one over the columns of the data matrix for the (frequency,
frequency rate) pair in ``m`` and one over the rows for the pair in ``n``.
"""

from .model import (
    ChirpComponent,
    ModelSpec,
    NoiseSpec,
    add_noise,
    phase,
    single_chirp,
    synthesize,
    texture_chirps,
    two_chirps,
)
from .criterion import (
    DegenerateBasis,
    NonlinearPair,
    basis,
    column_amplitudes,
    periodogram_cols,
    periodogram_rows,
    projection_residual,
    reduced_criterion_cols,
    reduced_criterion_rows,
)
from .optimizer import (
    AllInvalid,
    GridPlan,
    OptimumReport,
    RefineSettings,
    coarse_grid_search,
    refine,
    solve_pair,
)
from .estimator import (
    AsymptoticCovariance,
    ComponentEstimate,
    EstimatorConfig,
    FitResult,
    ZeroPower,
    asymptotic_covariance,
    detect_order,
    estimate_linear,
    estimate_one,
    sequential_estimate,
    sigma2_hat,
)

__version__ = "0.1.0"
