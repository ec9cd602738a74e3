"""Trimmed conformal prediction for regression.

Distribution-free prediction intervals built in two passes: a fast trimming
step narrows the candidate response range, then full conformal prediction
with the lasso runs over the trimmed range, reusing one fit per
signed-support region of candidate values.
"""

from .conformal import (
    CandidateGrid,
    FitterError,
    PredictionSet,
    SplitInterval,
    conformity_accept,
    full_conformal,
    quantile_index,
    split_conformal,
    split_half,
)
from .data import (
    StationDayMatrix,
    SyntheticSpec,
    default_lambda,
    gen_synthetic,
    ingest_trips,
    make_regression_task,
)
from .harness import (
    ExcessiveFailures,
    ExperimentConfig,
    ExperimentMetrics,
    run_bikeshare,
    run_experiment,
)
from .regions import (
    RankError,
    SupportRegion,
    build_constraints,
    region_bounds,
    region_scan,
    residual_linearization,
)
from .solvers import (
    ConvergenceError,
    Dataset,
    LassoFit,
    RidgeFit,
    kkt_check,
    lasso_fit,
    make_lasso_fitter,
    make_ridge_fitter,
    ridge_fit,
    zero_fitter,
)
from .tcp import TcpConfig, TcpResult, coverage_bound, minimal_alpha_trim, tcp_predict
from .trimming import (
    RidgeTrimWork,
    TrimSet,
    max_trim,
    ridge_trim,
    ridge_trim_work,
    split_lasso_trim,
)

__version__ = "0.1.0"
