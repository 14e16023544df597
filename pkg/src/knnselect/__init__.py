"""k-NN regression under fixed design with data-driven choice of the neighbor count.

The estimator averages each point's k nearest responses; the neighbor count
is picked either by scanning the empirical risk down to the noise level
(minimum discrepancy), by penalized-risk criteria (AIC, GCV), by resampling
(hold-out, V-fold CV), or by the oracle bias-variance crossing when the truth
is known. Experiment harnesses reproduce the companion simulations at desk
scale.
"""

__version__ = "0.1.0"

from .data import (
    ConstantColumnWarning,
    DataError,
    Dataset,
    SplitPlan,
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    min_max_rescale,
    smooth_f1,
    sinus_f2,
    split_train_test,
    subsample,
    subsample_size_grid,
)
from .estimator import FitSurface, OracleCurves, fit_all, oracle_curves, predict, predict_all
from .experiments import (
    ArtificialConfig,
    BenchmarkRow,
    ExperimentReport,
    RealDataConfig,
    ReplicationRecord,
    SummaryRow,
    benchmark_complexity,
    run_artificial,
    run_real,
)
from .neighbors import (
    NeighborTable,
    QueryNeighbors,
    build_query_neighbors,
    build_table,
    load_table,
    materialize_matrix,
    save_table,
)
from .riskcurve import (
    LambdaCurve,
    RiskCurve,
    empirical_risk,
    expected_empirical_risk,
    export_risk_csv,
    to_lambda,
)
from .selection import (
    GridCappedWarning,
    Rule,
    SelectionResult,
    StreamingRiskEvaluator,
    aic_select,
    estimate_noise_variance,
    gcv_select,
    holdout_select,
    lambda_mdp_select,
    mdp_select,
    oracle_bv_select,
    run_selector,
    vfold_select,
)
from .seeding import spawn
