"""Estimating higher-order lp distances with normal random projections."""

from .cubic import CubicInputs, solve_margin_cubic, solve_margin_cubic_batch
from .estimators import (
    DEFAULT_TAU,
    ESTIMATOR_IDS,
    Estimate,
    PairStats,
    complexity_ratio,
    delta_1p,
    delta_identity,
    est_1p,
    est_1p_identity,
    est_1p_margin,
    est_3p,
    est_3p_margin,
    est_d6_1p,
    est_exact,
    est_sampling,
    holder_chain,
    one_matrix_condition,
    select_estimator,
    var_1p,
    var_1p_identity,
    var_3p,
    var_3p_margin_asymptotic,
    var_crs_predictor,
    var_sampling,
)
from .io import DatasetError, load_dataset
from .knn import DistanceSource, KnnResult, LabeledDataset, knn_classify, knn_repeat, p_sweep
from .moments import (
    DataVector,
    MomentTable,
    beta4,
    compute_moments,
    exact_lp,
    gaussian_quartic_expectation,
)
from .projector import (
    ProjectionSpec,
    Scheme,
    Sketch,
    load_sketches,
    matrix_entry,
    save_sketches,
    sketch_many,
    sketch_vector,
)
from .simlab import ExperimentSpec, GaussianSketchLaw, MseRow, generate_pair, run_mse

__version__ = "0.1.0"
