"""Conformal prediction with corrupted labels and privileged information."""

from .calibration import (
    CalibratedThreshold, ErrorSampler, ScoreProfile, build_error_sampler, cp_threshold, naive_cp,
    naive_impute_calibrate, pcp_calibrate, signed_weighted_threshold, triply_robust, ui_calibrate,
    weighted_threshold, wcp_threshold,
)
from .data import (
    MISSING, UNKNOWN, CoverageReport, DataError, Dataset, PredictionSet, Sample, SplitIndices,
    coverage_report, read_csv, set_union, split, standardize, write_csv,
)
from .scores import ABS_RESIDUAL, CQR, ScoreFunction, invert, score
from .synth import GeneratorParams, generate, true_weight
from .weights import (
    ValidityVerdict, WeightErrorProfile, constant_delta_verdict, general_error_requirements,
    general_error_verdict, k_cp, k_wcp, region_grid, theoretical_boundary,
)

__version__ = "0.1.0"
