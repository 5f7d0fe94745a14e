"""Sparse ternary codes and their multi-layer extension for vector compression."""

from .baselines import LSHHash, PCAHash, train_lsh, train_pca_hash
from .codec import (
    LayerParams,
    MLModel,
    TernaryCode,
    decode,
    decode_matrix,
    decode_ml,
    decode_ml_matrix,
    encode,
    encode_matrix,
    encode_ml,
    encode_ml_matrix,
    learn_bprime,
    train_ml,
    train_single_layer,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateDataError,
    DomainError,
    FormatError,
    InfeasibleRateError,
    InsufficientDataError,
    MLSTCError,
    NumericalError,
    SingularMatrixError,
    TruncationError,
)
from .harness import ExperimentConfig, emit_allocation_report, run_sweep
from .kernels import eigh, estimate_covariance, q_function, ternary_entropy
from .metrics import RDPoint, empirical_ternary_rate, measure_distortion
from .quantizer import distortion_per_dim, lambda_for_rate, optimal_beta, rate_per_dim, ternarize
from .slb import slb_curve, slb_distortion, waterfill

__version__ = "0.1.0"
