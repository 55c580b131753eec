"""Counting, sampling and limit-law checks for contingency tables with fixed margins."""

from .core import (
    Margins,
    OutsideHypothesisWarning,
    SwapMove,
    Table,
    apply_swap,
    make_table,
    northwest_start,
    row_sum_identity_residual,
    validate_table,
)
from .counting import (
    binom_entropy_estimate,
    bounded_compositions,
    cm_log_count,
    count_exact,
    enumerate_tables,
    log_binomial,
    rn_ratio,
    verify_margin_maximality,
)
from .entropy import barvinok_bounds, entropy_f, entropy_g, geometric_model, typical_table
from .errors import ConvergenceError, ExhaustedError, ResourceError, StructuralError
from .sampling import (
    ChainConfig,
    ChainSampler,
    RejectionConfig,
    RejectionSampler,
    TruncatedGeomModel,
    make_sampler,
    rejection_sample,
    rejection_sample_many,
    swap_chain_run,
)

__version__ = "0.1.0"
