"""Distributional checks for uniform random tables."""

from .distributions import (
    BlockLaw,
    MaxEntryLaw,
    Pmf,
    block_joint,
    block_tv,
    empirical_marginal,
    geom_law,
    geom_moment,
    geom_pmf,
    max_cdf_iid,
    max_entry_threshold,
    max_expectation_iid,
    pooled_marginal,
    product_geom_block,
    row_class_law,
    row_class_marginal_pmf,
    tv_distance,
    w1_distance,
)
from .spectrum import (
    MPLaw,
    Spectrum,
    jacobi_eigenvalues,
    ks_statistic,
    mp_cdf,
    mp_density,
    mp_eigen_cdf,
    mp_eigen_density,
    singular_spectrum,
    spectral_w1,
)
from .verify import (
    Check,
    ExperimentReport,
    iid_max_bounds,
    pooled_moments,
    tv_to_geom,
    verify_esd,
    verify_joint,
    verify_marginal,
    verify_max_entry,
    verify_moments,
)
