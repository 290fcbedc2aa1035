"""Monte Carlo and exact-arithmetic toolkit for spectral norms of shaped
random matrices W = BA with independent subexponential entries."""

__version__ = "0.1.0"

from .distributions import (
    CenteredExponential,
    Exponential,
    Gaussian,
    GaussianProduct,
    Laplace,
    PointMass,
    Rademacher,
    ScalarDistribution,
    TruncatedGaussianProduct,
    abs_moment,
    parse_distribution,
    psi_norm,
    sample,
)
from .linalg import jacobi_singular_values, spectral_norm, spectral_norm_batch
from .seeding import SeedStream

__all__ = [
    "CenteredExponential",
    "Exponential",
    "Gaussian",
    "GaussianProduct",
    "Laplace",
    "PointMass",
    "Rademacher",
    "ScalarDistribution",
    "SeedStream",
    "TruncatedGaussianProduct",
    "abs_moment",
    "jacobi_singular_values",
    "parse_distribution",
    "psi_norm",
    "sample",
    "spectral_norm",
    "spectral_norm_batch",
]
