"""Exact, mixture and Monte Carlo laws of the multi-group Curie-Weiss model."""

from .model import CouplingMatrix, GroupSizes, MagnetizationState, ModelSpec
from .regime import ParameterPoint, classify, limit_covariance
from .exactdist import PmfTable, exact_pmf, local_clt_error

__all__ = [
    "CouplingMatrix", "GroupSizes", "MagnetizationState", "ModelSpec",
    "ParameterPoint", "classify", "limit_covariance",
    "PmfTable", "exact_pmf", "local_clt_error",
]
__version__ = "0.1.0"
