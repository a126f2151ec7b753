"""Structured sparse K-means for signals in wavelet and scattering domains."""

from .cluster import (
    SparseKMeans,
    bcss,
    kmeans,
    multivariate_groups,
    refit_on_selected,
    solve_weights,
    solve_weights_group,
    solve_weights_l1,
    sparse_kmeans,
)
from .dwt import DWTTransformer, denoise, dwt_forward, dwt_inverse, soft_threshold, wavelet_scale_groups
from .scattering import ScatteringConfig, ScatteringTransformer, build_filter_bank, scatter
from .selection import GapProfile, adjusted_rand_index, gap_select
from .signals import (
    ClusteringResult,
    DataFormatError,
    Dataset,
    FeatureMatrix,
    GroupPartition,
    ShapeError,
    ValidationError,
    flatten_multivariate,
    load_dataset,
    load_result,
    save_result,
    unflatten_multivariate,
)
from .simgen import SimConfig, make_benchmark

__version__ = "0.1.0"

__all__ = [
    "ClusteringResult",
    "DWTTransformer",
    "DataFormatError",
    "Dataset",
    "FeatureMatrix",
    "GapProfile",
    "GroupPartition",
    "ScatteringConfig",
    "ScatteringTransformer",
    "ShapeError",
    "SimConfig",
    "SparseKMeans",
    "ValidationError",
    "adjusted_rand_index",
    "bcss",
    "build_filter_bank",
    "denoise",
    "dwt_forward",
    "dwt_inverse",
    "flatten_multivariate",
    "gap_select",
    "kmeans",
    "load_dataset",
    "load_result",
    "make_benchmark",
    "multivariate_groups",
    "refit_on_selected",
    "save_result",
    "scatter",
    "soft_threshold",
    "solve_weights",
    "solve_weights_group",
    "solve_weights_l1",
    "sparse_kmeans",
    "unflatten_multivariate",
]
