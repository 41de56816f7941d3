"""Hebbian and Generalized Hebbian learning with a spectral oracle, a
benchmark harness and a simulated neuromorphic packet fabric."""

__version__ = "0.1.0"

from .core import (
    CapacityError,
    DimensionError,
    EmptyDatasetError,
    HebGhaError,
    NumericFailure,
    RangeError,
    RateError,
    ShapeError,
    SplitMix64,
    UndefinedMetricError,
    frobenius_delta,
    seeded_uniform_matrix,
)
from .rules import (
    GhaConfig,
    HebbianModel,
    TrainingTrace,
    WeightMatrix,
    eta_schedule,
    gha_init,
    gha_output,
    gha_step,
    gha_train,
    hebbian_init,
    hebbian_step,
    hebbian_train,
    lower_triangular_of,
)
from .spectral import (
    autocorrelation,
    component_variances,
    jacobi_eigendecompose,
    orthonormality_defect,
    reconstruction_error,
    row_alignment,
)

__all__ = [
    "CapacityError",
    "DimensionError",
    "EmptyDatasetError",
    "GhaConfig",
    "HebGhaError",
    "HebbianModel",
    "NumericFailure",
    "RangeError",
    "RateError",
    "ShapeError",
    "SplitMix64",
    "TrainingTrace",
    "UndefinedMetricError",
    "WeightMatrix",
    "autocorrelation",
    "component_variances",
    "eta_schedule",
    "frobenius_delta",
    "gha_init",
    "gha_output",
    "gha_step",
    "gha_train",
    "hebbian_init",
    "hebbian_step",
    "hebbian_train",
    "jacobi_eigendecompose",
    "lower_triangular_of",
    "orthonormality_defect",
    "reconstruction_error",
    "row_alignment",
    "seeded_uniform_matrix",
]
