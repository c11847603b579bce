"""Differential distance correlation and companion dependence measures."""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DDCError,
    DegenerateResponseError,
    DegenerateSampleError,
    DegenerateVarianceError,
    InsufficientSampleError,
    InvalidDataError,
    InvalidParameterError,
)
from .measures import (
    CoefficientEstimate,
    Method,
    PairedSample,
    chatterjee_xi,
    coefficient,
    ddc,
    distance_correlation,
    estimate,
    gini_mean_difference,
    hsic,
    projection_correlation,
)
from .asymptotics import (
    VarianceEstimate,
    chatterjee_asymptotic_pvalue,
    ddc_asymptotic_pvalue,
    ddc_variance_estimate,
    distance_variance_sq,
)
from .inference import TestConfig, TestResult, independence_test, permutation_pvalue, power_estimate
from .simulation import Model, SimulationSpec, generate_example1, generate_example2
from .screening import feature_coefficients, minimal_model_size, rank_features, screening_report
