"""
Null distribution of DDC.

Under independence ``sqrt(n) DDC_n(x | y)`` is asymptotically normal with
variance ``dVar(x)^2 / Delta^2``.  The plug-in estimate replaces both terms
by their sample versions; for univariate ``x`` everything is computed from a
single sort.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
from scipy.special import ndtr

from .errors import DegenerateSampleError, DegenerateVarianceError, InsufficientSampleError
from .measures import (
    as_matrix,
    distance_kernel,
    gini_mean_difference,
    is_constant,
    self_moments,
    v_centered_product,
)

#: Null variance of ``sqrt(n) xi_n`` for a continuous response.
CHATTERJEE_NULL_VARIANCE = 2.0 / 5.0


@dataclass(frozen=True)
class VarianceEstimate:
    dvar_sq: float
    delta_hat: float
    sigma_hat_sq: float
    n: int


class ReferenceDistribution(str, Enum):
    STANDARD_NORMAL = "standard_normal"
    STANDARD_UNIFORM = "standard_uniform"


def _univariate_row_sums(v: np.ndarray) -> np.ndarray:
    """Row sums ``sum_j |v_i - v_j|`` in the sorted order of ``v``."""
    vs = np.sort(v)
    n = vs.size
    idx = np.arange(n)
    csum = np.cumsum(vs)
    total = csum[-1]
    below = vs * idx - (csum - vs)
    above = (total - csum) - vs * (n - 1 - idx)
    return below + above


def _distance_self_moments(x: np.ndarray) -> tuple[float, np.ndarray]:
    """``(sum_kl a_kl^2, row sums)`` of the Euclidean distance matrix of ``x``."""
    if x.shape[1] == 1:
        v = x[:, 0]
        v = v - np.sort(v)[v.size // 2]
        n = v.size
        # sum_kl (v_k - v_l)^2 = 2n sum v^2 - 2 (sum v)^2
        s_aa = 2.0 * n * float(v @ v) - 2.0 * float(v.sum()) ** 2
        return max(s_aa, 0.0), _univariate_row_sums(v)
    return self_moments(x, distance_kernel)


def distance_variance_sq(x: Any) -> float:
    """
    Squared sample distance variance ``V_n^2 = (1/n^2) sum_kl A_kl^2``.

    ``A`` is the double-centred Euclidean distance matrix of the rows of
    ``x``.  The value is computed from ``sum a_kl^2`` and the row sums of the
    distance matrix, which costs O(n log n) when ``x`` is univariate.
    """
    xm = as_matrix(x, "x")
    n = xm.shape[0]
    if n < 2:
        raise InsufficientSampleError(f"distance_variance_sq needs at least 2 observations, got {n}")
    if is_constant(xm):
        return 0.0
    s_aa, rows = _distance_self_moments(xm)
    return max(0.0, v_centered_product(s_aa, rows, rows, n))


def distance_moments(x: Any) -> tuple[float, float, float]:
    """
    U-statistic estimates of the three moments making up ``dVar(X)^2``.

    Returns ``(E||X1-X2||^2, (E||X1-X2||)^2, E(||X1-X2|| ||X1-X3||))``; the
    second is the squared Gini mean difference.
    """
    xm = as_matrix(x, "x")
    n = xm.shape[0]
    if n < 3:
        raise InsufficientSampleError(f"distance_moments needs at least 3 observations, got {n}")
    s_aa, rows = _distance_self_moments(xm)
    second = s_aa / (n * (n - 1))
    gini_sq = gini_mean_difference(xm) ** 2
    cross = (float(rows @ rows) - s_aa) / (n * (n - 1) * (n - 2))
    return second, gini_sq, cross


def ddc_variance_estimate(x: Any) -> VarianceEstimate:
    xm = as_matrix(x, "x")
    n = xm.shape[0]
    if n < 2:
        raise InsufficientSampleError(f"ddc_variance_estimate needs at least 2 observations, got {n}")
    if is_constant(xm):
        raise DegenerateSampleError("all rows of x coincide; the null variance is undefined")
    dvar_sq = distance_variance_sq(xm)
    delta = gini_mean_difference(xm)
    return VarianceEstimate(dvar_sq, delta, dvar_sq / delta**2, n)


def normal_upper_tail(z: float) -> float:
    """``1 - Phi(z)`` evaluated as ``Phi(-z)`` so small tails keep full precision."""
    return float(ndtr(-z))


def ddc_asymptotic_pvalue(ddc_value: float, variance: VarianceEstimate) -> float:
    """One-sided p-value ``1 - Phi(sqrt(n) * ddc / sigma_hat)``."""
    if not variance.sigma_hat_sq > 0:
        raise DegenerateVarianceError("sigma_hat_sq is zero; the asymptotic test is undefined")
    z = math.sqrt(variance.n) * ddc_value / math.sqrt(variance.sigma_hat_sq)
    return normal_upper_tail(z)


def chatterjee_asymptotic_pvalue(xi_value: float, n: int) -> float:
    """One-sided p-value of Chatterjee's coefficient with null variance 2/5."""
    z = math.sqrt(n) * xi_value / math.sqrt(CHATTERJEE_NULL_VARIANCE)
    return normal_upper_tail(z)


def reference_sigma_sq(dist: "ReferenceDistribution | str") -> float:
    """Closed-form null variance of ``sqrt(n) DDC_n`` for a univariate reference law."""
    dist = ReferenceDistribution(dist)
    if dist is ReferenceDistribution.STANDARD_NORMAL:
        return math.pi / 3.0 - math.sqrt(3.0) + 1.0
    return 2.0 / 5.0


def reference_dvar_sq(dist: "ReferenceDistribution | str") -> float:
    dist = ReferenceDistribution(dist)
    if dist is ReferenceDistribution.STANDARD_NORMAL:
        return 4.0 * (math.pi / 3.0 - math.sqrt(3.0) + 1.0) / math.pi
    return 1.0 / 6.0 - 2.0 * 7.0 / 60.0 + 1.0 / 9.0


def reference_gini(dist: "ReferenceDistribution | str") -> float:
    dist = ReferenceDistribution(dist)
    if dist is ReferenceDistribution.STANDARD_NORMAL:
        return 2.0 / math.sqrt(math.pi)
    return 1.0 / 3.0
