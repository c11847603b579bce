"""
Dependence coefficients.

Differential distance correlation (DDC) of a random vector given a scalar,
its Gini-mean-difference normaliser, and four comparison coefficients:
Chatterjee's rank coefficient, distance correlation, Gaussian-kernel HSIC
and the improved projection correlation.

Conventions
-----------
A :class:`PairedSample` holds ``x`` (n x p, the *vector argument*) and ``y``
(length n, the *conditioning scalar*).  Both asymmetric coefficients sort by
``y``: ``DDC(x | y)`` and Chatterjee's ``xi(y, x)`` are 1 when ``x`` is a
function of ``y``.

Pairwise quantities for ``p > 1`` are accumulated over row blocks of fixed
size (see :data:`BLOCK_ELEMENTS`), so the summation order depends only on
``n`` and results are bit-reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

import numpy as np
from scipy.spatial.distance import cdist

from ._rng import SeedLike, derive_rng
from .errors import (
    DegenerateResponseError,
    InsufficientSampleError,
    InvalidDataError,
    InvalidParameterError,
)

#: Default HSIC Gaussian-kernel bandwidth.
DEFAULT_BANDWIDTH = math.sqrt(0.5)
#: Default ``sigma^2`` of the projection-correlation angle kernel.
DEFAULT_SIGMA_SQ = 1.0
#: Maximum number of kernel entries materialised per row block.
BLOCK_ELEMENTS = 1 << 22


class Method(str, Enum):
    """Identifiers of the five supported coefficients."""

    DDC = "ddc"
    CHATTERJEE = "chatterjee"
    DC = "dc"
    HSIC = "hsic"
    PCOR = "pcor"

    @classmethod
    def parse(cls, value: "str | Method") -> "Method":
        if isinstance(value, Method):
            return value
        key = str(value).strip().lower()
        key = _METHOD_ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise InvalidParameterError(
                f"unknown method {value!r}; expected one of: {valid}"
            ) from None

    @property
    def label(self) -> str:
        return _METHOD_LABELS[self]


_METHOD_ALIASES = {"xi": "chatterjee", "xicor": "chatterjee", "dcor": "dc"}
_METHOD_LABELS = {
    Method.DDC: "DDC",
    Method.CHATTERJEE: "Chatterjee",
    Method.DC: "DC",
    Method.HSIC: "HSIC",
    Method.PCOR: "PCor",
}


def as_matrix(values: Any, name: str = "x") -> np.ndarray:
    """Coerce ``values`` to a finite float matrix with one row per observation."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    elif arr.ndim != 2:
        raise InvalidDataError(f"{name} must be 1- or 2-dimensional, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidDataError(f"{name} contains NaN or infinite entries")
    return arr


def as_vector(values: Any, name: str = "y") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise InvalidDataError(f"{name} must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidDataError(f"{name} contains NaN or infinite entries")
    return arr


@dataclass(frozen=True)
class PairedSample:
    """``n`` observations of a vector ``x`` in R^p and a scalar ``y``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        x = as_matrix(self.x, "x")
        y = as_vector(self.y, "y")
        if x.shape[0] != y.shape[0]:
            raise InvalidDataError(
                f"x has {x.shape[0]} rows but y has {y.shape[0]} entries"
            )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class SortedPairedSample:
    """A :class:`PairedSample` together with its ``y``-sorting permutation."""

    x: np.ndarray
    y: np.ndarray
    permutation: np.ndarray
    tie_seed: SeedLike

    @property
    def x_sorted(self) -> np.ndarray:
        return self.x[self.permutation]

    @property
    def y_sorted(self) -> np.ndarray:
        return self.y[self.permutation]


@dataclass(frozen=True)
class CoefficientEstimate:
    method: Method
    value: float
    n: int
    p: int
    params: dict[str, Any] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _require_n(n: int, minimum: int, what: str) -> None:
    if n < minimum:
        raise InsufficientSampleError(f"{what} needs at least {minimum} observations, got {n}")


def is_constant(x: np.ndarray) -> bool:
    """True when every row of ``x`` equals the first one."""
    return bool(np.all(x == x[:1]))


def tie_broken_order(keys: np.ndarray, tie_seed: SeedLike = 0) -> np.ndarray:
    """Indices sorting ``keys`` ascending; runs of equal keys are shuffled.

    The random generator is only consulted when ties are present, so tie-free
    input yields the plain ``argsort``.
    """
    order = np.argsort(keys, kind="stable")
    ordered = keys[order]
    if ordered.size > 1 and np.any(ordered[1:] == ordered[:-1]):
        rng = derive_rng(tie_seed)
        order = np.lexsort((rng.random(keys.size), keys))
    return order


def sort_by_conditioner(sample: PairedSample, tie_seed: SeedLike = 0) -> SortedPairedSample:
    return SortedPairedSample(sample.x, sample.y, tie_broken_order(sample.y, tie_seed), tie_seed)


def _row_blocks(n: int):
    rows = max(1, BLOCK_ELEMENTS // max(n, 1))
    for start in range(0, n, rows):
        yield start, min(n, start + rows)


# Kernels return the block of pairwise values between the rows of u and v.

def distance_kernel(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    if u.shape[1] == 1:
        return np.abs(u - v.T)
    return cdist(u, v)


def gaussian_kernel(bandwidth: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    scale = 2.0 * bandwidth * bandwidth

    def kernel(u: np.ndarray, v: np.ndarray) -> np.ndarray:
        if u.shape[1] == 1:
            sq = (u - v.T) ** 2
        else:
            sq = cdist(u, v, "sqeuclidean")
        return np.exp(-sq / scale)

    return kernel


def angle_kernel(sigma_sq: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    def kernel(u: np.ndarray, v: np.ndarray) -> np.ndarray:
        nu = np.sqrt(sigma_sq + np.einsum("ij,ij->i", u, u))
        nv = np.sqrt(sigma_sq + np.einsum("ij,ij->i", v, v))
        cos = (sigma_sq + u @ v.T) / nu[:, None] / nv[None, :]
        # Cauchy-Schwarz bounds the exact value; clip rounding excursions.
        return np.arccos(np.clip(cos, -1.0, 1.0))

    return kernel


@dataclass
class _PairMoments:
    """Sums over a pair of n x n kernel matrices ``a`` (of x) and ``b`` (of y)."""

    n: int
    s_ab: float
    s_aa: float
    s_bb: float
    row_a: np.ndarray
    row_b: np.ndarray


def _pair_moments(x, y, kx, ky, zero_diagonal: bool = False) -> _PairMoments:
    n = x.shape[0]
    s_ab = s_aa = s_bb = 0.0
    row_a = np.empty(n)
    row_b = np.empty(n)
    for start, stop in _row_blocks(n):
        a = kx(x[start:stop], x)
        b = ky(y[start:stop], y)
        if zero_diagonal:
            idx = np.arange(start, stop)
            a[idx - start, idx] = 0.0
            b[idx - start, idx] = 0.0
        s_ab += float(np.sum(a * b))
        s_aa += float(np.sum(a * a))
        s_bb += float(np.sum(b * b))
        row_a[start:stop] = a.sum(axis=1)
        row_b[start:stop] = b.sum(axis=1)
    return _PairMoments(n, s_ab, s_aa, s_bb, row_a, row_b)


def v_centered_product(s: float, row_a: np.ndarray, row_b: np.ndarray, n: int) -> float:
    """``(1/n^2) sum_kl A_kl B_kl`` for the double-centred versions of ``a`` and ``b``."""
    return (
        s / n**2
        - 2.0 * float(row_a @ row_b) / n**3
        + float(row_a.sum()) * float(row_b.sum()) / n**4
    )


def u_centered_product(s: float, row_a: np.ndarray, row_b: np.ndarray, n: int) -> float:
    """U-statistic of ``a12 b12 - 2 a12 b13 + a12 b34`` (zero-diagonal ``a``, ``b``)."""
    s2 = float(row_a @ row_b)
    s3 = float(row_a.sum()) * float(row_b.sum())
    n2 = n * (n - 1)
    n3 = n2 * (n - 2)
    n4 = n3 * (n - 3)
    return s / n2 - 2.0 * (s2 - s) / n3 + (s3 - 4.0 * s2 + 2.0 * s) / n4


def self_moments(x: np.ndarray, kernel) -> tuple[float, np.ndarray]:
    """``(sum_kl a_kl^2, row sums of a)`` for the kernel matrix of ``x`` with itself."""
    n = x.shape[0]
    s_aa = 0.0
    row_a = np.empty(n)
    for start, stop in _row_blocks(n):
        a = kernel(x[start:stop], x)
        s_aa += float(np.sum(a * a))
        row_a[start:stop] = a.sum(axis=1)
    return s_aa, row_a


def pairwise_distance_sum(x: np.ndarray) -> float:
    """``sum_{i>j} ||x_i - x_j||`` accumulated over fixed row blocks."""
    total = 0.0
    for start, stop in _row_blocks(x.shape[0]):
        total += float(np.sum(distance_kernel(x[start:stop], x)))
    return total / 2.0


# ---------------------------------------------------------------------------
# coefficients
# ---------------------------------------------------------------------------

def gini_mean_difference(sample: Any) -> float:
    """
    Gini mean difference ``C(n,2)^-1 sum_{i>j} ||X_i - X_j||``.

    Univariate input uses the order-statistic identity
    ``sum_{i>j} |X_i - X_j| = sum_i (2i - n - 1) X^(i)``, costing one sort.

    Parameters
    ----------
    sample : array_like
        ``n`` observations, shape ``(n,)`` or ``(n, p)``.

    Returns
    -------
    float
        Nonnegative estimate of ``E||X_1 - X_2||``.
    """
    x = as_matrix(sample, "sample")
    n = x.shape[0]
    _require_n(n, 2, "gini_mean_difference")
    pairs = n * (n - 1) / 2.0
    if x.shape[1] == 1:
        xs = np.sort(x[:, 0])
        # Shifting by an order statistic is exact for constant data and
        # limits cancellation when the mean is large.
        xs = xs - xs[n // 2]
        weights = 2.0 * np.arange(1, n + 1) - n - 1
        return max(0.0, float(weights @ xs)) / pairs
    return pairwise_distance_sum(x) / pairs


def ddc(sample: PairedSample, tie_seed: SeedLike = 0) -> float:
    """
    Differential distance correlation ``DDC_n(x | y)``.

    ``1 - n * sum_i ||X_(i) - X_(i+1)|| / sum_{i,j} ||X_i - X_j||`` with rows
    arranged by increasing ``y``.  Ties in ``y`` are broken by a random
    permutation drawn from ``tie_seed``.  Returns exactly 0 when all rows of
    ``x`` coincide.
    """
    n = sample.n
    _require_n(n, 2, "ddc")
    x = sample.x
    if is_constant(x):
        return 0.0
    order = tie_broken_order(sample.y, tie_seed)
    adjacent = _adjacent_distance_sum(x[order])
    total = n * (n - 1) * gini_mean_difference(x)
    return 1.0 - n * adjacent / total


def _adjacent_distance_sum(xs: np.ndarray) -> float:
    steps = np.diff(xs, axis=0)
    if xs.shape[1] == 1:
        return float(np.sum(np.abs(steps)))
    return float(np.sum(np.sqrt(np.einsum("ij,ij->i", steps, steps))))


def chatterjee_xi(x: Any, y: Any, tie_seed: SeedLike = 0) -> float:
    """
    Chatterjee's rank coefficient ``xi_n(x, y)``.

    Observations are sorted by ``x`` (ties shuffled via ``tie_seed``); with
    ``r_i = #{k : y_(k) <= y_(i)}`` and ``l_i = #{k : y_(k) >= y_(i)}`` the value is
    ``1 - n sum|r_{i+1} - r_i| / (2 sum l_i (n - l_i))``.

    Raises
    ------
    DegenerateResponseError
        If ``y`` is constant.
    """
    xv = as_vector(x, "x")
    yv = as_vector(y, "y")
    n = xv.size
    if yv.size != n:
        raise InvalidDataError(f"x has {n} entries but y has {yv.size}")
    _require_n(n, 2, "chatterjee_xi")
    order = tie_broken_order(xv, tie_seed)
    ys = yv[order]
    ranked = np.sort(yv)
    r = np.searchsorted(ranked, ys, side="right").astype(np.int64)
    l = n - np.searchsorted(ranked, ys, side="left").astype(np.int64)
    denominator = 2 * int(np.sum(l * (n - l)))
    if denominator == 0:
        raise DegenerateResponseError("chatterjee_xi is undefined for a constant response")
    numerator = n * int(np.sum(np.abs(np.diff(r))))
    return 1.0 - numerator / denominator


def distance_correlation(x: Any, y: Any) -> float:
    """
    Squared sample distance correlation (V-statistic form).

    ``dCov_n^2(x, y) / sqrt(dVar_n^2(x) dVar_n^2(y))``, which lies in [0, 1];
    0 when either distance variance vanishes.
    """
    xm = as_matrix(x, "x")
    ym = as_matrix(y, "y")
    _check_rows(xm, ym)
    _require_n(xm.shape[0], 2, "distance_correlation")
    m = _pair_moments(xm, ym, distance_kernel, distance_kernel)
    n = m.n
    dcov = v_centered_product(m.s_ab, m.row_a, m.row_b, n)
    dvar_x = v_centered_product(m.s_aa, m.row_a, m.row_a, n)
    dvar_y = v_centered_product(m.s_bb, m.row_b, m.row_b, n)
    if dvar_x <= 0.0 or dvar_y <= 0.0:
        return 0.0
    return float(np.clip(dcov / math.sqrt(dvar_x * dvar_y), 0.0, 1.0))


def hsic(x: Any, y: Any, bandwidth: float = DEFAULT_BANDWIDTH) -> float:
    """Biased HSIC ``trace(K H L H) / n^2`` with Gaussian kernels of one bandwidth."""
    if not bandwidth > 0:
        raise InvalidParameterError(f"bandwidth must be positive, got {bandwidth}")
    xm = as_matrix(x, "x")
    ym = as_matrix(y, "y")
    _check_rows(xm, ym)
    _require_n(xm.shape[0], 4, "hsic")
    kernel = gaussian_kernel(bandwidth)
    m = _pair_moments(xm, ym, kernel, kernel)
    return max(0.0, v_centered_product(m.s_ab, m.row_a, m.row_b, m.n))


def projection_correlation(
    x: Any, y: Any, sigma_sq: float = DEFAULT_SIGMA_SQ, *, unbiased: bool = True
) -> float:
    """
    Improved projection correlation.

    With ``A(u, v) = arccos((s + <u,v>) / sqrt((s + <u,u>)(s + <v,v>)))`` and
    ``s = sigma_sq``, ``PCov`` is the U-statistic of
    ``A(X1,X2)A(Y1,Y2) - 2A(X1,X2)A(Y1,Y3) + A(X1,X2)A(Y3,Y4)``, evaluated
    from row sums of the two angle matrices.  Returns
    ``PCov(x,y) / sqrt(PCov(x,x) PCov(y,y))``, or 0 if a self term is <= 0.

    ``unbiased=False`` swaps in the V-statistic (double-centred) moments,
    which are nonnegative and biased upward at small ``n``.
    """
    if not sigma_sq > 0:
        raise InvalidParameterError(f"sigma_sq must be positive, got {sigma_sq}")
    xm = as_matrix(x, "x")
    ym = as_matrix(y, "y")
    _check_rows(xm, ym)
    _require_n(xm.shape[0], 4, "projection_correlation")
    if is_constant(xm) or is_constant(ym):
        return 0.0
    m = _pair_moments(xm, ym, angle_kernel(sigma_sq), angle_kernel(sigma_sq), zero_diagonal=True)
    n = m.n
    product = u_centered_product if unbiased else v_centered_product
    pcov = product(m.s_ab, m.row_a, m.row_b, n)
    pvar_x = product(m.s_aa, m.row_a, m.row_a, n)
    pvar_y = product(m.s_bb, m.row_b, m.row_b, n)
    if pvar_x <= 0.0 or pvar_y <= 0.0:
        return 0.0
    return pcov / math.sqrt(pvar_x * pvar_y)


def _check_rows(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape[0] != y.shape[0]:
        raise InvalidDataError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def coefficient(
    method: "Method | str",
    sample: PairedSample,
    *,
    tie_seed: SeedLike = 0,
    bandwidth: float = DEFAULT_BANDWIDTH,
    sigma_sq: float = DEFAULT_SIGMA_SQ,
) -> float:
    """Value of ``method`` on ``sample`` (``x`` vector argument, ``y`` conditioner)."""
    method = Method.parse(method)
    if method is Method.DDC:
        return ddc(sample, tie_seed)
    if method is Method.CHATTERJEE:
        if sample.p != 1:
            raise InvalidDataError("Chatterjee's coefficient needs a univariate x")
        return chatterjee_xi(sample.y, sample.x[:, 0], tie_seed)
    if method is Method.DC:
        return distance_correlation(sample.x, sample.y)
    if method is Method.HSIC:
        return hsic(sample.x, sample.y, bandwidth)
    return projection_correlation(sample.x, sample.y, sigma_sq)


def method_params(
    method: "Method | str",
    *,
    bandwidth: float = DEFAULT_BANDWIDTH,
    sigma_sq: float = DEFAULT_SIGMA_SQ,
) -> dict[str, Any]:
    method = Method.parse(method)
    if method is Method.HSIC:
        return {"bandwidth": bandwidth, "estimator": "biased V-statistic"}
    if method is Method.PCOR:
        return {"sigma_sq": sigma_sq, "estimator": "U-statistic"}
    if method is Method.DC:
        return {"estimator": "V-statistic", "scale": "squared"}
    return {"tie_breaking": "random"}


def estimate(
    method: "Method | str",
    sample: PairedSample,
    *,
    tie_seed: SeedLike = 0,
    bandwidth: float = DEFAULT_BANDWIDTH,
    sigma_sq: float = DEFAULT_SIGMA_SQ,
) -> CoefficientEstimate:
    method = Method.parse(method)
    value = coefficient(method, sample, tie_seed=tie_seed, bandwidth=bandwidth, sigma_sq=sigma_sq)
    params = method_params(method, bandwidth=bandwidth, sigma_sq=sigma_sq)
    return CoefficientEstimate(method, float(value), sample.n, sample.p, params)
