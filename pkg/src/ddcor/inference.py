"""
Independence tests.

DDC and Chatterjee's coefficient are tested through their asymptotic normal
null laws; DC, HSIC and PCor through permutations of the conditioning
variable with the add-one p-value ``(1 + #{T_b >= T_0}) / (B + 1)``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Protocol, Sequence, TypeVar

import numpy as np

from . import _matrices
from ._rng import SeedLike, derive_rng, derive_seed
from .asymptotics import chatterjee_asymptotic_pvalue, ddc_asymptotic_pvalue, ddc_variance_estimate
from .errors import DegenerateResponseError, InvalidParameterError
from .measures import (
    DEFAULT_BANDWIDTH,
    DEFAULT_SIGMA_SQ,
    CoefficientEstimate,
    Method,
    PairedSample,
    as_matrix,
    coefficient,
    estimate,
    gini_mean_difference,
    is_constant,
)

# Stream identifiers for derive_rng.
PERMUTATION_STREAM = 1
TIE_STREAM = 2

ASYMPTOTIC_METHODS = frozenset({Method.DDC, Method.CHATTERJEE})

T = TypeVar("T")
R = TypeVar("R")


class PSource(str, Enum):
    ASYMPTOTIC = "asymptotic"
    PERMUTATION = "permutation"


@dataclass(frozen=True)
class TestConfig:
    __test__ = False  # not a pytest class

    level: float = 0.05
    permutations: int = 500
    seed: int = 0
    bandwidth: float = DEFAULT_BANDWIDTH
    sigma_sq: float = DEFAULT_SIGMA_SQ

    def __post_init__(self) -> None:
        if not 0.0 < self.level < 1.0:
            raise InvalidParameterError(f"level must lie in (0, 1), got {self.level}")
        if self.permutations < 1:
            raise InvalidParameterError(f"permutations must be >= 1, got {self.permutations}")


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    estimate: CoefficientEstimate
    p_value: float
    p_source: PSource
    permutations: int
    level: float
    seed: int
    alternative: str = "greater"
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def reject(self) -> bool:
        return self.p_value <= self.level


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int | None = 1) -> list[R]:
    """Ordered map, fanned out over ``threads`` workers when more than one."""
    if threads is None or threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def random_permutations(n: int, count: int, seed: SeedLike) -> np.ndarray:
    rng = derive_rng(seed)
    return rng.permuted(np.tile(np.arange(n), (count, 1)), axis=1)


def _has_ties(v: np.ndarray) -> bool:
    s = np.sort(v)
    return bool(np.any(s[1:] == s[:-1]))


def _ddc_permuted(sample: PairedSample, perms: np.ndarray, tie_seed: SeedLike) -> np.ndarray:
    """DDC with ``y`` replaced by ``y[perm]`` for every row of ``perms``."""
    x, y = sample.x, sample.y
    n = sample.n
    if is_constant(x):
        return np.zeros(perms.shape[0])
    if _has_ties(y):
        return np.array([
            coefficient(Method.DDC, PairedSample(x, y[perm]), tie_seed=tie_seed) for perm in perms
        ])
    total = n * (n - 1) * gini_mean_difference(x)
    orders = np.argsort(y[perms], axis=1)
    steps = np.diff(x[orders], axis=1)
    if x.shape[1] == 1:
        adjacent = np.abs(steps[..., 0]).sum(axis=1)
    else:
        adjacent = np.sqrt(np.einsum("bij,bij->bi", steps, steps)).sum(axis=1)
    return 1.0 - n * adjacent / total


def _chatterjee_permuted(sample: PairedSample, perms: np.ndarray, tie_seed: SeedLike) -> np.ndarray:
    response = sample.x[:, 0]
    y = sample.y
    n = sample.n
    if _has_ties(y):
        return np.array([
            coefficient(Method.CHATTERJEE, PairedSample(sample.x, y[perm]), tie_seed=tie_seed)
            for perm in perms
        ])
    ranked = np.sort(response)
    r = np.searchsorted(ranked, response, side="right").astype(np.int64)
    l = n - np.searchsorted(ranked, response, side="left").astype(np.int64)
    denominator = 2 * int(np.sum(l * (n - l)))
    if denominator == 0:
        raise DegenerateResponseError("chatterjee_xi is undefined for a constant response")
    orders = np.argsort(y[perms], axis=1)
    numerator = n * np.abs(np.diff(r[orders], axis=1)).sum(axis=1)
    return 1.0 - numerator / denominator


def sample_bilinear_form(
    method: Method, sample: PairedSample, bandwidth: float, sigma_sq: float
) -> _matrices.BilinearForm:
    a = _matrices.kernel_matrix(method, sample.x, bandwidth, sigma_sq)
    b = _matrices.kernel_matrix(method, as_matrix(sample.y), bandwidth, sigma_sq)
    return _matrices.bilinear_form(method, a, b)


def permutation_statistics(
    method: "Method | str",
    sample: PairedSample,
    B: int,
    seed: SeedLike,
    *,
    tie_seed: SeedLike = 0,
    bandwidth: float = DEFAULT_BANDWIDTH,
    sigma_sq: float = DEFAULT_SIGMA_SQ,
) -> tuple[float, np.ndarray]:
    """Observed statistic and ``B`` statistics with ``y`` randomly permuted.

    Both come from the same evaluation path, so an identity permutation
    reproduces the observed value exactly.
    """
    method = Method.parse(method)
    if B < 1:
        raise InvalidParameterError(f"B must be >= 1, got {B}")
    n = sample.n
    perms = np.vstack([np.arange(n), random_permutations(n, B, seed)])
    if method is Method.DDC:
        stats = _ddc_permuted(sample, perms, tie_seed)
    elif method is Method.CHATTERJEE:
        stats = _chatterjee_permuted(sample, perms, tie_seed)
    else:
        form = sample_bilinear_form(method, sample, bandwidth, sigma_sq)
        stats = _matrices.permuted_values(form, perms)
    return float(stats[0]), stats[1:]


def add_one_pvalue(observed: float, permuted: np.ndarray) -> float:
    return (1.0 + float(np.count_nonzero(permuted >= observed))) / (permuted.size + 1.0)


def permutation_pvalue(
    method: "Method | str",
    sample: PairedSample,
    B: int = 500,
    seed: SeedLike = 0,
    *,
    tie_seed: SeedLike = 0,
    bandwidth: float = DEFAULT_BANDWIDTH,
    sigma_sq: float = DEFAULT_SIGMA_SQ,
) -> float:
    observed, permuted = permutation_statistics(
        method, sample, B, seed, tie_seed=tie_seed, bandwidth=bandwidth, sigma_sq=sigma_sq
    )
    return add_one_pvalue(observed, permuted)


def independence_test(
    method: "Method | str", sample: PairedSample, config: TestConfig | None = None
) -> TestResult:
    """
    Test independence of ``sample.x`` and ``sample.y`` with one coefficient.

    DDC and Chatterjee use one-sided asymptotic p-values; DC, HSIC and PCor
    use ``config.permutations`` random permutations of ``y``.
    """
    config = config or TestConfig()
    method = Method.parse(method)
    tie_seed = derive_seed(config.seed, TIE_STREAM)
    est = estimate(
        method, sample, tie_seed=tie_seed, bandwidth=config.bandwidth, sigma_sq=config.sigma_sq
    )
    if method is Method.DDC:
        variance = ddc_variance_estimate(sample.x)
        p_value = ddc_asymptotic_pvalue(est.value, variance)
        return TestResult(
            est, p_value, PSource.ASYMPTOTIC, 0, config.level, config.seed,
            metadata={"sigma_hat_sq": variance.sigma_hat_sq},
        )
    if method is Method.CHATTERJEE:
        p_value = chatterjee_asymptotic_pvalue(est.value, sample.n)
        return TestResult(est, p_value, PSource.ASYMPTOTIC, 0, config.level, config.seed)
    p_value = permutation_pvalue(
        method,
        sample,
        config.permutations,
        derive_seed(config.seed, PERMUTATION_STREAM),
        tie_seed=tie_seed,
        bandwidth=config.bandwidth,
        sigma_sq=config.sigma_sq,
    )
    return TestResult(
        est, p_value, PSource.PERMUTATION, config.permutations, config.level, config.seed
    )


class SampleSource(Protocol):
    """Anything that yields the ``rep``-th replication as a :class:`PairedSample`."""

    seed: int
    reps: int

    def sample(self, rep: int) -> PairedSample: ...


def rejection_flags(
    generator: SampleSource,
    methods: Sequence["Method | str"],
    level: float = 0.05,
    reps: int | None = None,
    *,
    permutations: int = 500,
    threads: int | None = 1,
) -> np.ndarray:
    """Boolean ``(reps, len(methods))`` array of rejections; every method sees the same draws."""
    reps = generator.reps if reps is None else reps
    if reps < 1:
        raise InvalidParameterError(f"reps must be >= 1, got {reps}")
    parsed = [Method.parse(m) for m in methods]

    def one(rep: int) -> list[bool]:
        sample = generator.sample(rep)
        config = TestConfig(level, permutations, derive_seed(generator.seed, PERMUTATION_STREAM, rep))
        return [independence_test(m, sample, config).reject for m in parsed]

    return np.array(parallel_map(one, range(reps), threads), dtype=bool).reshape(reps, len(parsed))


def power_estimate(
    generator: SampleSource,
    method: "Method | str",
    level: float = 0.05,
    reps: int | None = None,
    *,
    permutations: int = 500,
    threads: int | None = 1,
) -> float:
    """Fraction of ``reps`` replications in which the test rejects at ``level``."""
    flags = rejection_flags(
        generator, [method], level, reps, permutations=permutations, threads=threads
    )
    return float(flags.mean())
