"""
Marginal feature screening.

Every predictor column ``X_j`` is scored against the (possibly
multivariate) response.  For DDC the response occupies the vector slot and
the scalar predictor is the conditioner, i.e. ``DDC(Y | X_j)``.
"""
from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _matrices
from ._rng import SeedLike, derive_seed
from .asymptotics import chatterjee_asymptotic_pvalue, ddc_asymptotic_pvalue, ddc_variance_estimate
from .errors import InvalidDataError, InvalidParameterError
from .inference import PERMUTATION_STREAM, TIE_STREAM, add_one_pvalue, parallel_map, random_permutations
from .measures import (
    BLOCK_ELEMENTS,
    DEFAULT_BANDWIDTH,
    DEFAULT_SIGMA_SQ,
    Method,
    as_matrix,
    chatterjee_xi,
    gini_mean_difference,
    is_constant,
    tie_broken_order,
)
from .simulation import Model, MultiResponseDraw, SimulationSpec

ACTIVE_PREDICTORS = (0, 1, 2, 3)
SCREENING_METHODS = (Method.DDC, Method.DC, Method.PCOR, Method.HSIC)
DDC_ORIENTATION = "DDC(Y | X_j)"


def selected_size(n: int) -> int:
    """Integer part of ``n / ln n``."""
    return int(math.floor(n / math.log(n)))


def _constant_columns(x: np.ndarray) -> np.ndarray:
    return np.all(x == x[:1], axis=0)


def _ddc_columns(x: np.ndarray, y: np.ndarray, tie_seed: SeedLike) -> np.ndarray:
    n, p = x.shape
    out = np.zeros(p)
    if is_constant(y):
        return out
    total = n * (n - 1) * gini_mean_difference(y)
    orders = np.argsort(x, axis=0, kind="stable")
    sorted_x = np.take_along_axis(x, orders, axis=0)
    tied = np.any(sorted_x[1:] == sorted_x[:-1], axis=0)
    for j in np.flatnonzero(tied):
        orders[:, j] = tie_broken_order(x[:, j], derive_seed(tie_seed, j))
    steps = np.diff(y[orders], axis=0)
    adjacent = np.sqrt(np.einsum("ijk,ijk->ij", steps, steps)).sum(axis=0)
    out[:] = 1.0 - n * adjacent / total
    return out


def _kernel_columns(method: Method, x: np.ndarray, y: np.ndarray, bandwidth: float, sigma_sq: float) -> np.ndarray:
    n, p = x.shape
    b = _matrices.kernel_matrix(method, y, bandwidth, sigma_sq)
    out = np.empty(p)
    step = max(1, BLOCK_ELEMENTS // (n * n))
    for start in range(0, p, step):
        cols = x[:, start:start + step].T
        a = _matrices.column_kernel_matrices(method, cols, bandwidth, sigma_sq)
        out[start:start + step] = _matrices.bilinear_form(method, a, b).value()
    return out


def feature_coefficients(
    x: np.ndarray,
    y: np.ndarray,
    method: "Method | str",
    *,
    tie_seed: SeedLike = 0,
    bandwidth: float = DEFAULT_BANDWIDTH,
    sigma_sq: float = DEFAULT_SIGMA_SQ,
) -> np.ndarray:
    """Coefficient of each predictor column of ``x`` with the response ``y``.

    Constant predictor columns score 0 for every method.
    """
    method = Method.parse(method)
    xm = as_matrix(x, "x")
    ym = as_matrix(y, "y")
    if xm.shape[0] != ym.shape[0]:
        raise InvalidDataError(f"x has {xm.shape[0]} rows but y has {ym.shape[0]}")
    if method is Method.DDC:
        values = _ddc_columns(xm, ym, tie_seed)
    elif method is Method.CHATTERJEE:
        if ym.shape[1] != 1:
            raise InvalidDataError("Chatterjee's coefficient needs a univariate response")
        if is_constant(ym):
            values = np.zeros(xm.shape[1])
        else:
            values = np.array([
                chatterjee_xi(xm[:, j], ym[:, 0], derive_seed(tie_seed, j)) for j in range(xm.shape[1])
            ])
    else:
        values = _kernel_columns(method, xm, ym, bandwidth, sigma_sq)
    values[_constant_columns(xm)] = 0.0
    return values


def ranking_order(values: np.ndarray) -> np.ndarray:
    """Predictor indices by decreasing value; equal values keep index order."""
    values = np.asarray(values, dtype=float)
    return np.lexsort((np.arange(values.size), -values))


def rank_features(
    draw: MultiResponseDraw, method: "Method | str", *, tie_seed: SeedLike = 0
) -> list[tuple[int, float]]:
    values = feature_coefficients(draw.x, draw.y, method, tie_seed=tie_seed)
    return [(int(j), float(values[j])) for j in ranking_order(values)]


def minimal_model_size(ranking: Sequence, active: Iterable[int]) -> int:
    """Smallest ``k`` such that the top ``k`` entries of ``ranking`` contain every active index.

    ``ranking`` may hold indices or ``(index, value)`` pairs.
    """
    order = [item[0] if isinstance(item, tuple) else int(item) for item in ranking]
    active = set(int(a) for a in active)
    if not active:
        raise InvalidParameterError("active set must be nonempty")
    position = {idx: pos for pos, idx in enumerate(order)}
    missing = active.difference(position)
    if missing:
        raise InvalidParameterError(f"active indices {sorted(missing)} are absent from the ranking")
    return max(position[a] for a in active) + 1


@dataclass(frozen=True)
class ScreeningReport:
    per_predictor_proportion: tuple[float, ...]
    mms_values: tuple[int, ...]
    mms_median: float
    mms_sd: float
    selected_size: int
    method: Method
    rho: float
    reps: int
    n: int
    p: int
    active: tuple[int, ...] = ACTIVE_PREDICTORS
    orientation: str = DDC_ORIENTATION
    ranks: tuple[tuple[int, ...], ...] = field(default=(), repr=False)

    def as_row(self) -> dict:
        row = {"method": self.method.label, "rho": self.rho}
        for j, prop in zip(self.active, self.per_predictor_proportion):
            row[f"P{j + 1}"] = prop
        row.update({"MMS": self.mms_median, "SD": self.mms_sd, "selected_size": self.selected_size,
                    "n": self.n, "p": self.p, "reps": self.reps})
        return row


def _require_multi_response(spec: SimulationSpec) -> None:
    if spec.model is not Model.MULTI_RESPONSE:
        raise InvalidParameterError("screening needs a multi-response SimulationSpec")


def screening_report(
    spec: SimulationSpec, method: "Method | str", *, threads: int | None = 1
) -> ScreeningReport:
    """Selection proportions of the active predictors and minimal-model-size summary."""
    _require_multi_response(spec)
    method = Method.parse(method)
    size = selected_size(spec.n)
    active = ACTIVE_PREDICTORS

    def one(rep: int) -> tuple[tuple[int, ...], int]:
        ranking = rank_features(spec.draw(rep), method, tie_seed=derive_seed(spec.seed, TIE_STREAM, rep))
        order = [j for j, _ in ranking]
        position = {j: pos + 1 for pos, j in enumerate(order)}
        return tuple(position[a] for a in active), minimal_model_size(order, active)

    results = parallel_map(one, range(spec.reps), threads)
    ranks = tuple(r for r, _ in results)
    mms = tuple(m for _, m in results)
    proportions = tuple(
        float(np.mean([r[k] <= size for r in ranks])) for k in range(len(active))
    )
    sd = statistics.stdev(mms) if len(mms) > 1 else 0.0
    return ScreeningReport(
        proportions, mms, float(statistics.median(mms)), float(sd), size, method,
        spec.rho, spec.reps, spec.n, spec.p, active, ranks=ranks,
    )


def feature_pvalues(
    x: np.ndarray,
    y: np.ndarray,
    method: "Method | str",
    *,
    permutations: int = 500,
    seed: SeedLike = 0,
    tie_seed: SeedLike = 0,
    bandwidth: float = DEFAULT_BANDWIDTH,
    sigma_sq: float = DEFAULT_SIGMA_SQ,
) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients and independence p-values of each predictor column against ``y``.

    DDC and Chatterjee use asymptotic p-values.  The permutation methods
    share one set of ``permutations`` response shuffles across predictors.
    """
    method = Method.parse(method)
    xm = as_matrix(x, "x")
    ym = as_matrix(y, "y")
    n, p = xm.shape
    values = feature_coefficients(xm, ym, method, tie_seed=tie_seed, bandwidth=bandwidth, sigma_sq=sigma_sq)
    if method is Method.DDC:
        variance = ddc_variance_estimate(ym)
        pvals = np.array([ddc_asymptotic_pvalue(v, variance) for v in values])
        return values, pvals
    if method is Method.CHATTERJEE:
        return values, np.array([chatterjee_asymptotic_pvalue(v, n) for v in values])
    perms = np.vstack([np.arange(n), random_permutations(n, permutations, seed)])
    b = _matrices.kernel_matrix(method, ym, bandwidth, sigma_sq)
    pvals = np.empty(p)
    step = max(1, BLOCK_ELEMENTS // (n * n))
    for start in range(0, p, step):
        cols = xm[:, start:start + step].T
        a = _matrices.column_kernel_matrices(method, cols, bandwidth, sigma_sq)
        stats = _matrices.permuted_values(_matrices.bilinear_form(method, a, b), perms)
        for k in range(cols.shape[0]):
            pvals[start + k] = add_one_pvalue(stats[0, k], stats[1:, k])
    return values, pvals


def screening_power_table(
    spec: SimulationSpec,
    methods: Sequence["Method | str"] = SCREENING_METHODS,
    level: float = 0.05,
    *,
    permutations: int = 500,
    predictors: Sequence[int] = ACTIVE_PREDICTORS,
    threads: int | None = 1,
) -> list[dict]:
    """Rejection frequency of each method's test between ``X_j`` and the response."""
    _require_multi_response(spec)
    parsed = [Method.parse(m) for m in methods]
    cols = list(predictors)

    def one(rep: int) -> np.ndarray:
        draw = spec.draw(rep)
        x = draw.x[:, cols]
        out = np.empty((len(parsed), len(cols)), dtype=bool)
        for k, method in enumerate(parsed):
            _, pvals = feature_pvalues(
                x, draw.y, method, permutations=permutations,
                seed=derive_seed(spec.seed, PERMUTATION_STREAM, rep, k),
                tie_seed=derive_seed(spec.seed, TIE_STREAM, rep),
            )
            out[k] = pvals <= level
        return out

    flags = np.array(parallel_map(one, range(spec.reps), threads))
    rows = []
    for k, method in enumerate(parsed):
        for c, j in enumerate(cols):
            rows.append({
                "method": method.label,
                "predictor": f"X{j + 1}",
                "power": float(flags[:, k, c].mean()),
                "rho": spec.rho,
                "n": spec.n,
                "p": spec.p,
                "reps": spec.reps,
                "level": level,
            })
    return rows
