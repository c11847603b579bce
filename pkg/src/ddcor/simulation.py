"""
Simulation designs and experiment drivers.

``Example 1`` draws ``X ~ U(-1, 1)`` and a scalar response from one of six
noisy functional models; ``Example 2`` draws equicorrelated Gaussian
predictors and a three-dimensional response driven by ``X1..X4``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from ._rng import SeedLike, derive_rng, derive_seed
from .errors import InvalidParameterError
from .inference import TIE_STREAM, parallel_map, rejection_flags
from .measures import Method, PairedSample, coefficient

DATA_STREAM = 0


class Model(str, Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    SINUSOID = "sinusoid"
    DAMPED_OSCILLATOR = "damped_oscillator"
    W_SHAPED = "w_shaped"
    STEP = "step"
    MULTI_RESPONSE = "multi_response"
    NULL_INDEPENDENT = "null_independent"

    @classmethod
    def parse(cls, value: "str | Model") -> "Model":
        if isinstance(value, Model):
            return value
        key = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        try:
            return cls(key)
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise InvalidParameterError(f"unknown model {value!r}; expected one of: {valid}") from None

    @property
    def code(self) -> int:
        return list(Model).index(self)


EXAMPLE1_MODELS = (
    Model.LINEAR,
    Model.QUADRATIC,
    Model.SINUSOID,
    Model.DAMPED_OSCILLATOR,
    Model.W_SHAPED,
    Model.STEP,
)
NOISE_MULTIPLIER = {
    Model.LINEAR: 3.0,
    Model.QUADRATIC: 2.0,
    Model.SINUSOID: 3.0,
    Model.DAMPED_OSCILLATOR: 4.0,
    Model.W_SHAPED: 0.75,
    Model.STEP: 10.0,
}
TABLE1_MODELS = (Model.QUADRATIC, Model.SINUSOID, Model.STEP)
TABLE1_LAMBDAS = (0.1, 0.3, 0.5, 0.7, 0.9)
DEFAULT_LAMBDA_GRID = tuple(round(0.1 * i, 1) for i in range(11))
ALL_METHODS = tuple(Method)


class Orientation(str, Enum):
    """Which Example 1 variable fills the vector slot of DDC / the ranked slot of xi."""

    Y_GIVEN_X = "y|x"
    X_GIVEN_Y = "x|y"


def model_function(model: "Model | str", x: np.ndarray) -> np.ndarray:
    """Noise-free response of an Example 1 model."""
    model = Model.parse(model)
    x = np.asarray(x, dtype=float)
    if model is Model.LINEAR:
        return x.copy()
    if model is Model.QUADRATIC:
        return x**2
    if model is Model.SINUSOID:
        return np.cos(8.0 * np.pi * x)
    if model is Model.DAMPED_OSCILLATOR:
        return np.exp(-2.0 * x) * np.sin(10.0 * x)
    if model is Model.W_SHAPED:
        return np.where(x < 0, np.abs(x + 0.5), np.abs(x - 0.5))
    if model is Model.STEP:
        return (
            -3.0 * ((x >= -1.0) & (x < -0.5))
            + 2.0 * ((x >= -0.5) & (x < 0.0))
            - 4.0 * ((x >= 0.0) & (x < 0.5))
            - 3.0 * ((x >= 0.5) & (x <= 1.0))
        )
    if model is Model.NULL_INDEPENDENT:
        return np.zeros_like(x)
    raise InvalidParameterError(f"{model.value} is not a univariate functional model")


def generate_example1(model: "Model | str", lam: float, n: int, seed: SeedLike = 0) -> PairedSample:
    """
    Draw ``n`` pairs from an Example 1 model.

    ``x ~ U(-1, 1)``; ``y = f(x) + c * lam * eps`` with ``eps ~ N(0, 1)`` and the
    model's noise multiplier ``c``.  ``NULL_INDEPENDENT`` returns ``y = eps``.
    The sample is returned raw (``x`` in the vector slot); see :func:`orient`.
    """
    model = Model.parse(model)
    if model not in EXAMPLE1_MODELS and model is not Model.NULL_INDEPENDENT:
        raise InvalidParameterError(f"{model.value} is not an Example 1 model")
    if lam < 0:
        raise InvalidParameterError(f"noise level must be nonnegative, got {lam}")
    rng = derive_rng(seed)
    x = rng.uniform(-1.0, 1.0, n)
    eps = rng.standard_normal(n)
    if model is Model.NULL_INDEPENDENT:
        return PairedSample(x, eps)
    return PairedSample(x, model_function(model, x) + NOISE_MULTIPLIER[model] * lam * eps)


def orient(sample: PairedSample, orientation: "Orientation | str" = Orientation.Y_GIVEN_X) -> PairedSample:
    """Arrange a raw univariate ``(x, y)`` sample for the asymmetric coefficients.

    ``y|x`` puts the response in the vector slot and conditions on ``x``,
    so DDC and xi reach 1 when ``y`` is a function of ``x``.
    """
    if Orientation(orientation) is Orientation.Y_GIVEN_X:
        return PairedSample(sample.y, sample.x[:, 0])
    return sample


def example2_link(x: np.ndarray) -> np.ndarray:
    """``f(x) = 0.5 cos(2 pi x) + cos^2(2 pi x) - 1.5 sin^3(2 pi x)``."""
    c = np.cos(2.0 * np.pi * x)
    s = np.sin(2.0 * np.pi * x)
    return 0.5 * c + c**2 - 1.5 * s**3


@dataclass(frozen=True)
class MultiResponseDraw:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        if self.y.ndim != 2 or self.y.shape[1] != 3:
            raise InvalidParameterError(f"y must have exactly 3 columns, got shape {self.y.shape}")
        if self.x.shape[0] != self.y.shape[0]:
            raise InvalidParameterError("x and y row counts differ")


def equicorrelated_normal(rng: np.random.Generator, n: int, p: int, rho: float) -> np.ndarray:
    """Rows from ``N(0, Sigma)`` with unit variances and common correlation ``rho``."""
    if not -1.0 < rho < 1.0:
        raise InvalidParameterError(f"rho must lie in (-1, 1), got {rho}")
    if rho >= 0:
        common = rng.standard_normal((n, 1))
        return math.sqrt(rho) * common + math.sqrt(1.0 - rho) * rng.standard_normal((n, p))
    sigma = np.full((p, p), rho)
    np.fill_diagonal(sigma, 1.0)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise InvalidParameterError(
            f"rho={rho} gives a non-positive-definite covariance for p={p}"
        ) from None
    return rng.standard_normal((n, p)) @ chol.T


def generate_example2(
    rho: float,
    n: int,
    p: int,
    seed: SeedLike = 0,
    *,
    noise_scale: float = 0.5,
    z_per_row: bool = False,
) -> MultiResponseDraw:
    """
    Draw from the three-response model driven by the first four predictors.

    ``y = g(X1, X2, X3) + Z f(X4) + noise_scale * eps`` where ``Z`` is a random
    standard basis vector of R^3 and ``eps ~ N(0, I_3)``.  By default ``Z`` is
    drawn once per data set, so ``f(X4)`` lands on a single response
    coordinate; ``z_per_row=True`` redraws it for every observation.
    """
    if p < 4:
        raise InvalidParameterError(f"the model needs p >= 4 predictors, got {p}")
    rng = derive_rng(seed)
    x = equicorrelated_normal(rng, n, p, rho)
    x1, x2, x3, x4 = x[:, 0], x[:, 1], x[:, 2], x[:, 3]
    base = np.column_stack([
        0.2 * x1 + 0.2 * x2**2 + np.sin(4.0 * np.pi * x3),
        0.4 * x1 + 0.3 * x2**2 + np.cos(8.0 * np.pi * x3),
        0.6 * x1 - 0.5 * x2**2 - np.cos(4.0 * np.pi * x3**2),
    ])
    z = np.eye(3)[rng.integers(0, 3, n if z_per_row else 1)]
    eps = rng.standard_normal((n, 3))
    y = base + z * example2_link(x4)[:, None] + noise_scale * eps
    return MultiResponseDraw(x, y)


@dataclass(frozen=True)
class SimulationSpec:
    """One simulation design; replication ``r`` is a pure function of ``(spec, r)``."""

    model: Model
    lam: float = 0.0
    rho: float = 0.0
    n: int = 100
    p: int = 1
    seed: int = 0
    reps: int = 500
    orientation: Orientation = Orientation.Y_GIVEN_X
    z_per_row: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "model", Model.parse(self.model))
        object.__setattr__(self, "orientation", Orientation(self.orientation))
        if self.n < 2:
            raise InvalidParameterError(f"n must be >= 2, got {self.n}")
        if self.reps < 1:
            raise InvalidParameterError(f"reps must be >= 1, got {self.reps}")
        if self.model in EXAMPLE1_MODELS and not 0.0 <= self.lam <= 1.0:
            raise InvalidParameterError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.model is Model.MULTI_RESPONSE:
            if self.p < 4:
                raise InvalidParameterError(f"p must be >= 4 for the multi-response model, got {self.p}")
            if not -1.0 < self.rho < 1.0:
                raise InvalidParameterError(f"rho must lie in (-1, 1), got {self.rho}")

    def replication_seed(self, rep: int) -> int:
        design = round(self.lam * 1e6) if self.model is not Model.MULTI_RESPONSE else round(self.rho * 1e6)
        return derive_seed(self.seed, DATA_STREAM, self.model.code, design, rep)

    def raw_sample(self, rep: int) -> PairedSample:
        return generate_example1(self.model, self.lam, self.n, self.replication_seed(rep))

    def sample(self, rep: int) -> PairedSample:
        """Replication ``rep`` arranged per ``orientation``."""
        return orient(self.raw_sample(rep), self.orientation)

    def draw(self, rep: int) -> MultiResponseDraw:
        if self.model is not Model.MULTI_RESPONSE:
            raise InvalidParameterError("draw() is only defined for the multi-response model")
        return generate_example2(
            self.rho, self.n, self.p, self.replication_seed(rep), z_per_row=self.z_per_row
        )


def _parse_methods(methods: Sequence["Method | str"]) -> list[Method]:
    return [Method.parse(m) for m in methods]


def coefficient_mean_table(
    models: Sequence["Model | str"] = TABLE1_MODELS,
    lambdas: Sequence[float] = TABLE1_LAMBDAS,
    methods: Sequence["Method | str"] = ALL_METHODS,
    n: int = 100,
    reps: int = 500,
    seed: int = 0,
    *,
    orientation: "Orientation | str" = Orientation.Y_GIVEN_X,
    threads: int | None = 1,
) -> list[dict]:
    """Mean (and SD) of each coefficient over ``reps`` draws, one row per (model, lambda, method)."""
    parsed = _parse_methods(methods)
    rows = []
    for model in models:
        for lam in lambdas:
            spec = SimulationSpec(Model.parse(model), lam=lam, n=n, seed=seed, reps=reps,
                                  orientation=Orientation(orientation))

            def one(rep: int, spec=spec) -> list[float]:
                sample = spec.sample(rep)
                tie_seed = derive_seed(spec.seed, TIE_STREAM, rep)
                return [coefficient(m, sample, tie_seed=tie_seed) for m in parsed]

            values = np.array(parallel_map(one, range(reps), threads))
            for k, method in enumerate(parsed):
                column = values[:, k]
                rows.append({
                    "model": spec.model.value,
                    "lambda": float(lam),
                    "method": method.label,
                    "mean": float(column.mean()),
                    "sd": float(column.std(ddof=1)) if reps > 1 else 0.0,
                    "n": n,
                    "reps": reps,
                })
    return rows


def power_curve(
    models: Sequence["Model | str"] = EXAMPLE1_MODELS,
    lambdas: Sequence[float] = DEFAULT_LAMBDA_GRID,
    methods: Sequence["Method | str"] = ALL_METHODS,
    n: int = 100,
    reps: int = 500,
    level: float = 0.05,
    seed: int = 0,
    *,
    permutations: int = 500,
    orientation: "Orientation | str" = Orientation.Y_GIVEN_X,
    threads: int | None = 1,
) -> list[dict]:
    """Long-format power table: one row per (model, lambda, method).

    All methods are evaluated on the same replications of each design.
    """
    parsed = _parse_methods(methods)
    rows = []
    for model in models:
        for lam in lambdas:
            spec = SimulationSpec(Model.parse(model), lam=lam, n=n, seed=seed, reps=reps,
                                  orientation=Orientation(orientation))
            flags = rejection_flags(spec, parsed, level, reps, permutations=permutations, threads=threads)
            for k, method in enumerate(parsed):
                rows.append({
                    "model": spec.model.value,
                    "lambda": float(lam),
                    "method": method.label,
                    "power": float(flags[:, k].mean()),
                    "n": n,
                    "reps": reps,
                    "level": level,
                })
    return rows
