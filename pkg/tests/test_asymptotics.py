import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ortho_group

import oracles
from ddcor.asymptotics import (
    VarianceEstimate,
    chatterjee_asymptotic_pvalue,
    ddc_asymptotic_pvalue,
    ddc_variance_estimate,
    distance_moments,
    distance_variance_sq,
    normal_upper_tail,
    reference_dvar_sq,
    reference_gini,
    reference_sigma_sq,
)
from ddcor.errors import DegenerateSampleError, DegenerateVarianceError, InsufficientSampleError


def rel_close(a, b, tol=1e-10):
    return abs(a - b) <= tol * max(1.0, abs(b))


def test_dvar_constant_is_zero():
    assert distance_variance_sq(np.full((5, 2), 3.0)) == 0.0


def test_dvar_small_oracle():
    x = np.array([0.2, 1.5, -0.7, 3.1])
    assert rel_close(distance_variance_sq(x), oracles.dvar_sq(x), 1e-12)


def test_dvar_needs_two_rows():
    with pytest.raises(InsufficientSampleError):
        distance_variance_sq([1.0])


def test_dvar_normal_population():
    x = np.random.default_rng(0).standard_normal(20_000)
    assert distance_variance_sq(x) == pytest.approx(reference_dvar_sq("standard_normal"), abs=0.01)


@pytest.mark.parametrize("trial", range(50))
def test_dvar_fast_path_matches_double_centring(trial):
    rng = np.random.default_rng(trial)
    n = int(rng.integers(10, 2001))
    x = rng.normal(size=n) * rng.uniform(0.1, 10)
    a = np.abs(x[:, None] - x[None, :])
    a = a - a.mean(axis=0) - a.mean(axis=1)[:, None] + a.mean()
    assert rel_close(distance_variance_sq(x), float((a * a).mean()), 1e-10)


def test_dvar_multivariate_oracle():
    x = np.random.default_rng(2).normal(size=(11, 3))
    assert rel_close(distance_variance_sq(x), oracles.dvar_sq(x), 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 80), st.floats(0.01, 100.0), st.integers(0, 2**32 - 1))
def test_dvar_scale_equivariance(n, a, seed):
    x = np.random.default_rng(seed).normal(size=(n, 2))
    assert rel_close(distance_variance_sq(a * x), a * a * distance_variance_sq(x), 1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 60), st.integers(2, 4), st.floats(0.1, 10.0), st.integers(0, 2**32 - 1))
def test_sigma_hat_invariances(n, p, a, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, p))
    base = ddc_variance_estimate(x).sigma_hat_sq
    c = ortho_group.rvs(p, random_state=rng)
    moved = x @ c.T + rng.normal(size=p)
    assert rel_close(ddc_variance_estimate(a * x).sigma_hat_sq, base, 1e-10)
    assert rel_close(ddc_variance_estimate(moved).sigma_hat_sq, base, 1e-10)


def test_dvar_nonnegative_and_zero_iff_constant():
    rng = np.random.default_rng(3)
    for n in range(2, 30):
        assert distance_variance_sq(rng.normal(size=(n, 2))) > 0


def test_variance_estimate_consistency():
    x = np.random.default_rng(4).uniform(size=300)
    v = ddc_variance_estimate(x)
    assert v.sigma_hat_sq == v.dvar_sq / v.delta_hat**2
    assert v.delta_hat > 0 and v.n == 300


def test_variance_estimate_degenerate():
    with pytest.raises(DegenerateSampleError):
        ddc_variance_estimate(np.ones(10))


def test_variance_estimate_two_distinct_rows():
    x = np.array([[0.0, 1.0], [2.0, -1.0]] * 3)
    v = ddc_variance_estimate(x)
    assert v.sigma_hat_sq > 0
    assert rel_close(v.sigma_hat_sq, oracles.dvar_sq(x) / oracles.gini(x) ** 2, 1e-12)


@pytest.mark.parametrize(
    "dist, draw",
    [("standard_normal", lambda r, n: r.standard_normal(n)), ("standard_uniform", lambda r, n: r.uniform(size=n))],
)
def test_sigma_hat_population(dist, draw):
    x = draw(np.random.default_rng(5), 20_000)
    assert ddc_variance_estimate(x).sigma_hat_sq == pytest.approx(reference_sigma_sq(dist), abs=0.01)


def test_reference_constants():
    assert reference_sigma_sq("standard_normal") == pytest.approx(math.pi / 3 - math.sqrt(3) + 1, abs=1e-15)
    assert reference_sigma_sq("standard_normal") == pytest.approx(0.3151, abs=1e-4)
    assert reference_sigma_sq("standard_uniform") == 0.4
    assert reference_dvar_sq("standard_uniform") / reference_gini("standard_uniform") ** 2 == pytest.approx(0.4, abs=1e-14)
    assert reference_gini("standard_normal") == pytest.approx(2 / math.sqrt(math.pi))


def test_distance_moments_uniform():
    x = np.random.default_rng(6).uniform(size=100_000)
    second, gini_sq, cross = distance_moments(x)
    assert second == pytest.approx(1 / 6, abs=0.005)
    assert gini_sq == pytest.approx(1 / 9, abs=0.005)
    assert cross == pytest.approx(7 / 60, abs=0.005)


def test_distance_moments_small_exact():
    x = np.array([0.0, 1.0, 3.0])
    d = np.abs(x[:, None] - x[None, :])
    second, gini_sq, cross = distance_moments(x)
    assert second == pytest.approx((d**2).sum() / 6)
    assert gini_sq == pytest.approx((d.sum() / 6) ** 2)
    triples = [d[i, j] * d[i, k] for i in range(3) for j in range(3) for k in range(3) if len({i, j, k}) == 3]
    assert cross == pytest.approx(sum(triples) / 6)


def _variance(sigma_sq, n=100):
    return VarianceEstimate(sigma_sq, 1.0, sigma_sq, n)


def test_ddc_pvalue_examples():
    v = _variance(0.25, 100)
    assert ddc_asymptotic_pvalue(0.0, v) == 0.5
    ddc_value = 1.6448536 * 0.5 / 10
    assert ddc_asymptotic_pvalue(ddc_value, v) == pytest.approx(0.05, abs=1e-6)


def test_ddc_pvalue_degenerate():
    with pytest.raises(DegenerateVarianceError):
        ddc_asymptotic_pvalue(0.1, _variance(0.0))


def test_ddc_pvalue_monotone():
    v = _variance(0.3)
    values = [ddc_asymptotic_pvalue(d, v) for d in np.linspace(-0.3, 0.3, 25)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_chatterjee_pvalue_examples():
    assert chatterjee_asymptotic_pvalue(0.0, 50) == 0.5
    n = 400
    xi = 2.3263479 * math.sqrt(0.4) / math.sqrt(n)
    assert chatterjee_asymptotic_pvalue(xi, n) == pytest.approx(0.01, abs=1e-6)


def test_upper_tail_keeps_precision():
    assert normal_upper_tail(30.0) > 0.0
    assert normal_upper_tail(-40.0) == 1.0


def test_chatterjee_null_calibration():
    from ddcor.measures import chatterjee_xi

    rng = np.random.default_rng(7)
    rejections = 0
    for _ in range(1000):
        x, y = rng.normal(size=500), rng.normal(size=500)
        rejections += chatterjee_asymptotic_pvalue(chatterjee_xi(x, y), 500) <= 0.05
    assert 0.035 <= rejections / 1000 <= 0.07
