import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import ortho_group

import oracles
from ddcor.errors import (
    DegenerateResponseError,
    InsufficientSampleError,
    InvalidDataError,
    InvalidParameterError,
)
from ddcor.measures import (
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
    sort_by_conditioner,
    tie_broken_order,
)


def rel_close(a, b, tol=1e-10):
    return abs(a - b) <= tol * max(1.0, abs(b))


# ---------------------------------------------------------------------------
# PairedSample
# ---------------------------------------------------------------------------

def test_paired_sample_rejects_nan():
    with pytest.raises(InvalidDataError):
        PairedSample([1.0, np.nan, 2.0], [1.0, 2.0, 3.0])


def test_paired_sample_rejects_length_mismatch():
    with pytest.raises(InvalidDataError):
        PairedSample(np.zeros((3, 2)), [1.0, 2.0])


def test_paired_sample_shapes():
    s = PairedSample([1.0, 2.0, 3.0], [3.0, 2.0, 1.0])
    assert (s.n, s.p) == (3, 1)


def test_sorted_sample_permutation():
    rng = np.random.default_rng(3)
    y = rng.integers(0, 4, 40).astype(float)
    s = sort_by_conditioner(PairedSample(rng.normal(size=40), y), tie_seed=9)
    assert sorted(s.permutation.tolist()) == list(range(40))
    assert np.all(np.diff(s.y_sorted) >= 0)


def test_tie_breaking_depends_on_seed_only():
    y = np.repeat([0.0, 1.0], 50)
    a = tie_broken_order(y, 1)
    assert np.array_equal(a, tie_broken_order(y, 1))
    assert not np.array_equal(a, tie_broken_order(y, 2))


def test_method_aliases():
    assert Method.parse("xi") is Method.CHATTERJEE
    assert Method.parse("DCOR") is Method.DC
    with pytest.raises(InvalidParameterError):
        Method.parse("spearman")


# ---------------------------------------------------------------------------
# Gini mean difference
# ---------------------------------------------------------------------------

def test_gini_example():
    assert gini_mean_difference([1.0, 2.0, 3.0]) == pytest.approx(4.0 / 3.0, abs=1e-15)


def test_gini_constant():
    assert gini_mean_difference(np.full((7, 3), 2.5)) == 0.0
    assert gini_mean_difference(np.full(7, 1e9)) == 0.0


def test_gini_uniform_population():
    x = np.random.default_rng(0).uniform(size=100_000)
    assert gini_mean_difference(x) == pytest.approx(1.0 / 3.0, abs=0.01)


def test_gini_errors():
    with pytest.raises(InsufficientSampleError):
        gini_mean_difference([1.0])
    with pytest.raises(InvalidDataError):
        gini_mean_difference([1.0, np.inf])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.integers(2, 60), elements=st.floats(-1e3, 1e3)))
def test_gini_fast_path_matches_pairs(x):
    naive = np.abs(x[:, None] - x[None, :]).sum() / (x.size * (x.size - 1))
    assert gini_mean_difference(x) == pytest.approx(naive, rel=1e-12, abs=1e-9)


def test_gini_multivariate_matches_oracle():
    x = np.random.default_rng(1).normal(size=(9, 3))
    assert rel_close(gini_mean_difference(x), oracles.gini(x), 1e-12)


# ---------------------------------------------------------------------------
# DDC
# ---------------------------------------------------------------------------

def test_ddc_monotone_example():
    v = [1.0, 2.0, 3.0, 4.0, 5.0]
    assert ddc(PairedSample(v, v)) == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("n", [3, 8, 50])
def test_ddc_equally_spaced_closed_form(n):
    v = np.arange(n, dtype=float)
    assert ddc(PairedSample(v, v)) == pytest.approx(1 - 3 / (n + 1), abs=1e-13)


def test_ddc_constant_x_is_zero():
    s = PairedSample(np.ones((6, 2)), np.arange(6.0))
    assert ddc(s) == 0.0


def test_ddc_needs_two_rows():
    with pytest.raises(InsufficientSampleError):
        ddc(PairedSample([1.0], [1.0]))


@pytest.mark.parametrize("rho", [0.3, 0.6, 0.9])
def test_ddc_bivariate_normal_population(rho):
    rng = np.random.default_rng(int(rho * 10))
    n = 20_000
    z = rng.standard_normal((n, 2))
    x = z[:, 0]
    y = rho * x + math.sqrt(1 - rho * rho) * z[:, 1]
    assert ddc(PairedSample(x, y)) == pytest.approx(1 - math.sqrt(1 - rho * rho), abs=0.015)


def test_ddc_with_ties_matches_oracle_in_same_order():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(12, 2))
    y = rng.integers(0, 3, 12).astype(float)
    order = tie_broken_order(y, 5).tolist()
    assert rel_close(ddc(PairedSample(x, y), tie_seed=5), oracles.ddc(x, y, order))


def test_ddc_tied_y_reproducible():
    rng = np.random.default_rng(5)
    s = PairedSample(rng.normal(size=200), rng.integers(0, 2, 200).astype(float))
    assert ddc(s, tie_seed=11) == ddc(s, tie_seed=11)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(2, 40),
    st.integers(1, 4),
    st.integers(0, 2**32 - 1),
)
def test_ddc_upper_bound(n, p, seed):
    rng = np.random.default_rng(seed)
    s = PairedSample(rng.normal(size=(n, p)), rng.normal(size=n))
    assert ddc(s) <= 1.0


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 40), st.integers(0, 2**32 - 1))
def test_ddc_joint_reordering_invariance(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 2))
    y = rng.permutation(n).astype(float)
    perm = rng.permutation(n)
    assert rel_close(ddc(PairedSample(x, y)), ddc(PairedSample(x[perm], y[perm])))


@settings(max_examples=40, deadline=None)
@given(
    st.integers(3, 50),
    st.integers(1, 4),
    st.floats(0.1, 10.0),
    st.booleans(),
    st.integers(0, 2**32 - 1),
)
def test_ddc_transformation_invariance(n, p, scale, decreasing, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, p))
    y = rng.permutation(n).astype(float) + rng.uniform(0, 0.5, n)
    c = ortho_group.rvs(p, random_state=rng) if p > 1 else np.array([[1.0]])
    shift = rng.normal(size=p) * 10
    sign = -1.0 if rng.random() < 0.5 else 1.0
    hy = -np.exp(y / n) if decreasing else y**3
    before = ddc(PairedSample(x, y))
    after = ddc(PairedSample(sign * scale * x @ c.T + shift, hy))
    assert rel_close(after, before, 1e-10)


# ---------------------------------------------------------------------------
# Chatterjee
# ---------------------------------------------------------------------------

def test_chatterjee_monotone_examples():
    v = np.arange(1.0, 6.0)
    assert chatterjee_xi(v, v) == pytest.approx(0.5, abs=1e-14)
    assert chatterjee_xi(v, v[::-1]) == pytest.approx(0.5, abs=1e-14)


def test_chatterjee_independent_near_zero():
    rng = np.random.default_rng(6)
    assert abs(chatterjee_xi(rng.normal(size=10_000), rng.normal(size=10_000))) < 0.03


def test_chatterjee_constant_response():
    with pytest.raises(DegenerateResponseError):
        chatterjee_xi([1.0, 2.0, 3.0], [4.0, 4.0, 4.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 60), st.integers(0, 2**32 - 1))
def test_chatterjee_tie_free_simplified_form(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.permutation(n).astype(float)
    y = rng.permutation(n).astype(float)
    ys = y[np.argsort(x)]
    r = np.argsort(np.argsort(ys)) + 1
    expected = 1 - 3 * np.abs(np.diff(r)).sum() / (n * n - 1)
    assert chatterjee_xi(x, y) == pytest.approx(expected, abs=1e-13)


def test_chatterjee_sample_orientation():
    # Sort by the conditioner y, rank the vector slot x.
    rng = np.random.default_rng(7)
    x, y = rng.normal(size=30), rng.normal(size=30)
    assert coefficient(Method.CHATTERJEE, PairedSample(x, y)) == chatterjee_xi(y, x)


# ---------------------------------------------------------------------------
# DC, HSIC, PCor
# ---------------------------------------------------------------------------

def test_dc_self_and_constant():
    x = np.random.default_rng(8).normal(size=30)
    assert distance_correlation(x, x) == pytest.approx(1.0, abs=1e-12)
    assert distance_correlation(np.ones(30), x) == 0.0


def test_dc_tiny_grid_oracle():
    x = np.array([0.0, 1.0, 2.0, 0.0, 1.0])
    y = np.array([1.0, 0.0, 1.0, 2.0, 2.0])
    assert rel_close(distance_correlation(x, y), oracles.dcor_sq(x, y), 1e-12)


def test_hsic_constant_and_oracle():
    x = np.array([0.3, -1.2, 0.8, 2.0])
    y = np.array([1.0, 0.5, -0.7, 0.1])
    assert hsic(np.ones(4), y) == pytest.approx(0.0, abs=1e-15)
    assert rel_close(hsic(x, y), oracles.hsic(x, y), 1e-12)


def test_hsic_independent_near_zero():
    rng = np.random.default_rng(9)
    assert hsic(rng.normal(size=10_000), rng.normal(size=10_000)) < 0.01


def test_hsic_bandwidth_validated():
    with pytest.raises(InvalidParameterError):
        hsic(np.arange(5.0), np.arange(5.0), bandwidth=0.0)


def test_pcor_self_and_oracle():
    x = np.array([0.3, -1.2, 0.8, 2.0])
    y = np.array([1.0, 0.5, -0.7, 0.1])
    assert projection_correlation(x, x) == pytest.approx(1.0, abs=1e-12)
    assert rel_close(projection_correlation(x, y), oracles.pcor(x, y), 1e-10)


def test_pcor_independent_near_zero():
    rng = np.random.default_rng(10)
    assert abs(projection_correlation(rng.normal(size=5000), rng.normal(size=5000))) < 0.02


def test_pcor_parameter_checks():
    with pytest.raises(InvalidParameterError):
        projection_correlation(np.arange(5.0), np.arange(5.0), sigma_sq=-1.0)
    with pytest.raises(InsufficientSampleError):
        projection_correlation(np.arange(3.0), np.arange(3.0))


def test_pcor_v_statistic_nonnegative():
    rng = np.random.default_rng(11)
    for _ in range(20):
        v = projection_correlation(rng.normal(size=8), rng.normal(size=8), unbiased=False)
        assert 0.0 <= v <= 1.0 + 1e-12


@pytest.mark.parametrize("trial", range(25))
def test_all_coefficients_match_oracles(trial):
    rng = np.random.default_rng(1000 + trial)
    n = int(rng.integers(4, 13))
    p = (1, 3)[trial % 2]
    x = rng.normal(size=(n, p))
    y = rng.normal(size=n)
    s = PairedSample(x, y)
    assert rel_close(coefficient("ddc", s), oracles.ddc(x, y))
    assert rel_close(distance_correlation(x, y), oracles.dcor_sq(x, y))
    assert rel_close(hsic(x, y), oracles.hsic(x, y))
    assert rel_close(projection_correlation(x, y), oracles.pcor(x, y))
    xi_x = x[:, 0]
    assert rel_close(chatterjee_xi(y, xi_x), oracles.chatterjee(y, xi_x))


def test_estimate_records_params():
    s = PairedSample(np.arange(10.0), np.arange(10.0)[::-1])
    est = estimate("hsic", s, bandwidth=2.0)
    assert est.params["bandwidth"] == 2.0
    assert (est.n, est.p, est.method) == (10, 1, Method.HSIC)
    assert 0.0 <= estimate("dc", s).value <= 1.0
