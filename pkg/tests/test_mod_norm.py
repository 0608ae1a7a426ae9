from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from app.corpus import make_function
from app.decomposition import Grid, SampledFunction, make_window
from app.errors import DomainError, GridRangeError
from app.mod_norm import (
    NormParams,
    aggregate,
    contribution_decay_slope,
    derivative_growth_check,
    embedding_check,
    fatou_check,
    frequency_indices,
    local_norms,
    lp_norm,
    modulation_norm,
    spectral_derivative,
    spectral_truncation,
    window_equivalence,
)
from app.weight_core import make_weight
from app.weight_sequence import associated_sequence


def test_lp_norms_of_gaussian(gaussian):
    assert lp_norm(gaussian, 2.0) == pytest.approx(math.pi**0.25, rel=1e-10)
    assert lp_norm(gaussian, 1.0) == pytest.approx(math.sqrt(2.0 * math.pi), rel=1e-10)
    assert lp_norm(gaussian, math.inf) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        lp_norm(gaussian, 0.5)


def test_aggregate():
    assert aggregate([3.0, 4.0], 2.0) == pytest.approx(5.0)
    assert aggregate([3.0, 4.0], 1.0) == pytest.approx(7.0)
    assert aggregate([3.0, 4.0], math.inf) == 4.0
    assert aggregate([], 2.0) == 0.0
    assert aggregate([0.0, 0.0], 3.0) == 0.0
    assert aggregate([1e-200, 1e-200], 4.0) == pytest.approx(2.0**0.25 * 1e-200)


def test_frequency_indices_are_lexicographic():
    ks = frequency_indices(2, 1)
    assert len(ks) == 9
    assert ks[0] == (-1, -1) and ks[-1] == (1, 1)
    assert ks == sorted(ks)


def test_norm_params_validation(gevrey2):
    with pytest.raises(DomainError):
        NormParams(0.5, 1.0, gevrey2)
    with pytest.raises(DomainError):
        NormParams(2.0, 1.0, gevrey2, k_max=1)


def test_gaussian_norm_is_certified(gaussian, gevrey2):
    result = modulation_norm(gaussian, NormParams(2.0, 1.0, gevrey2))
    assert result.certified
    assert result.tail_estimate == 0.0
    assert result.value > lp_norm(gaussian, 2.0)
    assert len(result.contributions) == 97
    assert not result.boundary_warning


@settings(max_examples=15, deadline=None)
@given(amplitude=st.floats(min_value=1e-3, max_value=1e3))
def test_norm_is_homogeneous(amplitude):
    f = make_function("gaussian:sigma=1", Grid())
    params = NormParams(2.0, 1.0, make_weight("gevrey:s=2"), k_max=16)
    base = modulation_norm(f, params).value
    assert modulation_norm(f.scaled(amplitude), params).value == pytest.approx(amplitude * base, rel=1e-12)


def test_norm_decreases_in_q(gaussian, gevrey2):
    ell1 = modulation_norm(gaussian, NormParams(2.0, 1.0, gevrey2)).value
    ell2 = modulation_norm(gaussian, NormParams(2.0, 2.0, gevrey2)).value
    ellinf = modulation_norm(gaussian, NormParams(2.0, math.inf, gevrey2)).value
    assert ellinf <= ell2 <= ell1


def test_norm_of_zero_function(grid, gevrey2):
    result = modulation_norm(SampledFunction.zeros(grid), NormParams(2.0, 1.0, gevrey2))
    assert result.value == 0.0
    assert result.certified


def test_growing_shells_are_not_certified(grid, gevrey2):
    wide = make_function("gaussian:sigma=0.2", grid)
    result = modulation_norm(wide, NormParams(2.0, 1.0, gevrey2, k_max=4))
    assert not result.certified
    assert math.isinf(result.tail_estimate)


def test_norm_is_deterministic_across_workers(gaussian, gevrey2):
    params = NormParams(1.0, 2.0, gevrey2, k_max=12)
    assert modulation_norm(gaussian, params, workers=1) == modulation_norm(gaussian, params, workers=4)


def test_local_norms_respect_grid_range(gaussian):
    with pytest.raises(GridRangeError):
        local_norms(gaussian, 2.0, 250)


def test_contributions_decay_against_weight(gaussian, gevrey2):
    result = modulation_norm(gaussian, NormParams(2.0, 1.0, gevrey2))
    assert contribution_decay_slope(result, gevrey2) < 0.0


def test_embeddings_in_q(gaussian, gevrey2):
    report = embedding_check(gaussian, gevrey2, [((2.0, 1.0), (2.0, 2.0)), ((2.0, 2.0), (2.0, math.inf))], k_max=24)
    assert all(0 < row.ratio <= 1.0 + 1e-12 for row in report.rows)
    with pytest.raises(DomainError):
        embedding_check(gaussian, gevrey2, [((2.0, 2.0), (2.0, 1.0))])


def test_window_independence(grid, gaussian, gevrey2):
    shifted = make_function("gaussian:sigma=0.5,c=0.5", grid)
    report = window_equivalence([gaussian, shifted], gevrey2, k_max=24)
    assert report.equivalent
    assert 0.1 <= report.lower <= report.upper <= 10.0


def test_fatou_property(gaussian, gevrey2):
    report = fatou_check(gaussian, NormParams(2.0, 1.0, gevrey2, k_max=24))
    assert report.holds
    assert report.cutoffs[-1] == gaussian.grid.xi_max
    assert report.truncated_norms[-1] == pytest.approx(report.full_norm, rel=1e-12)
    assert report.truncated_norms[0] <= report.truncated_norms[-1]


def test_spectral_truncation_keeps_low_frequencies(gaussian):
    assert np.max(np.abs(spectral_truncation(gaussian, gaussian.grid.xi_max).values - gaussian.values)) < 1e-12


def test_spectral_derivative_of_gaussian(grid, gaussian):
    x = grid.x_axis()
    assert_allclose(spectral_derivative(gaussian, 1).values, 1j * x * np.exp(-x**2 / 2.0), atol=1e-10)
    assert_allclose(spectral_derivative(gaussian, 2).values, (1.0 - x**2) * np.exp(-x**2 / 2.0), atol=1e-10)
    with pytest.raises(DomainError):
        spectral_derivative(gaussian, (1, 1))


def test_derivative_growth(gaussian, gevrey2):
    seq = associated_sequence(gevrey2, p_max=8)
    report = derivative_growth_check(gaussian, gevrey2, seq, a_max=8)
    assert len(report.per_order) == 9
    assert 0.0 < report.C_star < math.inf
    assert not report.amplification_warning
    with pytest.raises(DomainError):
        derivative_growth_check(gaussian, gevrey2, seq, a_max=13)
    with pytest.raises(DomainError):
        derivative_growth_check(gaussian, gevrey2, associated_sequence(gevrey2, p_max=4), a_max=6)


def test_custom_partition_changes_little(gaussian, gevrey2):
    a = modulation_norm(gaussian, NormParams(2.0, 1.0, gevrey2, partition=make_window(0.5))).value
    b = modulation_norm(gaussian, NormParams(2.0, 1.0, gevrey2, partition=make_window(0.3))).value
    assert 0.5 < a / b < 2.0


@settings(max_examples=10, deadline=None)
@given(
    m1=st.integers(min_value=-6, max_value=6),
    m2=st.integers(min_value=-6, max_value=6),
    a=st.floats(min_value=0.1, max_value=10.0),
    b=st.floats(min_value=0.1, max_value=10.0),
)
def test_norm_satisfies_triangle_inequality(m1, m2, a, b):
    grid = Grid()
    params = NormParams(2.0, 1.0, make_weight("gevrey:s=2"), k_max=16)
    f = make_function(f"gaussian:sigma=1,m={m1}", grid).scaled(a)
    g = make_function(f"gaussian:sigma=1,m={m2}", grid).scaled(b)
    total = modulation_norm(f + g, params).value
    assert total <= (modulation_norm(f, params).value + modulation_norm(g, params).value) * (1.0 + 1e-10)


def test_modulated_gaussian_peaks_at_its_frequency(grid, gevrey2):
    f = make_function("gaussian:sigma=1,m=5", grid)
    result = modulation_norm(f, NormParams(2.0, 1.0, gevrey2, k_max=16))
    k, _ = max(result.contributions, key=lambda item: item[1])
    assert list(k) == [5]


def test_derivative_growth_needs_positive_index(gaussian, loglog):
    seq = associated_sequence(loglog, p_max=4)
    with pytest.raises(DomainError):
        derivative_growth_check(gaussian, loglog, seq, a_max=2)
