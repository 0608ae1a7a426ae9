from __future__ import annotations

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.corpus import (
    ALGEBRA_CORPUS,
    canonical_function_id,
    fourier_decay_fit,
    gevrey_bump_density,
    gevrey_order,
    make_corpus,
    make_function,
    odd_density,
    parse_function_id,
    phi_mu,
    psi_mu,
    sampled_peaks,
    stretched_exp_density,
)
from app.decomposition import Grid
from app.errors import BoundaryDecayError, DomainError, SpecParseError


@pytest.mark.parametrize(
    "text,canonical",
    [
        ("gaussian:sigma=1", "gaussian:sigma=1"),
        ("gaussian", "gaussian:sigma=1"),
        ("gaussian:c=0.5,sigma=0.5", "gaussian:sigma=0.5,c=0.5"),
        ("gaussian:sigma=1,m=3", "gaussian:sigma=1,m=3"),
        ("gevrey:mu=-1", "gevrey:mu=-1"),
        ("gevrey:mu=-2.0,width=2", "gevrey:mu=-2,width=2"),
        ("psi:mu=-1", "psi:mu=-1"),
        ("window", "window"),
        ("window:plateau=0.3,amp=2", "window:plateau=0.3,amp=2"),
    ],
)
def test_canonical_ids(text, canonical):
    assert canonical_function_id(parse_function_id(text)) == canonical


def test_modulated_gaussian_kind():
    assert parse_function_id("gaussian:sigma=1,m=3").kind == "modulated_gaussian"
    assert parse_function_id("gaussian:sigma=1").kind == "gaussian"


@pytest.mark.parametrize("text", ["unknown", "gevrey:mu=1", "gevrey", "gaussian:foo=1", "gaussian:sigma=x", "window:sigma"])
def test_bad_ids(text):
    with pytest.raises(SpecParseError):
        parse_function_id(text)


def test_gevrey_building_blocks():
    t = np.array([-0.5, 0.0, 0.5, 1.0, 1.5])
    assert_allclose(psi_mu(t, -1.0), [0.0, 0.0, math.exp(-2.0), math.exp(-1.0), math.exp(-1.0 / 1.5)])
    assert_allclose(phi_mu(t, -1.0), [0.0, 0.0, math.exp(-4.0), 0.0, 0.0])
    assert gevrey_order(-1.0) == 2.0
    assert gevrey_order(-2.0) == 1.5
    with pytest.raises(DomainError):
        psi_mu(t, 0.5)


def test_functions_on_grid(grid):
    f = make_function("gaussian:sigma=1,c=0.5", grid)
    x = grid.x_axis()
    assert_allclose(f.values.real, np.exp(-((x - 0.5) ** 2) / 2.0))
    bump = make_function("gevrey:mu=-1", grid)
    outside = (x <= 0.0) | (x >= 1.0)
    assert np.all(bump.values[outside] == 0.0)
    assert np.abs(bump.values).max() == pytest.approx(math.exp(-4.0))
    window = make_function("window", grid)
    assert np.abs(window.values).max() == 1.0


def test_function_domain_errors(grid):
    with pytest.raises(DomainError):
        make_function("gaussian:sigma=0", grid)
    with pytest.raises(BoundaryDecayError):
        make_function("gaussian:sigma=20", grid)


def test_planar_functions():
    planar = Grid(n=2, N=256)
    f = make_function("gaussian:sigma=1", planar)
    assert f.values.shape == (256, 256)
    assert f.values.max().real == pytest.approx(1.0)


def test_algebra_corpus(grid):
    corpus = make_corpus(ALGEBRA_CORPUS, grid)
    assert list(corpus) == list(ALGEBRA_CORPUS)
    assert len(corpus) == 6


def test_decay_fit_of_gaussian(gaussian):
    fit = fourier_decay_fit(gaussian, model_exponent=2.0)
    assert fit.fitted_exponent == pytest.approx(2.0, abs=0.01)
    assert fit.eps == pytest.approx(0.5, rel=0.01)
    assert fit.relative_error < 0.01
    assert fit.points >= 6


def test_decay_fit_is_one_dimensional():
    with pytest.raises(DomainError):
        fourier_decay_fit(make_function("gaussian", Grid(n=2, N=256)))


@pytest.mark.slow
def test_decay_fit_of_gevrey_bump():
    fine = Grid(L=32.0, N=16384)
    fit = fourier_decay_fit(make_function("gevrey:mu=-1", fine), model_exponent=0.5)
    assert fit.relative_error < 0.1


def test_densities():
    g = stretched_exp_density(0.5)
    assert g.value(np.array([4.0]))[0] == pytest.approx(math.exp(-2.0))
    assert g.log_abs(np.array([-4.0]))[0] == pytest.approx(-2.0)
    with pytest.raises(DomainError):
        stretched_exp_density(0.0)
    odd = odd_density()
    x = np.array([0.5, 3.0, 9.0])
    assert_allclose(odd.value(-x), -odd.value(x))


def test_gevrey_bump_density():
    density = gevrey_bump_density(-1.0, Grid(L=32.0, N=4096))
    assert density.sampled is not None
    far = density.log_abs(np.array([1e2, 1e3, 1e4]))
    assert np.all(np.diff(far) < 0)
    assert density.value(np.array([0.0]))[0] == pytest.approx(density.sampled.values[0].real)
    assert density.sampled.values[0].real > 0.0


def test_gevrey_bump_density_follows_the_sampled_transform():
    grid = Grid(L=32.0, N=16384)
    density = gevrey_bump_density(-1.0, grid)
    peak_x, peak_log = sampled_peaks(grid, density.sampled.values)
    assert peak_x.size >= 4
    assert_allclose(density.log_abs(peak_x), peak_log, rtol=1e-12)
    overlap = peak_x >= 50.0
    assert np.count_nonzero(overlap) >= 3
    model = density.envelope(peak_x[overlap])
    assert np.all(np.abs(model - peak_log[overlap]) <= 0.1 * np.abs(peak_log[overlap]))
    beyond = density.log_abs(np.array([peak_x[-1], 2.0 * peak_x[-1], 4.0 * peak_x[-1]]))
    assert beyond[0] == pytest.approx(peak_log[-1])
    assert np.all(np.diff(beyond) < 0)
