from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from app.errors import DomainError, SpecParseError
from app.weight_core import (
    BuiltinWeightSpec,
    canonical_weight_spec,
    eval_derivative,
    eval_weight,
    liminf_slowly_varying,
    make_custom_weight,
    make_weight,
    parse_weight_spec,
    slowly_varying_decreasing,
    slowly_varying_part,
    tower,
)


def test_tower_heights():
    assert tower(0) == 1.0
    assert tower(1) == pytest.approx(math.e)
    assert tower(2) == pytest.approx(math.exp(math.e))


def test_gevrey_weight_matches_bracket_power(gevrey2):
    x = np.array([0.0, 0.5, 3.0, 1e3, 1e6])
    assert_allclose(eval_weight(gevrey2, x), (1.0 + x * x) ** 0.25, rtol=1e-14)
    assert eval_weight(gevrey2, 0.0) == 1.0
    assert isinstance(eval_weight(gevrey2, 2.0), float)


def test_loglog_value_at_origin(loglog):
    # l_1 = log(e^e) = e and l_2 = log(e) = 1
    assert eval_weight(loglog, 0.0) == pytest.approx(math.e)


@pytest.mark.parametrize("bad", [-1.0, math.nan, math.inf])
def test_eval_weight_rejects_bad_arguments(gevrey2, bad):
    with pytest.raises(DomainError):
        eval_weight(gevrey2, bad)


@pytest.mark.parametrize("spec", ["gevrey:s=2", "family:s=2,r=1,-0.5", "loglog", "family:s=3,r=0,2", "bracket:a=0.7"])
def test_analytic_derivatives_agree_with_finite_differences(spec):
    w = make_weight(spec)
    x = np.array([0.5, 3.0, 50.0, 1e3])
    assert_allclose(eval_derivative(w, x, 1), eval_derivative(w, x, 1, numeric=True), rtol=1e-6)
    assert_allclose(eval_derivative(w, x, 2), eval_derivative(w, x, 2, numeric=True), rtol=1e-4, atol=1e-12)


def test_eval_derivative_domain(gevrey2):
    with pytest.raises(DomainError):
        eval_derivative(gevrey2, 0.0)
    with pytest.raises(DomainError):
        eval_derivative(gevrey2, 1.0, order=3)


@settings(max_examples=50, deadline=None)
@given(x=st.floats(min_value=0.0, max_value=1e6))
def test_builtin_weights_increase(x):
    for spec in ("gevrey:s=2", "loglog", "family:s=4,r=2"):
        w = make_weight(spec)
        assert w(x + 1.0) > w(x)


@pytest.mark.parametrize(
    "text,canonical",
    [
        ("gevrey:s=2", "gevrey:s=2"),
        ("family:s=2", "gevrey:s=2"),
        ("loglog", "loglog"),
        ("family:s=inf,r=1,1", "loglog"),
        ("family:s=3,r=1,-0.5", "family:s=3,r=1,-0.5"),
        ("family:s=2,r=1,0,0", "family:s=2,r=1"),
        ("linear", "linear"),
        ("power:a=1", "linear"),
        ("power:a=0.5", "power:a=0.5"),
        ("bracket:a=1", "bracket:a=1"),
        (" GEVREY : s = 2 ", "gevrey:s=2"),
    ],
)
def test_canonical_forms(text, canonical):
    assert canonical_weight_spec(parse_weight_spec(text)) == canonical
    assert make_weight(text).spec_string == canonical


@pytest.mark.parametrize("text", ["", "unknown", "gevrey:s=abc", "gevrey:t=2", "gevrey", "loglog:s=2", "gevrey:s=2,s=3"])
def test_parse_errors(text):
    with pytest.raises(SpecParseError):
        make_weight(text)


@pytest.mark.parametrize(
    "text",
    [
        "gevrey:s=1",
        "gevrey:s=0.5",
        "family:s=2,r=1,1,1,1",
        "family:s=inf,r=0.5",
        "family:s=inf,r=1,-1",
        "family:s=inf,r=1",
        "family:s=2,r=1,star=2",
        "power:a=0",
    ],
)
def test_domain_errors(text):
    with pytest.raises(DomainError):
        make_weight(text)


def test_alpha_index(gevrey2, loglog):
    assert gevrey2.index_alpha == 0.5
    assert loglog.index_alpha == 0.0
    assert make_weight("power:a=0.5").index_alpha == 0.5


def test_slowly_varying_part(gevrey2):
    assert slowly_varying_part(gevrey2, 1e8) == pytest.approx(1.0, rel=1e-12)
    assert liminf_slowly_varying(gevrey2) == pytest.approx(1.0, rel=1e-6)
    assert not slowly_varying_decreasing(gevrey2)
    assert slowly_varying_decreasing(make_weight("family:s=2,r=-1"))
    with pytest.raises(DomainError):
        slowly_varying_part(gevrey2, 0.0)


def test_shift_star_changes_values():
    base = make_weight(BuiltinWeightSpec(2.0, (1.0,)))
    shifted = make_weight(BuiltinWeightSpec(2.0, (1.0,), shift_star=10.0))
    assert shifted(0.0) == pytest.approx(math.log(10.0))
    assert base(0.0) == pytest.approx(1.0)
    assert shifted.spec_string == "family:s=2,r=1,star=10"


def test_custom_weight_falls_back_to_finite_differences():
    w = make_custom_weight(lambda x: np.sqrt(x) + 1.0, index_alpha=0.5, label="root")
    assert not w.has_analytic_derivatives
    assert w.spec_string == "custom:root"
    x = np.array([1.0, 4.0, 100.0])
    assert_allclose(eval_derivative(w, x), 0.5 / np.sqrt(x), rtol=1e-6)
    with pytest.raises(DomainError):
        make_custom_weight(lambda x: x, index_alpha=1.0)


@pytest.mark.parametrize("spec,limit_tol", [("gevrey:s=2", 1e-9), ("family:s=3,r=1", 0.06)])
def test_weight_is_regularly_varying(spec, limit_tol):
    w = make_weight(spec)
    t = np.array([1e2, 1e4, 1e6])
    errors = np.abs(eval_weight(w, 2.0 * t) / eval_weight(w, t) / 2.0**w.index_alpha - 1.0)
    assert np.all(np.diff(errors) < 0)
    assert errors[-1] < limit_tol
