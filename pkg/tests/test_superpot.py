import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qeskit import expr as ex
from qeskit.catalog import rational_generator, rational_interval
from qeskit.smooth import SignSchedule, find_sign_changes
from qeskit.superpot import (
    GeneratorError,
    GeneratorSpec,
    UnsupportedGeneratorError,
    build_wplus_pair,
    construct,
    discriminant_R,
    locate_zero,
    potential,
    validate_generator,
)

SQRT3 = math.sqrt(3.0)
X = np.linspace(-6, 6, 1201)


def spec(text, eps, eps1, **extra):
    params = {"eps": eps, "eps1": eps1, **extra}
    return GeneratorSpec(ex.parse(text, set(params)), eps, eps1, params)


def case1(c=1.0):
    b2 = (2 - SQRT3) * c * c
    return rational_generator(1.5 * b2, (1.5 + SQRT3) * b2, math.sqrt(b2))


# -- validation -------------------------------------------------------------------------


def test_oscillator_generator_passes():
    rep = validate_generator(spec("4*eps*eps1*x^2", 1.3, 1.3))
    assert rep.passed, rep.format()
    assert rep.x0 == pytest.approx(0.0, abs=1e-12)


def test_unequal_gaps_fail_fourth_derivative():
    rep = validate_generator(spec("4*eps*eps1*x^2", 1.0, 2.0))
    assert not rep.passed
    assert "U''''(x0)=64*eps*eps1*(eps1-eps)" in rep.failed
    assert rep["U''(x0)=8*eps*eps1"].passed


def test_shifted_generator_zero_is_located():
    rep = validate_generator(spec("4*eps*eps1*(x-1.25)^2", 0.7, 0.7))
    assert rep.passed and rep.x0 == pytest.approx(1.25, abs=1e-10)


def test_case1_passes_and_report_serializes():
    rep = validate_generator(case1())
    assert rep.passed, rep.format()
    d = rep.to_dict()
    assert d["passed"] and len(d["checks"]) == len(rep.checks)
    assert "PASS" in rep.format()
    with pytest.raises(KeyError):
        rep["nope"]


def test_negative_generator_fails_positivity():
    rep = validate_generator(spec("4*eps*eps1*x^2 - x^4", 1.0, 1.0))
    assert "U_positive" in rep.failed


def test_positive_gaps_required():
    with pytest.raises(GeneratorError):
        spec("4*eps*eps1*x^2", 0.0, 1.0)
    with pytest.raises(GeneratorError):
        GeneratorSpec(ex.parse("a*x^2", {"a"}), 1.0, 1.0, {})


def test_construct_refuses_invalid_unless_forced():
    g = spec("4*eps*eps1*x^2", 1.0, 2.0)
    with pytest.raises(GeneratorError):
        construct(g)


# -- the discriminant -------------------------------------------------------------------


@pytest.mark.parametrize("eps", [0.5, 1.0, 2.7])
def test_oscillator_discriminant_is_quadratic(eps):
    g = spec("4*eps*eps1*x^2", eps, eps)
    assert np.allclose(discriminant_R(g, X), 2 * eps * X**2, rtol=1e-10, atol=1e-10)
    assert discriminant_R(g, 0.0) == 0.0


def test_discriminant_value_at_one():
    # U = 10x^2/(1+x^2): U(1) = U'(1) = 5, so 1 + 4*5*10*3/25 = 25
    g = spec("4*eps*eps1*x^2/(1+x^2)", 2.5, 1.0)
    assert discriminant_R(g, 1.0, 0.0) == pytest.approx(5.0, rel=1e-13)
    with mpmath.workdps(40):
        u = lambda t: 10 * t**2 / (1 + t**2)
        up = mpmath.diff(u, 1)
        r = mpmath.sqrt(1 + 4 * u(1) * (u(1) + 5) * (u(1) - 2) / up**2)
    assert float(r) == pytest.approx(5.0, rel=1e-30)


def test_discriminant_near_zero_of_u():
    g = case1()
    x = np.array([-1e-3, -1e-6, 1e-8, 1e-4])
    r = discriminant_R(g, x, 0.0)
    assert np.all(np.isfinite(r)) and np.all(r >= 0)
    assert np.all(r < 1e-3)


# -- W+ and the triple ------------------------------------------------------------------


@pytest.mark.parametrize("eps", [0.5, 1.0, 2.0])
def test_oscillator_superpotentials(eps):
    g = spec("4*eps*eps1*x^2", eps, eps)
    _, wp, wpt, t = construct(g)
    assert np.allclose(wp(X), 2 * eps * X, atol=1e-10)
    assert np.allclose(wpt(X), 2 * eps * X, atol=1e-10)
    for w in t:
        assert np.allclose(w(X), eps * X, atol=1e-9)
    v = potential(t.w0, -1)(X)
    assert np.allclose(v, 0.5 * eps**2 * X**2 - 0.5 * eps, atol=1e-9)


def test_slopes_at_the_zero():
    g = case1(1.3)
    wp, wpt = build_wplus_pair(g, 0.0)
    assert wp.derivative()(np.array([0.0]))[0] == pytest.approx(2 * g.epsilon, rel=1e-8)
    assert wpt.derivative()(np.array([0.0]))[0] == pytest.approx(2 * g.epsilon1, rel=1e-8)


def test_case1_sums_have_single_sign_change():
    g = case1()
    wp, wpt = build_wplus_pair(g, 0.0)
    for f in (wp, wpt):
        x = np.linspace(-10, 10, 10_000)
        y = f(x)
        assert np.count_nonzero(np.sign(y[1:]) != np.sign(y[:-1])) == 1
        assert find_sign_changes(f, -10, 10) == pytest.approx([0.0], abs=1e-12)


def test_even_generator_gives_odd_superpotentials():
    _, _, _, t = construct(case1(0.8))
    for w in t:
        assert np.allclose(w(X), -w(-X), atol=1e-10)


def test_potential_pair_of_linear_superpotential():
    _, _, _, t = construct(spec("4*eps*eps1*x^2", 1.7, 1.7))
    vp, vm = potential(t.w0, 1), potential(t.w0, -1)
    assert np.allclose(vp(X) - vm(X), 1.7, atol=1e-12)
    with pytest.raises(ValueError):
        potential(t.w0, 0)


def test_sign_schedule_must_cover_branches():
    g = GeneratorSpec(
        ex.parse("4*eps*eps1*x^2", {"eps", "eps1"}), 1.0, 1.0, {"eps": 1.0, "eps1": 1.0}, SignSchedule((0.0,), (-1, 1))
    )
    wp, _ = build_wplus_pair(g, 0.0)
    # the minus branch of 1 +/- R picks the other root and is not 2 eps x
    assert not np.allclose(wp(np.array([-1.0])), -2.0)
    assert wp(np.array([1.0]))[0] == pytest.approx(2.0)


def test_two_zero_configuration_is_rejected():
    with pytest.raises(UnsupportedGeneratorError):
        locate_zero(spec("4*eps*eps1*(x^2-1)", 1.0, 1.0))
    with pytest.raises(GeneratorError, match="several"):
        locate_zero(spec("eps*eps1*(x^2-1)^2", 1.0, 1.0))


def test_locate_zero_errors_without_minimum():
    with pytest.raises(GeneratorError):
        locate_zero(spec("4*eps*eps1*(1+x^2)", 1.0, 1.0))


# -- invariants over the rational family -------------------------------------------------


@st.composite
def rational_params(draw):
    eps = draw(st.floats(0.3, 4.0))
    b = draw(st.floats(0.4, 2.0))
    lo, hi = rational_interval(eps, b)
    lo = max(lo, 0.05)
    t = draw(st.floats(0.02, 0.98))
    return eps, lo + t * (hi - lo), b


@settings(max_examples=12)
@given(rational_params())
def test_rational_family_invariants(p):
    eps, eps1, b = p
    g = rational_generator(eps, eps1, b)
    rep, wp, wpt, t = construct(g)
    assert rep.passed, rep.format()
    x = np.linspace(-5, 5, 2001)
    assert discriminant_R(g, rep.x0, rep.x0) == 0.0
    assert np.all(discriminant_R(g, x[np.abs(x - rep.x0) > 1e-6], rep.x0) > 0)
    w = [f(x) for f in t]
    dw = [f.derivative()(x) for f in t]
    u = ex.evaluate(g.U, x)
    scale = np.maximum(1.0, np.abs(u))
    # U = W+ W~+ and the sums reconstruct W+ and W~+
    assert np.max(np.abs(wp(x) * wpt(x) - u) / scale) < 1e-8
    assert np.max(np.abs(w[0] + w[1] - wp(x)) / np.maximum(1, np.abs(wp(x)))) < 1e-8
    assert np.max(np.abs(w[1] + w[2] - wpt(x)) / np.maximum(1, np.abs(wpt(x)))) < 1e-8
    # shape invariance of the neighbours
    r0, r1 = t.hierarchy_residuals(x)
    assert np.max(np.abs(r0)) < 1e-6 * max(1.0, eps) and np.max(np.abs(r1)) < 1e-6 * max(1.0, eps1)
    # factorization V+- = (W^2 +- W')/2 against the potentials
    # (outside the repair zone, where V is fitted separately from W)
    for k, f in enumerate(t):
        vp, vm = potential(f, 1)(x), potential(f, -1)(x)
        out = np.abs(x - t.x0) > f.radius
        s = np.maximum(1.0, w[k] ** 2)
        assert np.max(np.abs(vp + vm - w[k] ** 2)[out] / s[out]) < 1e-12
        assert np.max(np.abs(vp + vm - w[k] ** 2) / s) < 1e-9
        assert np.max(np.abs(vp - vm - dw[k])[out] / np.maximum(1.0, np.abs(dw[k][out]))) < 1e-12
