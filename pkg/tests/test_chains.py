import math

import numpy as np
import pytest

from qeskit import chains
from qeskit import grid as gr
from qeskit.catalog import instantiate
from qeskit.chains import (
    ChainError,
    MorseDenominatorError,
    chain_step,
    iterate_chain,
    map_eigenfunction,
    morse_branch_function,
    morse_chain_potential,
    morse_hierarchy,
    oscillator_chain_partner,
    oscillator_chain_potential,
    oscillator_hierarchy,
    partner_ground_state,
    partner_superpotential,
    triple_hierarchy,
)
from qeskit.grid import Grid
from qeskit.solver import residual, spectrum
from qeskit.superpot import construct, potential

X = np.linspace(-6, 6, 1201)


# printed displays, transcribed independently of the package


def printed_calw(x, e):
    return -e * x * (5 + 2 * e * x * x) / (1 + 2 * e * x * x)


def printed_vp1(x, e):
    s = 1 + 2 * e * x * x
    return e * e * x * x / 2 + 4 * e / s - 8 * e / s**2 + 1.5 * e


def printed_vp2(x, e):
    q = 3 + 12 * e * x * x + 4 * e * e * x**4
    return e * e * x * x / 2 + 8 * e * (2 * e * x * x - 3) / q + 384 * e * e * x * x / q**2 + 3.5 * e


def printed_morse_r0(x, e):
    em, t = np.exp(-x), np.exp(x)
    num = 4 * em**2 + 6 * (1 - 2 * e) * em + 3 * (1 + 4 * e * (e - 1)) - 2 * e * (1 - 3 * e + 2 * e * e) * t
    return num / (2 * em + (1 - 2 * e))


def printed_morse_vm(n, x, e):
    t, em = np.exp(x), np.exp(-x)
    head = (1 + 2 * e) ** 2 / 8
    if n == 0:
        return head + (em**2 - 2 * (e + 1) * em) / 2
    if n == 1:
        d = 2 - 2 * (2 * e - 1) * t + e * (2 * e - 1) * t**2
        return head + (em**2 - 2 * (e - 1) * em) / 2 + 2 * (e * (2 * e - 1) * t - 2) / (e * d) - 8 * ((2 * e - 1) * t - 1) / (e * d**2)
    d = 4 - (2 * e - 3) * (8 * t - (e - 1) * (12 * t**2 - (2 * e - 1) * (4 * t**3 - e * t**4)))
    a = (2 * e - 3) * (8 * t - (e - 1) * (48 * t**2 - (2 * e - 1) * (36 * t**3 - 16 * e * t**4)))
    b = (2 * e - 3) * (8 * t - (e - 1) * (24 * t**2 - (2 * e - 1) * (12 * t**3 - e * 4 * t**4)))
    return head + (em**2 - 2 * (e - 3) * em) / 2 + a / d + b**2 / d**2


def printed_morse_vp(n, x, e):
    em = np.exp(-x)
    return (1 + 2 * e) ** 2 / 8 + (em**2 - 2 * (e - 2 * n) * em) / 2


def fd_levels(v, grid, k):
    vals, _ = spectrum(v, grid, k)
    return vals


# -- oscillator ---------------------------------------------------------------------------


@pytest.mark.parametrize("eps", [0.5, 1.0, 2.0])
def test_oscillator_partner_superpotential(eps):
    step = iterate_chain("oscillator", 1, eps)[0]
    x = X / math.sqrt(eps)
    assert np.max(np.abs(step.calw(x) - printed_calw(x, eps))) < 1e-9
    assert np.max(np.abs(step.v_minus(x) - (eps * eps * x * x / 2 + 2.5 * eps))) < 1e-8
    assert np.max(np.abs(step.v_plus(x) - printed_vp1(x, eps))) < 1e-8
    # signs at the ends are reversed: calV+ carries the zero mode
    assert step.calw(np.array([x[0]]))[0] > 0 > step.calw(np.array([x[-1]]))[0]


def test_partner_potentials_at_origin():
    step = iterate_chain("oscillator", 1, 1.0)[0]
    assert step.v_minus(np.array([0.0]))[0] == pytest.approx(2.5, abs=1e-10)
    assert step.v_plus(np.array([0.0]))[0] == pytest.approx(-2.5, abs=1e-10)
    assert printed_vp1(0.0, 1.0) == -2.5


def test_second_step_and_gaps():
    s1, s2 = iterate_chain("oscillator", 2, 1.0)
    assert s1.next_gap == pytest.approx(3.0)
    assert s2.gaps == pytest.approx((3.0, 1.0))
    assert s1.hierarchy[1][1] == 1.0 and s1.hierarchy[5][1] == 1.0
    assert np.max(np.abs(s2.v_minus(X) - (X * X / 2 + 4.5))) < 1e-7
    assert np.max(np.abs(s2.v_plus(X) - printed_vp2(X, 1.0))) < 1e-7


@pytest.mark.parametrize("eps", [1.0, 0.5, 3.0])
def test_hermite_closed_form_matches_prints(eps):
    x = X / math.sqrt(eps)
    assert np.max(np.abs(oscillator_chain_potential(1, eps, x) - printed_vp1(x, eps))) < 1e-8
    assert np.max(np.abs(oscillator_chain_potential(2, eps, x) - printed_vp2(x, eps))) < 1e-8
    # the printed partner displays give 5eps/2 and 9eps/2
    assert oscillator_chain_partner(1, eps, 0.0) == 2.5 * eps
    assert oscillator_chain_partner(2, eps, 0.0) == 4.5 * eps


def test_hermite_closed_form_backends_agree():
    for n in (1, 3, 6):
        a = oscillator_chain_potential(n, 1.3, X, backend="numpy")
        b = oscillator_chain_potential(n, 1.3, X)
        assert np.allclose(a, b, rtol=1e-13, atol=1e-13)
    with pytest.raises(ValueError):
        oscillator_chain_potential(0, 1.0, X)


def test_pipeline_follows_hermite_family():
    steps = iterate_chain("oscillator", 3, 1.0)
    for k, step in enumerate(steps, start=1):
        assert np.max(np.abs(step.v_plus(X) - oscillator_chain_potential(k, 1.0, X))) < 1e-7
        assert np.max(np.abs(step.v_minus(X) - oscillator_chain_partner(k, 1.0, X))) < 1e-7


def test_case2_is_the_first_partner():
    _, closed = instantiate("case2", {"b": 1.2})
    assert np.max(np.abs(closed.potential(X) - printed_vp1(X, 0.72))) < 1e-12


def test_zero_mode_closed_form_and_residual():
    eps = 1.4
    step = iterate_chain("oscillator", 1, eps)[0]
    g = Grid(8.0, 4001)
    phi = partner_ground_state(step.calw, g)
    ref = gr.normalize(np.exp(-eps * g.x**2 / 2) / (1 + 2 * eps * g.x**2), g)
    assert np.max(np.abs(phi - ref)) < 1e-9
    assert gr.inner_product(phi, phi, g) == pytest.approx(1.0, abs=1e-12)
    assert residual(step.v_plus(g.x), phi, 0.0, g) < 1e-5
    levels = fd_levels(step.v_plus, g, 1)
    assert abs(levels[0]) < 1e-6


def hermite_function(n, eps, x):
    from numpy.polynomial.hermite import hermval

    c = np.zeros(n + 1)
    c[n] = 1.0
    return hermval(math.sqrt(eps) * x, c) * np.exp(-eps * x * x / 2)


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_eigenfunction_maps(n):
    eps = 1.0
    step = iterate_chain("oscillator", 1, eps)[0]
    g = Grid(9.0, 4001)
    psi = gr.normalize(hermite_function(n, eps, g.x), g)
    energy = (n + 3) * eps  # level n of calV- = eps^2 x^2/2 + 5 eps/2
    phi = map_eigenfunction(step.calw, psi, energy, "up", g)
    assert gr.inner_product(phi, phi, g) == pytest.approx(1.0, abs=1e-6)
    assert residual(step.v_plus(g.x), phi, energy, g) < 1e-5
    zero = partner_ground_state(step.calw, g)
    assert abs(gr.inner_product(phi, zero, g)) < 1e-6
    back = map_eigenfunction(step.calw, phi, energy, "down", g)
    assert np.max(np.abs(back - psi)) < 1e-6


def test_map_rejects_bad_input():
    step = iterate_chain("oscillator", 1, 1.0)[0]
    g = Grid(5.0, 101)
    with pytest.raises(ValueError):
        map_eigenfunction(step.calw, np.zeros(101), 0.0, "up", g)
    with pytest.raises(ValueError):
        map_eigenfunction(step.calw, np.zeros(101), 1.0, "sideways", g)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_oscillator_chain_spectrum(k):
    step = iterate_chain("oscillator", k, 1.0)[-1]
    levels = fd_levels(step.v_plus, Grid(12.0, 4001), 4)
    expected = np.array([0.0, 2 * k + 1, 2 * k + 2, 2 * k + 3])
    assert abs(levels[0]) < 1e-6
    assert np.all(np.abs(levels[1:] - expected[1:]) <= 5e-4 * expected[1:])


def test_calw_is_odd_for_even_sources():
    step = iterate_chain("oscillator", 2, 0.8)[-1]
    assert np.allclose(step.calw(X), -step.calw(-X), atol=1e-9)
    spec, _ = instantiate("case1", {"c": 1.0})
    _, _, _, t = construct(spec)
    calw = partner_superpotential(t)
    assert np.allclose(calw(X), -calw(-X), atol=1e-8)


# -- spectral identification -------------------------------------------------------------


def shifted_partner_levels(t_w2, offset, g, k=5):
    return fd_levels(potential(t_w2, 1), g, k) + offset


@pytest.mark.parametrize(
    "name,params,half_width",
    [("case1", {"c": 1.0}, 10.0), ("case2", {"b": 1.0}, 10.0), ("oscillator", {"epsilon": 1.0}, 12.0)],
)
def test_new_lower_partner_is_shifted_second_upper(name, params, half_width):
    spec, _ = instantiate(name, params)
    _, _, _, t = construct(spec)
    step = chain_step(triple_hierarchy(t, name))
    g = Grid(half_width, 4001)
    got = fd_levels(step.v_minus, g, 5)
    ref = shifted_partner_levels(t.w2, step.offset, g)
    assert np.all(np.abs(got - ref) <= 5e-4 * np.abs(ref))


def test_triple_hierarchy_supports_one_step():
    spec, _ = instantiate("case1", {"c": 1.0})
    _, _, _, t = construct(spec)
    with pytest.raises(ChainError):
        iterate_chain(triple_hierarchy(t), 2)


# -- Morse ----------------------------------------------------------------------------------


def test_morse_source_potentials():
    eps = 3.0
    x = np.linspace(-2, 15, 801)
    w0, _ = morse_hierarchy(eps)[0]
    assert np.allclose(potential(w0, -1)(x), printed_morse_vm(0, x, eps), rtol=1e-13, atol=1e-12)
    vm, vp = morse_chain_potential(0, eps, x)
    assert np.allclose(vm, printed_morse_vm(0, x, eps), rtol=1e-13)
    assert np.allclose(vp, printed_morse_vp(0, x, eps), rtol=1e-13)
    far = np.array([40.0])
    limit = (1 + 2 * eps) ** 2 / 8
    a, b = morse_chain_potential(0, eps, far)
    assert a[0] == pytest.approx(limit, rel=1e-15) and b[0] == pytest.approx(limit, rel=1e-15)


def test_morse_branch_function_matches_print():
    eps = 3.0
    step = iterate_chain("morse", 1, eps)[0]
    x = np.linspace(-2, 8, 2001)
    pole = -math.log(eps - 0.5)
    keep = np.abs(x - pole) > 0.05
    ref = printed_morse_r0(x, eps)
    assert np.allclose(morse_branch_function(eps, x), ref, rtol=1e-13)
    got = step.r0(x[keep])
    assert np.max(np.abs(got - ref[keep]) / np.maximum(1, np.abs(ref[keep]))) < 1e-8
    # negative between the zeros of the numerator
    assert np.any(ref < 0)


@pytest.mark.parametrize("n,eps", [(1, 3.0), (1, 4.0), (2, 4.0), (2, 3.5)])
def test_morse_chain_closed_forms(n, eps):
    x = np.linspace(-2, 12, 1401)
    vm, vp = morse_chain_potential(n, eps, x)
    assert np.allclose(vm, printed_morse_vm(n, x, eps), rtol=1e-12)
    assert np.allclose(vp, printed_morse_vp(n, x, eps), rtol=1e-13)
    step = iterate_chain("morse", n, eps)[-1]
    assert np.max(np.abs(step.v_plus(x) - vm)) < 1e-5
    assert np.max(np.abs(step.v_minus(x) - vp)) < 1e-5


def test_morse_chain_spectrum():
    eps = 3.0
    step = iterate_chain("morse", 1, eps)[0]
    g = Grid(40.0, 8001, center=30.0)
    vm = fd_levels(step.v_plus, g, 2)
    vp = fd_levels(lambda x: morse_chain_potential(1, eps, x)[1], g, 1)
    assert abs(vm[0]) < 1e-6
    assert abs(vm[1] - vp[0]) <= 5e-4 * vp[0]
    assert vp[0] == pytest.approx(6.0, rel=5e-4)


def test_morse_guards(monkeypatch):
    with pytest.raises(ChainError):
        morse_chain_potential(2, 2.5, X)
    with pytest.raises(ValueError):
        morse_chain_potential(3, 9.0, X)
    # gaps run out: eps = 3 has levels 0, 3, 5, 6 and the third step needs gap eps - 4
    with pytest.raises(ChainError):
        iterate_chain("morse", 3, 3.0)
    monkeypatch.setattr(chains, "morse_denominator", lambda n, e, x: np.asarray(x, dtype=float))
    with pytest.raises(MorseDenominatorError, match="vanishes"):
        morse_chain_potential(1, 3.0, np.linspace(-1, 1, 11))


def test_chain_arguments():
    assert iterate_chain("oscillator", 0) == []
    with pytest.raises(ValueError):
        iterate_chain("oscillator", -1)
    with pytest.raises(ChainError):
        iterate_chain("hydrogen", 1)
    with pytest.raises(ChainError):
        oscillator_hierarchy(0.0)
