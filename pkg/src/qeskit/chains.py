"""Chains of exactly solvable SUSY partners obtained by flipping the branch function.

Given three consecutive superpotentials W0, W1, W2 of an exactly solvable
V- with gaps eps, eps1, the generator U = (W0 + W1)(W1 + W2) reproduces them
with some branch calR0 of the square root.  Taking the opposite branch gives
a new superpotential calW whose lower partner is V+(W2) + eps + eps1 and whose
upper partner carries a zero mode exp(+int calW) below the remaining levels.

All divisions by U' are avoided through S0 = U' calR0 = 2 W~+ (U + 2 eps) - U'::

    calW = (S0 - U') / (2 (2 eps + U)) + Q / (2 S0),
    Q    = 8 eps eps1 - U'' + 2 U (4 (eps1 - eps) - 3 U).

Zeros of S0 are removable points of calW.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import expr as ex
from . import grid as gr
from . import kernels
from .grid import Grid
from .smooth import SmoothFn, calibrated_radius, find_sign_changes, lift
from .states import apply_B, ground_state
from .superpot import GeneratorError, SuperTriple, potential

__all__ = [
    "ChainError",
    "MorseDenominatorError",
    "Hierarchy",
    "ChainStep",
    "oscillator_hierarchy",
    "morse_hierarchy",
    "triple_hierarchy",
    "generator_sum",
    "branch_function",
    "partner_superpotential",
    "partner_potentials",
    "partner_ground_state",
    "map_eigenfunction",
    "chain_step",
    "iterate_chain",
    "oscillator_chain_potential",
    "oscillator_chain_partner",
    "morse_chain_potential",
    "morse_branch_function",
    "morse_denominator",
]


class ChainError(GeneratorError):
    pass


class MorseDenominatorError(ChainError):
    pass


# -- hierarchies ----------------------------------------------------------------------


@dataclass(frozen=True)
class Hierarchy:
    """Superpotentials W_n with gaps eps_n = E_{n+1} - E_n, produced on demand."""

    member: Callable[[int], tuple[SmoothFn, float]]
    name: str = ""
    radius: float = 0.05

    def __getitem__(self, n: int) -> tuple[SmoothFn, float]:
        return self.member(n)

    def triple(self) -> tuple[list[SmoothFn], tuple[float, float]]:
        (w0, e0), (w1, e1), (w2, _) = self[0], self[1], self[2]
        return [w0, w1, w2], (e0, e1)

    def shifted(self, new_w0: SmoothFn, new_gap: float) -> "Hierarchy":
        """Hierarchy after one chain step: W0 -> new_w0, W_n -> W_{n+2} for n >= 1."""
        old = self.member

        def member(n: int):
            return (new_w0, new_gap) if n == 0 else old(n + 2)

        return Hierarchy(member, self.name, self.radius)


def oscillator_hierarchy(epsilon: float) -> Hierarchy:
    """W_n = eps x, eps_n = eps."""
    if not epsilon > 0:
        raise ChainError("epsilon must be positive")
    w = SmoothFn(ex.mul(ex.Const(float(epsilon)), ex.X), name="W")
    return Hierarchy(lambda n: (w, float(epsilon)), f"oscillator epsilon={epsilon:g}", 0.05 / math.sqrt(epsilon))


def triple_hierarchy(t: SuperTriple, name: str = "model") -> Hierarchy:
    """Hierarchy known only up to W2: supports a single chain step."""
    ws = list(t)
    gaps = (t.epsilon, t.epsilon1, float("nan"))

    def member(n: int):
        if n > 2:
            raise ChainError("a generic superpotential triple supports one chain step")
        return ws[n], gaps[n]

    radius = max([w.radius for w in ws] + [0.05])
    return Hierarchy(member, name, radius)


def morse_hierarchy(epsilon: float) -> Hierarchy:
    """W_n = eps + 1/2 - n - exp(-x), eps_n = eps - n."""

    def member(n: int):
        gap = float(epsilon) - n
        w = ex.sub(ex.Const(float(epsilon) + 0.5 - n), ex.exp(ex.neg(ex.X)))
        return SmoothFn(w, name=f"W{n}"), gap

    return Hierarchy(member, f"morse epsilon={epsilon:g}", 0.05)


# -- single step ----------------------------------------------------------------------


def generator_sum(w: list[SmoothFn]) -> SmoothFn:
    """U = (W0 + W1)(W1 + W2)."""
    return lift(lambda a, b, c: (a + b) * (b + c), *w, name="U")


def _s0_op(e):
    def op(w0, w1, w2):
        wp, wt = w0 + w1, w1 + w2
        u = wp * wt
        return 2.0 * wt * (u + 2.0 * e) - ex.differentiate(u)

    return op


def _calw_op(e, e1):
    def op(w0, w1, w2):
        wp, wt = w0 + w1, w1 + w2
        u = wp * wt
        du = ex.differentiate(u)
        d2u = ex.differentiate(du)
        s0 = 2.0 * wt * (u + 2.0 * e) - du
        q = 8.0 * e * e1 - d2u + 2.0 * u * (4.0 * (e1 - e) - 3.0 * u)
        return (s0 - du) / (2.0 * (2.0 * e + u)) + q / (2.0 * s0)

    return op


def _zeros(f: SmoothFn, domain, n: int = 4001) -> list[float]:
    """Sign changes of f plus touching zeros (local minima of |f| that reach ~0).

    Float sign changes are confirmed in high precision: near a high-order zero
    rounding noise alone can flip the sign.
    """
    x = np.linspace(domain[0], domain[1], n)
    y = f.raw_safe(x)
    scale = float(np.nanmax(np.abs(y))) or 1.0
    step = x[1] - x[0]
    roots = []
    for r in find_sign_changes(f.raw_safe, domain[0], domain[1], n):
        lo, hi = f.evaluate_mp(r - 0.5 * step), f.evaluate_mp(r + 0.5 * step)
        if lo * hi < 0 or abs(float(f.evaluate_mp(r))) < 1e-10 * scale:
            roots.append(r)
    d = f.derivative()
    for r in find_sign_changes(d.raw_safe, domain[0], domain[1], n):
        if abs(float(f.evaluate_mp(r))) < 1e-10 * scale and all(abs(r - q) > 1e-6 for q in roots):
            roots.append(r)
    return _merge(sorted(roots), 1e-6)


def _merge(roots: list[float], tol: float) -> list[float]:
    out: list[float] = []
    for r in roots:
        if out and abs(r - out[-1]) <= tol:
            continue
        out.append(r)
    return out


def branch_function(w: list[SmoothFn], gaps: tuple[float, float], domain=(-10.0, 10.0)) -> tuple[SmoothFn, SmoothFn]:
    """(calR0, S0): the branch reproducing W+ and S0 = U' calR0.

    calR0 = 2 U (U + 2 eps) / (U' W+) - 1 has poles where U' vanishes while S0
    does not; S0 is the quantity used downstream.
    """
    e = gaps[0]
    s0 = lift(_s0_op(e), *w, name="S0")
    r0 = lift(lambda a, b, c: _s0_op(e)(a, b, c) / ex.differentiate((a + b) * (b + c)), *w, name="calR0")
    return r0, s0


def partner_superpotential(
    w: list[SmoothFn] | SuperTriple,
    gaps: tuple[float, float] | None = None,
    domain=(-10.0, 10.0),
    radius: float | None = None,
) -> SmoothFn:
    """calW for the opposite branch, with the zeros of S0 declared removable."""
    if isinstance(w, SuperTriple):
        gaps = w.gaps
        w = list(w)
    if gaps is None:
        raise ValueError("gaps are required")
    e, e1 = float(gaps[0]), float(gaps[1])
    r = radius if radius is not None else max(f.radius for f in w) or 0.05
    s0 = lift(_s0_op(e), *w, name="S0")
    u = generator_sum(w)
    den = lift(lambda a: a + 2.0 * e, u, name="U+2eps")
    if _zeros(den, domain):
        raise ChainError("U + 2 eps vanishes: the source potential is singular")
    zeros = _zeros(s0, domain)
    x = np.linspace(domain[0], domain[1], 4001)
    sv = np.abs(s0.raw_safe(x))
    tiny = sv < 1e-12 * (np.nanmax(sv) or 1.0)
    if np.count_nonzero(tiny) > 20:
        raise ChainError("branch function vanishes on an interval: degenerate source")
    calw = lift(_calw_op(e, e1), *w, points=zeros, radius=r, name="calW")
    if calw.points:
        # cancellation near high-order zeros of S0 can reach past the default radius
        calw = calw.with_points((), calibrated_radius(calw, calw.points, r))
    return calw


def partner_potentials(calw: SmoothFn) -> tuple[SmoothFn, SmoothFn]:
    """(calV-, calV+) = ((calW^2 - calW')/2, (calW^2 + calW')/2)."""
    return potential(calw, -1), potential(calw, +1)


def partner_ground_state(calw: SmoothFn | Callable, grid: Grid, anchor: float = 0.0) -> np.ndarray:
    """Normalized zero mode exp(+int calW) of calV+."""
    return ground_state(lambda x: -np.asarray(calw(x)), grid, anchor)


def map_eigenfunction(calw, psi: np.ndarray, energy: float, direction: str, grid: Grid) -> np.ndarray:
    """Intertwine calV- and calV+ eigenfunctions at energy E > 0.

    up:   phi = (d/dx + calW) psi / sqrt(2E)   (calV- -> calV+)
    down: psi = (-d/dx + calW) phi / sqrt(2E)  (calV+ -> calV-)
    """
    if not energy > 0:
        raise ValueError("the intertwining maps need a positive energy")
    if direction == "up":
        out = apply_B(calw, -1, psi, grid)
    elif direction == "down":
        out = apply_B(calw, +1, psi, grid)
    else:
        raise ValueError("direction must be 'up' or 'down'")
    return out / math.sqrt(energy)


@dataclass(frozen=True)
class ChainStep:
    index: int
    source: tuple[SmoothFn, SmoothFn, SmoothFn]
    gaps: tuple[float, float]
    u: SmoothFn
    r0: SmoothFn
    s0: SmoothFn
    calw: SmoothFn
    v_minus: SmoothFn
    v_plus: SmoothFn
    next_gap: float
    hierarchy: Hierarchy

    @property
    def offset(self) -> float:
        """calV- = V+(W2) + eps + eps1."""
        return self.gaps[0] + self.gaps[1]

    @property
    def source_potential(self) -> SmoothFn:
        return potential(self.source[0], -1)

    @property
    def removable_points(self) -> tuple[float, ...]:
        return self.calw.points


def chain_step(h: Hierarchy, index: int = 1, domain=(-10.0, 10.0)) -> ChainStep:
    w, gaps = h.triple()
    if not (gaps[0] > 0 and gaps[1] > 0):
        raise ChainError(f"step {index} needs positive gaps, got {gaps[0]:g}, {gaps[1]:g}")
    e2 = h[2][1]
    calw = partner_superpotential(w, gaps, domain, h.radius)
    r0, s0 = branch_function(w, gaps, domain)
    vm, vp = partner_potentials(calw)
    new_w0 = lift(lambda a: -a, calw, name="W0")
    gap = gaps[0] + gaps[1] + e2
    return ChainStep(
        index=index,
        source=tuple(w),
        gaps=gaps,
        u=generator_sum(w),
        r0=r0,
        s0=s0,
        calw=calw,
        v_minus=vm,
        v_plus=vp,
        next_gap=gap,
        hierarchy=h.shifted(new_w0, gap),
    )


def iterate_chain(source: str | Hierarchy, steps: int, epsilon: float = 1.0, domain=None) -> list[ChainStep]:
    """Run ``steps`` chain steps; step k's calV+ is V-(k, x) of the family."""
    if steps < 0:
        raise ValueError("steps must be non-negative")
    if isinstance(source, str):
        if source == "oscillator":
            h = oscillator_hierarchy(epsilon)
            domain = domain or (-10.0 / math.sqrt(epsilon), 10.0 / math.sqrt(epsilon))
        elif source == "morse":
            h = morse_hierarchy(epsilon)
            domain = domain or (-5.0, 20.0)
        else:
            raise ChainError(f"unknown chain source {source!r}; expected 'oscillator' or 'morse'")
    else:
        h = source
        domain = domain or (-10.0, 10.0)
    out = []
    for k in range(1, steps + 1):
        step = chain_step(h, k, domain)
        out.append(step)
        h = step.hierarchy
    return out


# -- closed forms ---------------------------------------------------------------------


def oscillator_chain_potential(n: int, epsilon: float, x, backend: str | None = None) -> np.ndarray:
    """V-(n, x), the n-th partner of the oscillator, in real arithmetic.

    With G_k(y) = i^-k H_k(i y):  H_{2n-2}/H_{2n} = -G_{2n-2}/G_{2n} and
    (H_{2n-1}/H_{2n})^2 = -(G_{2n-1}/G_{2n})^2.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.asarray(x, dtype=float)
    r_even, r_odd = kernels.hermite_imag_ratios(n, math.sqrt(epsilon) * x.ravel(), backend=backend)
    r_even, r_odd = r_even.reshape(x.shape), r_odd.reshape(x.shape)
    return (
        0.5 * epsilon**2 * x**2
        - 8.0 * epsilon * n * (2 * n - 1) * r_even
        + 16.0 * epsilon * n * n * r_odd**2
        + 0.5 * (4 * n - 1) * epsilon
    )


def oscillator_chain_partner(n: int, epsilon: float, x) -> np.ndarray:
    """V+(n, x) = eps^2 x^2 / 2 + (2n + 1/2) eps, whose levels are (2n + 1) eps, (2n + 2) eps, ..."""
    x = np.asarray(x, dtype=float)
    return 0.5 * epsilon**2 * x**2 + (2 * n + 0.5) * epsilon


def morse_denominator(n: int, epsilon: float, x) -> np.ndarray | None:
    """Denominator of the closed-form V-(n, x); None for n = 0."""
    e = epsilon
    t = np.exp(np.asarray(x, dtype=float))
    if n == 0:
        return None
    if n == 1:
        return 2.0 - 2.0 * (2 * e - 1) * t + e * (2 * e - 1) * t * t
    if n == 2:
        return 4.0 - (2 * e - 3) * (8 * t - (e - 1) * (12 * t**2 - (2 * e - 1) * (4 * t**3 - e * t**4)))
    raise ValueError("closed forms exist for n = 0, 1, 2")


def morse_chain_potential(n: int, epsilon: float, x) -> tuple[np.ndarray, np.ndarray]:
    """(V-(n, x), V+(n, x)) for the Morse chain, n in {0, 1, 2}.

    Raises MorseDenominatorError if the denominator vanishes or changes sign on x.
    """
    if n not in (0, 1, 2):
        raise ValueError("closed forms exist for n = 0, 1, 2")
    if not epsilon > n + 0.5:
        raise ChainError(f"need epsilon > {n + 0.5:g} for step {n}")
    e = float(epsilon)
    x = np.asarray(x, dtype=float)
    t = np.exp(x)
    em = np.exp(-x)
    base = (1 + 2 * e) ** 2 / 8.0
    v_plus = base + 0.5 * (em * em - 2 * (e - 2 * n) * em)
    if n == 0:
        return base + 0.5 * (em * em - 2 * (e + 1) * em), v_plus
    d = morse_denominator(n, e, x)
    if np.any(d == 0) or (np.any(d > 0) and np.any(d < 0)):
        i = int(np.argmin(np.abs(d)))
        raise MorseDenominatorError(f"denominator of V-({n}, x) vanishes near x = {x.ravel()[i]:.6g} for epsilon = {e:g}")
    if n == 1:
        vm = (
            base
            + 0.5 * (em * em - 2 * (e - 1) * em)
            + 2 * (e * (2 * e - 1) * t - 2) / (e * d)
            - 8 * ((2 * e - 1) * t - 1) / (e * d * d)
        )
        return vm, v_plus
    num1 = (2 * e - 3) * (8 * t - (e - 1) * (48 * t**2 - (2 * e - 1) * (36 * t**3 - 16 * e * t**4)))
    num2 = (2 * e - 3) * (8 * t - (e - 1) * (24 * t**2 - (2 * e - 1) * (12 * t**3 - 4 * e * t**4)))
    vm = base + 0.5 * (em * em - 2 * (e - 3) * em) + num1 / d + num2**2 / d**2
    return vm, v_plus


def morse_branch_function(epsilon: float, x) -> np.ndarray:
    """Closed-form calR0 for the Morse source (pole where 2 e^-x = 2 eps - 1)."""
    e = float(epsilon)
    x = np.asarray(x, dtype=float)
    em, t = np.exp(-x), np.exp(x)
    num = 4 * em * em + 6 * (1 - 2 * e) * em + 3 * (1 + 4 * e * (e - 1)) - 2 * e * (1 - 3 * e + 2 * e * e) * t
    return num / (2 * em + (1 - 2 * e))
