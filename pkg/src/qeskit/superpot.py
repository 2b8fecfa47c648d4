"""Superpotential triples from a generator function U(x).

Given U, the level gaps ``epsilon`` (E1 - E0) and ``epsilon1`` (E2 - E1), the sums
``W+ = W0 + W1`` and ``W~+ = W1 + W2`` follow algebraically from U and the
branch function ``calR = +/-R``::

    R   = sqrt(1 + 4 U (U + 2 eps) (U - 2 eps1) / U'^2)
    W+  = 2 U (U + 2 eps) / (U' (1 + calR))
    W~+ = U' (1 + calR) / (2 (U + 2 eps))

and the three superpotentials are recovered from each sum and its derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import mpmath
import numpy as np
from scipy.optimize import brentq

from . import expr as ex
from .smooth import MP_DPS, SignSchedule, SmoothFn, find_sign_changes, lift

__all__ = [
    "GeneratorError",
    "UnsupportedGeneratorError",
    "InconsistentTripleError",
    "GeneratorSpec",
    "SuperTriple",
    "Check",
    "ValidationReport",
    "validate_generator",
    "discriminant_R",
    "build_wplus_pair",
    "build_supertriple",
    "construct",
    "potential",
    "locate_zero",
    "fallback_radius",
]

DERIV_RTOL = 1e-8
RADICAND_CLAMP = ex.SQRT_CLAMP


class GeneratorError(ValueError):
    """The generator U(x) cannot be used (no zero, several zeros, bad parameters...)."""


class UnsupportedGeneratorError(GeneratorError):
    pass


class InconsistentTripleError(GeneratorError):
    pass


@dataclass(frozen=True)
class GeneratorSpec:
    u: ex.Expr
    epsilon: float
    epsilon1: float
    params: Mapping[str, float] = field(default_factory=dict)
    sign_schedule: SignSchedule = field(default_factory=SignSchedule.constant)
    x0: float | None = None
    description: str = ""

    def __post_init__(self):
        if not (self.epsilon > 0 and self.epsilon1 > 0):
            raise GeneratorError(f"energy gaps must be positive, got epsilon={self.epsilon}, epsilon1={self.epsilon1}")
        unbound = ex.parameters(self.u) - set(self.params)
        if unbound:
            raise GeneratorError(f"unbound parameter(s) in U: {sorted(unbound)}")

    @cached_property
    def U(self) -> ex.Expr:
        return ex.bind(self.u, self.params)

    @cached_property
    def U_derivs(self) -> list[ex.Expr]:
        return ex.derivatives(self.U, 6)

    @cached_property
    def radicand(self) -> ex.Expr:
        U, Up = self.U_derivs[0], self.U_derivs[1]
        e, e1 = self.epsilon, self.epsilon1
        return 1.0 + 4.0 * U * (U + 2.0 * e) * (U - 2.0 * e1) / Up**2

    @property
    def length_scale(self) -> float:
        return 1.0 / math.sqrt(max(self.epsilon, self.epsilon1))


def fallback_radius(g: GeneratorSpec) -> float:
    """Radius of the extra-precision zone around x0."""
    return 0.05 * g.length_scale


# -- validation -----------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    target: float | None = None
    margin: float | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class ValidationReport:
    x0: float
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "x0": self.x0, "checks": [c.to_dict() for c in self.checks]}

    def format(self) -> str:
        lines = [f"x0 = {self.x0:.15g}"]
        for c in self.checks:
            tag = "ok  " if c.passed else "FAIL"
            extra = f" target={c.target:.10g}" if c.target is not None else ""
            extra += f" margin={c.margin:.3e}" if c.margin is not None else ""
            lines.append(f"  [{tag}] {c.name}: value={c.value:.10g}{extra} {c.detail}".rstrip())
        lines.append("PASS" if self.passed else "FAIL: " + ", ".join(self.failed))
        return "\n".join(lines)


def locate_zero(g: GeneratorSpec, domain: tuple[float, float] = (-10.0, 10.0), n: int = 4001) -> float:
    """Locate the single second-order zero of U.

    Minima of U with U ~ 0 are bracketed through sign changes of U', refined by
    bisection and polished with Newton steps on U'/U''.
    """
    U, Up, Upp = g.U_derivs[:3]
    if g.x0 is not None:
        return float(g.x0)
    lo, hi = domain
    x = np.linspace(lo, hi, n)
    u = ex.evaluate(U, x)
    scale = max(1.0, float(np.max(np.abs(u))))
    simple = find_sign_changes(lambda t: ex.evaluate(U, t), lo, hi, n)
    crit = find_sign_changes(lambda t: ex.evaluate(Up, t), lo, hi, n)
    touching = []
    for c in crit:
        for _ in range(8):
            d2 = ex.evaluate(Upp, c)
            if d2 == 0:
                break
            step = ex.evaluate(Up, c) / d2
            c -= step
            if abs(step) < 1e-13:
                break
        if abs(ex.evaluate(U, c)) <= 1e-10 * scale and ex.evaluate(Upp, c) > 0:
            touching.append(c)
    touching = sorted(set(round(t, 11) for t in touching))
    if len(touching) == 1:
        return float(touching[0])
    if len(touching) > 1:
        raise GeneratorError(f"U has several second-order zeros: {touching}")
    if len(simple) == 2:
        a, b = simple
        if ex.evaluate(U, 0.5 * (a + b)) < 0:
            raise UnsupportedGeneratorError(
                f"U changes sign at {a:.6g} and {b:.6g}: the two-zero configuration is not supported"
            )
    if simple:
        raise GeneratorError(f"U has sign-changing zeros {simple} and no second-order zero")
    raise GeneratorError("no zero of U found in the scan domain")


def _deriv_scale(g: GeneratorSpec, k: int) -> float:
    # U^(k) carries units energy^(1 + k/2)
    return (g.epsilon + g.epsilon1) ** (1.0 + 0.5 * k)


def validate_generator(
    g: GeneratorSpec,
    scan_domain: tuple[float, float] = (-10.0, 10.0),
    scan_points: int = 4001,
) -> ValidationReport:
    """Check the non-singularity conditions on U at its zero and across the scan grid."""
    x0 = locate_zero(g, scan_domain, scan_points)
    e, e1 = g.epsilon, g.epsilon1
    d = [ex.evaluate(D, x0) for D in g.U_derivs]
    checks: list[Check] = []

    def equality(name, k, target):
        tol = DERIV_RTOL * max(abs(target), _deriv_scale(g, k))
        diff = d[k] - target
        checks.append(Check(name, abs(diff) <= tol, d[k], target, tol - abs(diff)))

    equality("U(x0)=0", 0, 0.0)
    equality("U'(x0)=0", 1, 0.0)
    equality("U''(x0)=8*eps*eps1", 2, 8.0 * e * e1)
    equality("U'''(x0)=0", 3, 0.0)
    equality("U''''(x0)=64*eps*eps1*(eps1-eps)", 4, 64.0 * e * e1 * (e1 - e))
    equality("U'''''(x0)=0", 5, 0.0)
    lhs = d[6] / (8.0 * e * e1)
    rhs = 32.0 * (2.0 * e1**2 - 13.0 * e * e1 + 2.0 * e**2)
    slack = DERIV_RTOL * max(abs(rhs), _deriv_scale(g, 6) / (8 * e * e1))
    checks.append(Check("U6_inequality", lhs - rhs >= -slack, lhs, rhs, lhs - rhs, "U^(6)(x0)/(8 eps eps1) >= 32(2eps1^2-13 eps eps1+2eps^2)"))

    lo, hi = scan_domain
    x = np.linspace(lo, hi, scan_points)
    away = np.abs(x - x0) > 1e-4 * 0.5 * (hi - lo)
    # sparse far-field probes catch sign changes far outside the scan window
    far = x0 + np.concatenate([-np.logspace(1, 6, 26), np.logspace(1, 6, 26)]) * max(hi - lo, 1.0)
    far = far[(far < lo) | (far > hi)]
    xs = np.sort(np.concatenate([x[away], _finite_points(g, far)]))
    u = ex.evaluate(g.U, xs)
    bad_u = xs[u <= 0]
    checks.append(
        Check("U_positive", bad_u.size == 0, float(np.min(u)), 0.0, float(np.min(u)),
              f"first violation at x={bad_u[0]:.6g}" if bad_u.size else "")
    )
    up = ex.evaluate(g.U_derivs[1], xs)
    wrong_slope = xs[np.sign(up) != np.sign(xs - x0)]
    checks.append(
        Check("U'_single_zero", wrong_slope.size == 0, float(wrong_slope.size), 0.0, None,
              f"U' has the wrong sign at x={wrong_slope[0]:.6g}" if wrong_slope.size else "")
    )
    rad = _radicand_values(g, xs, x0)
    worst = float(np.min(rad))
    checks.append(
        Check("radicand_nonnegative", worst >= -RADICAND_CLAMP, worst, 0.0, worst + RADICAND_CLAMP,
              "1 + 4U(U+2eps)(U-2eps1)/U'^2 >= 0")
    )
    pos = rad > 0
    checks.append(
        Check("R_positive", bool(pos.all()), worst, 0.0, worst,
              f"R vanishes at x={xs[~pos][0]:.6g}" if (~pos).any() else "")
    )
    return ValidationReport(float(x0), tuple(checks))


def _finite_points(g: GeneratorSpec, x: np.ndarray) -> np.ndarray:
    """Subset of ``x`` where U, U' and the radicand evaluate to finite numbers."""
    keep = []
    with np.errstate(all="ignore"):
        for xi in x:
            try:
                vals = [ex.evaluate(e, xi) for e in (g.U, g.U_derivs[1], g.radicand)]
            except (ex.ExprDomainError, OverflowError, ZeroDivisionError):
                continue
            if all(np.isfinite(v) for v in vals):
                keep.append(xi)
    return np.asarray(keep, dtype=float)


def _radicand_values(g: GeneratorSpec, x: np.ndarray, x0: float) -> np.ndarray:
    r = fallback_radius(g)
    near = np.abs(x - x0) < r
    out = np.empty_like(x)
    if (~near).any():
        out[~near] = ex.evaluate(g.radicand, x[~near])
    with mpmath.workdps(MP_DPS):
        for i in np.flatnonzero(near):
            out[i] = float(ex.evaluate_mp(g.radicand, float(x[i])))
    return out


def discriminant_R(g: GeneratorSpec, x, x0: float | None = None):
    """R(x) >= 0, with tiny negative radicands clamped to zero.

    Points within the fallback radius of ``x0`` are evaluated at extra precision;
    x0 itself returns 0.
    """
    x0 = locate_zero(g) if x0 is None else x0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(xa)
    nz = xa != x0
    rad = _radicand_values(g, xa[nz], x0)
    if (rad < -RADICAND_CLAMP).any():
        bad = xa[nz][rad < -RADICAND_CLAMP][0]
        raise GeneratorError(f"negative radicand at x={bad:.6g}: generator violates the square-root condition")
    out[nz] = np.sqrt(np.maximum(rad, 0.0))
    return float(out[0]) if np.ndim(x) == 0 else out


# -- construction -------------------------------------------------------------------


def build_wplus_pair(g: GeneratorSpec, x0: float | None = None) -> tuple[SmoothFn, SmoothFn]:
    """W+ and W~+ as smooth functions (one expression per branch of calR)."""
    x0 = locate_zero(g) if x0 is None else x0
    U, Up = g.U_derivs[0], g.U_derivs[1]
    e = g.epsilon
    R = ex.sqrt0(g.radicand)
    wp, wpt = {}, {}
    for s in g.sign_schedule.values:
        one_plus = 1.0 + R if s > 0 else 1.0 - R
        wp[s] = 2.0 * U * (U + 2.0 * e) / (Up * one_plus)
        wpt[s] = Up * one_plus / (2.0 * (U + 2.0 * e))
    r = fallback_radius(g)
    return (
        SmoothFn(wp, g.sign_schedule, [x0], r, "W+"),
        SmoothFn(wpt, g.sign_schedule, [x0], r, "W~+"),
    )


@dataclass(frozen=True)
class SuperTriple:
    w0: SmoothFn
    w1: SmoothFn
    w2: SmoothFn
    epsilon: float
    epsilon1: float
    x0: float
    x0_tilde: float

    @property
    def gaps(self) -> tuple[float, float]:
        return self.epsilon, self.epsilon1

    def __iter__(self):
        return iter((self.w0, self.w1, self.w2))

    @property
    def wplus(self) -> SmoothFn:
        return lift(lambda a, b: a + b, self.w0, self.w1, name="W+")

    @property
    def wplus_tilde(self) -> SmoothFn:
        return lift(lambda a, b: a + b, self.w1, self.w2, name="W~+")

    def hierarchy_residuals(self, x) -> tuple[np.ndarray, np.ndarray]:
        """W_n^2 + W_n' - (W_{n+1}^2 - W_{n+1}') - 2 eps_n for n = 0, 1."""
        w = [f(x) for f in self]
        dw = [f.derivative()(x) for f in self]
        r0 = w[0] ** 2 + dw[0] - (w[1] ** 2 - dw[1]) - 2.0 * self.epsilon
        r1 = w[1] ** 2 + dw[1] - (w[2] ** 2 - dw[2]) - 2.0 * self.epsilon1
        return r0, r1


def _zero_of(f: SmoothFn, domain, guess: float) -> float:
    roots = find_sign_changes(f, domain[0], domain[1], 2001)
    if not roots:
        raise GeneratorError(f"{f.name} has no zero in {domain}")
    return min(roots, key=lambda r: abs(r - guess))


def build_supertriple(
    wplus: SmoothFn,
    wplus_tilde: SmoothFn,
    epsilon: float,
    epsilon1: float,
    domain: tuple[float, float] = (-10.0, 10.0),
    check_points: int = 2001,
    atol: float = 1e-6,
) -> SuperTriple:
    """W0, W1, W2 from the two sums; W1 is formed both ways and compared."""
    e, e1 = float(epsilon), float(epsilon1)
    guess = wplus.points[0] if wplus.points else 0.0
    x0 = _zero_of(wplus, domain, guess)
    x0t = _zero_of(wplus_tilde, domain, x0)
    r = max(wplus.radius, wplus_tilde.radius)

    def half_sum(w, gap, sign):
        return lambda W: 0.5 * (W + sign * (ex.differentiate(W) - 2.0 * gap) / W)

    pts = [x0, x0t]
    w0 = lift(half_sum(None, e, -1), wplus, points=pts, radius=r, name="W0")
    w1 = lift(half_sum(None, e, +1), wplus, points=pts, radius=r, name="W1")
    w1b = lift(half_sum(None, e1, -1), wplus_tilde, points=pts, radius=r, name="W1~")
    w2 = lift(half_sum(None, e1, +1), wplus_tilde, points=pts, radius=r, name="W2")

    xs = np.linspace(domain[0], domain[1], check_points)
    a, b = w1(xs), w1b(xs)
    diff = np.abs(a - b) / np.maximum(1.0, np.abs(a))
    if not diff.max() <= atol:
        i = int(np.argmax(diff))
        raise InconsistentTripleError(
            f"the two forms of W1 disagree by {diff[i]:.3g} at x={xs[i]:.6g} (bad branch choice or failed conditions)"
        )
    return SuperTriple(w0, w1, w2, e, e1, x0, x0t)


def potential(w: SmoothFn, sign: int) -> SmoothFn:
    """V(+/-) = (W^2 +/- W') / 2."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return lift(lambda W: 0.5 * (W * W + sign * ex.differentiate(W)), w, name="V+" if sign > 0 else "V-")


def construct(
    g: GeneratorSpec,
    domain: tuple[float, float] = (-10.0, 10.0),
    scan_points: int = 4001,
    force: bool = False,
) -> tuple[ValidationReport, SmoothFn, SmoothFn, SuperTriple]:
    """Validate ``g`` and run the whole construction."""
    report = validate_generator(g, domain, scan_points)
    if not report.passed and not force:
        raise GeneratorError("generator failed validation: " + ", ".join(report.failed))
    wp, wpt = build_wplus_pair(g, report.x0)
    triple = build_supertriple(wp, wpt, g.epsilon, g.epsilon1, domain)
    return report, wp, wpt, triple
