"""Evaluable smooth functions built from expressions, with removable-singularity repair.

The superpotential formulas contain 0/0 quotients at isolated points (the zero
of U, zeros of the branch function).  Near such a point double precision loses
most of its digits to cancellation long before the point itself.  Inside a
radius ``r`` around each declared point the function is therefore replaced by
one-sided Chebyshev interpolants whose nodes are evaluated in mpmath at extra
precision.

Nodes avoid an inner gap of relative width ``GAP`` around the point: with
rounded parameters the exact cancellation at the point is only good to about
1e-16, which bends functions such as sqrt(c x^4 + 1e-16) within ~1e-4 of it.
When the function continues smoothly through the point (same branch on both
sides) a single least-squares Chebyshev fit spans the whole zone and the gap
is interpolated, not extrapolated.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import mpmath
import numpy as np
from numpy.polynomial import chebyshev

from . import expr as ex

CHEB_NODES = 14
FIT_NODES = 96
FIT_DEGREE = 32
GAP = 0.3
MP_DPS = 80


@dataclass(frozen=True)
class SignSchedule:
    """Piecewise-constant +/-1 function: ``signs[i]`` holds on ``(breaks[i-1], breaks[i])``."""

    breaks: tuple[float, ...] = ()
    signs: tuple[int, ...] = (1,)

    def __post_init__(self):
        if len(self.signs) != len(self.breaks) + 1:
            raise ValueError("need exactly one more sign than breakpoints")
        if any(s not in (1, -1) for s in self.signs):
            raise ValueError("signs must be +1 or -1")
        if list(self.breaks) != sorted(self.breaks):
            raise ValueError("breakpoints must be sorted")

    @classmethod
    def constant(cls, sign: int = 1) -> "SignSchedule":
        return cls((), (sign,))

    @property
    def values(self) -> set[int]:
        return set(self.signs)

    def __call__(self, x) -> np.ndarray:
        idx = np.searchsorted(np.asarray(self.breaks, dtype=float), np.asarray(x, dtype=float), side="right")
        return np.asarray(self.signs)[idx]

    def to_dict(self) -> dict:
        return {"breaks": list(self.breaks), "signs": list(self.signs)}


class SmoothFn:
    """A real function of x given by one expression per sign-schedule branch.

    ``points`` are removable singularities; values within ``radius`` of them come
    from the Chebyshev repair described in the module docstring.
    """

    def __init__(
        self,
        branches: Mapping[int, ex.Expr] | ex.Expr,
        schedule: SignSchedule | None = None,
        points: Iterable[float] = (),
        radius: float = 0.0,
        name: str = "",
    ):
        if isinstance(branches, ex.Expr):
            branches = {1: branches}
        self.schedule = schedule or SignSchedule.constant(next(iter(branches)))
        missing = self.schedule.values - set(branches)
        if missing:
            raise ValueError(f"no expression for branch(es) {sorted(missing)}")
        self.branches = dict(branches)
        self.points = tuple(sorted(set(float(p) for p in points)))
        self.radius = float(radius)
        self.name = name
        self._derivative: SmoothFn | None = None
        self._cheb: dict[tuple[float, int], tuple[np.ndarray, float, float]] = {}
        self._lock = threading.Lock()

    def __repr__(self):
        return f"SmoothFn({self.name or '?'}, points={self.points}, radius={self.radius:g})"

    def branch(self, sign: int) -> ex.Expr:
        if sign in self.branches:
            return self.branches[sign]
        if len(self.branches) == 1:
            return next(iter(self.branches.values()))
        raise KeyError(sign)

    def derivative(self) -> "SmoothFn":
        with self._lock:
            if self._derivative is None:
                self._derivative = SmoothFn(
                    {s: ex.differentiate(e) for s, e in self.branches.items()},
                    self.schedule,
                    self.points,
                    self.radius,
                    f"d({self.name})" if self.name else "",
                )
            return self._derivative

    def with_points(self, points: Iterable[float], radius: float | None = None) -> "SmoothFn":
        return SmoothFn(
            self.branches,
            self.schedule,
            tuple(self.points) + tuple(points),
            self.radius if radius is None else max(radius, self.radius),
            self.name,
        )

    # -- evaluation -------------------------------------------------------------

    def raw(self, x, strict: bool = True) -> np.ndarray:
        """Plain double-precision evaluation, no repair near the declared points."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        signs = self.schedule(x)
        for s in np.unique(signs):
            m = signs == s
            out[m] = ex.evaluate(self.branch(int(s)), x[m], strict=strict)
        return out

    def raw_safe(self, x) -> np.ndarray:
        """Like ``raw`` but NaN wherever the expression is undefined or overflows."""
        return self.raw(x, strict=False)

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        flat = np.atleast_1d(xa).ravel()
        out = np.empty_like(flat)
        near = np.zeros(flat.shape, dtype=bool)
        if self.radius > 0:
            for p in self.points:
                zone = np.abs(flat - p) < self.radius
                if not zone.any():
                    continue
                if self._continues_through(p):
                    out[zone] = self._interp(p, 0, flat[zone])
                else:
                    right = zone & (flat >= p)
                    left = zone & (flat < p)
                    if right.any():
                        out[right] = self._interp(p, 1, flat[right])
                    if left.any():
                        out[left] = self._interp(p, -1, flat[left])
                near |= zone
        if (~near).any():
            out[~near] = self.raw(flat[~near])
        if xa.ndim == 0:
            return float(out[0])
        return out.reshape(xa.shape)

    def evaluate_mp(self, x: float):
        sign = int(self.schedule(np.array([x]))[0])
        with mpmath.workdps(MP_DPS):
            return ex.evaluate_mp(self.branch(sign), x)

    def _continues_through(self, p: float) -> bool:
        s = self.schedule(np.array([p - self.radius, p + self.radius]))
        return s[0] == s[1] and not any(abs(b - p) < self.radius for b in self.schedule.breaks)

    def _interp(self, p: float, side: int, x: np.ndarray) -> np.ndarray:
        key = (p, side)
        with self._lock:
            hit = self._cheb.get(key)
        if hit is None:
            if side == 0:
                a, b = p - self.radius, p + self.radius
                k = np.arange(FIT_NODES)
                t = np.cos(np.pi * (2 * k + 1) / (2 * FIT_NODES))
                t = t[np.abs(t) >= GAP]
                deg = FIT_DEGREE
            else:
                # first-kind Chebyshev nodes: strictly inside (a, b), never at p
                a, b = (p, p + self.radius) if side > 0 else (p - self.radius, p)
                k = np.arange(CHEB_NODES)
                t = np.cos(np.pi * (2 * k + 1) / (2 * CHEB_NODES))
                deg = CHEB_NODES - 1
            nodes = 0.5 * (a + b) + 0.5 * (b - a) * t
            vals = np.array([float(self.evaluate_mp(float(xn))) for xn in nodes])
            coef = chebyshev.chebfit(t, vals, deg)
            hit = (coef, a, b)
            with self._lock:
                self._cheb[key] = hit
        coef, a, b = hit
        return chebyshev.chebval((2.0 * x - a - b) / (b - a), coef)


def lift(op: Callable[..., ex.Expr], *fns: SmoothFn, points: Iterable[float] = (), radius: float = 0.0, name: str = "") -> SmoothFn:
    """Apply an expression-level operation branch by branch."""
    schedule = next((f.schedule for f in fns if len(f.branches) > 1), fns[0].schedule)
    for f in fns:
        if len(f.branches) > 1 and f.schedule != schedule:
            raise ValueError("cannot combine functions with different sign schedules")
    branches = {s: op(*(f.branch(s) for f in fns)) for s in schedule.values}
    all_points = [p for f in fns for p in f.points] + list(points)
    r = max([f.radius for f in fns] + [radius])
    return SmoothFn(branches, schedule, _dedupe(all_points, r), r, name)


def calibrated_radius(
    fn: SmoothFn,
    points: Sequence[float],
    start: float,
    tol: float = 1e-10,
    doublings: int = 5,
    probes: Sequence[float] = (1.0, 1.3, 1.7, 2.5),
) -> float:
    """Smallest start * 2**k such that plain evaluation of fn and fn' is accurate outside it.

    Accuracy is judged against high-precision evaluation at a few distances
    just beyond the radius on both sides of every point.
    """
    checks = [fn, fn.derivative()]
    r = start
    for _ in range(doublings):
        xs = np.array([p + s * q * r for p in points for q in probes for s in (-1.0, 1.0)])
        if xs.size == 0:
            return r
        ok = True
        for f in checks:
            fast = f.raw_safe(xs)
            for xi, v in zip(xs, fast):
                ref = float(f.evaluate_mp(float(xi)))
                if not abs(v - ref) <= tol * max(1.0, abs(ref)):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return r
        r *= 2.0
    return r


def _dedupe(points: Sequence[float], radius: float) -> list[float]:
    out: list[float] = []
    tol = max(1e-9, 1e-6 * radius)
    for p in sorted(points):
        if not out or abs(p - out[-1]) > tol:
            out.append(p)
    return out


def find_sign_changes(f: Callable, lo: float, hi: float, n: int = 4001, xtol: float = 1e-13) -> list[float]:
    """Zeros of ``f`` on [lo, hi] located by sign changes on n samples.

    All brackets are bisected together so each step is one vectorized call;
    large expression trees make scalar root finders very slow.
    """
    x = np.linspace(lo, hi, n)
    y = f(x)
    roots = [float(x[i]) for i in np.flatnonzero(y == 0.0)]
    idx = np.flatnonzero(np.sign(y[:-1]) * np.sign(y[1:]) < 0)
    if idx.size:
        a, b = x[idx].copy(), x[idx + 1].copy()
        ya = y[idx].copy()
        while np.max(b - a) > xtol:
            m = 0.5 * (a + b)
            if np.all((m == a) | (m == b)):
                break
            ym = f(m)
            left = np.sign(ym) == np.sign(ya)
            a = np.where(left, m, a)
            ya = np.where(left, ym, ya)
            b = np.where(left, b, m)
        roots.extend(float(r) for r in 0.5 * (a + b))
    return sorted(roots)
