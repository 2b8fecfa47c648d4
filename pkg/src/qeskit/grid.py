"""Uniform grids symmetric about a center, Simpson quadrature and finite-difference stencils."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import simpson


@dataclass(frozen=True)
class Grid:
    half_width: float
    points: int = 4001
    center: float = 0.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if self.points < 3 or self.points % 2 == 0:
            raise ValueError("points must be odd and >= 3")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / (self.points - 1)

    @cached_property
    def x(self) -> np.ndarray:
        x = np.linspace(self.center - self.half_width, self.center + self.half_width, self.points)
        x[self.points // 2] = self.center
        return x

    def refined(self) -> "Grid":
        """Same interval with the spacing halved (N -> 2N - 1)."""
        return Grid(self.half_width, 2 * self.points - 1, self.center)

    def outer_mask(self, fraction: float) -> np.ndarray:
        return np.abs(self.x - self.center) > (1.0 - fraction) * self.half_width


def integrate(f: np.ndarray, grid: Grid) -> float:
    return float(simpson(f, dx=grid.h))


def inner_product(a: np.ndarray, b: np.ndarray, grid: Grid) -> float:
    """Composite Simpson quadrature of a*b on the grid."""
    if a.shape != grid.x.shape or b.shape != grid.x.shape:
        raise ValueError("samples do not match the grid")
    return integrate(a * b, grid)


def normalize(psi: np.ndarray, grid: Grid) -> np.ndarray:
    norm = inner_product(psi, psi, grid)
    if not norm > 0 or not np.isfinite(norm):
        raise ValueError("cannot normalize a zero or non-finite function")
    return psi / np.sqrt(norm)


def cumulative_integral(f, grid: Grid, anchor: float = 0.0) -> np.ndarray:
    """Running integral of the callable ``f`` from ``anchor`` to every grid point.

    Each cell uses Simpson's rule with a midpoint evaluation, so the error is
    the same smooth function of x in every cell (no even/odd ripple that a
    second difference would amplify).
    """
    x = grid.x
    mid = 0.5 * (x[:-1] + x[1:])
    fx = np.asarray(f(x), dtype=float)
    fm = np.asarray(f(mid), dtype=float)
    cells = grid.h / 6.0 * (fx[:-1] + 4.0 * fm + fx[1:])
    out = np.concatenate(([0.0], np.cumsum(cells)))
    i0 = int(np.clip(np.searchsorted(x, anchor), 1, len(x) - 1))
    i0 = i0 - 1 if abs(x[i0 - 1] - anchor) <= abs(x[i0] - anchor) else i0
    return out - out[i0]


def first_derivative(f: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central differences, one-sided fourth-order at the two edge pairs."""
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    head = f[:5]
    tail = f[len(f) - 1 - np.arange(5)]
    for i in (0, 1):
        d[i] = _ONE_SIDED[i] @ head / h
        d[-1 - i] = -(_ONE_SIDED[i] @ tail) / h
    return d


# weights for f'(x_i), i = 0, 1, from the first five samples
_ONE_SIDED = (
    np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0,
    np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0,
)


def second_derivative(f: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central second difference on interior points; edges set to NaN."""
    d = np.full_like(f, np.nan)
    d[2:-2] = (-f[:-4] + 16.0 * f[1:-3] - 30.0 * f[2:-2] + 16.0 * f[3:-1] - f[4:]) / (12.0 * h * h)
    return d


def count_nodes(psi: np.ndarray, noise_floor: float = 1e-9) -> int:
    """Strict sign changes among samples above ``noise_floor * max|psi|``."""
    psi = np.asarray(psi, dtype=float)
    peak = np.max(np.abs(psi))
    if peak == 0:
        return 0
    s = np.sign(psi[np.abs(psi) > noise_floor * peak])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def fix_sign(psi: np.ndarray, rel: float = 1e-3) -> np.ndarray:
    """Flip so the rightmost lobe is positive."""
    peak = np.max(np.abs(psi))
    idx = np.flatnonzero(np.abs(psi) > rel * peak)
    if idx.size and psi[idx[-1]] < 0:
        return -psi
    return psi
