"""Analytic eigenstates of the QES Hamiltonian and the first-order intertwining maps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import grid as gr
from .grid import Grid, inner_product
from .smooth import SmoothFn
from .superpot import SuperTriple, potential

__all__ = [
    "NonNormalizableError",
    "QesModel",
    "ground_state",
    "excited_state",
    "excited_states",
    "apply_B",
    "inner_product",
    "state_from_log",
    "tail_mass",
    "build_qes_model",
    "choose_grid",
]

TAIL_FRACTION = 0.10
TAIL_LIMIT = 1e-6
EDGE_FRACTION = 0.05
EDGE_LIMIT = 1e-10


class NonNormalizableError(ValueError):
    """A candidate state carries too much weight near the grid edges."""


def tail_mass(psi: np.ndarray, grid: Grid, fraction: float = TAIL_FRACTION) -> float:
    """Fraction of the squared norm living in the outer ``fraction`` of the grid."""
    total = gr.integrate(psi * psi, grid)
    outer = np.where(grid.outer_mask(fraction), psi * psi, 0.0)
    return float(gr.integrate(outer, grid) / total)


def state_from_log(log_amp: np.ndarray, prefactor: np.ndarray | None, grid: Grid, check_tail: bool = True) -> np.ndarray:
    """Normalized ``prefactor * exp(log_amp)``, exponent shifted by its maximum first."""
    log_amp = np.asarray(log_amp, dtype=float)
    if prefactor is not None:
        with np.errstate(divide="ignore"):
            log_amp = log_amp + np.log(np.abs(prefactor))
        sign = np.sign(prefactor)
    else:
        sign = 1.0
    psi = sign * np.exp(log_amp - np.max(log_amp))
    if not np.all(np.isfinite(psi)):
        raise NonNormalizableError("state is not finite on the grid")
    if check_tail:
        mass = tail_mass(psi, grid)
        if mass > TAIL_LIMIT:
            raise NonNormalizableError(f"tail mass {mass:.3g} in the outer {TAIL_FRACTION:.0%} exceeds {TAIL_LIMIT:g}")
    return gr.fix_sign(gr.normalize(psi, grid))


def _check_endpoint_signs(w: Callable, grid: Grid, name: str = "W"):
    lo, hi = w(np.array([grid.x[0], grid.x[-1]]))
    if not (lo < 0 < hi):
        raise NonNormalizableError(f"{name} must be negative at the left edge and positive at the right edge (got {lo:.3g}, {hi:.3g})")


def ground_state(w: SmoothFn | Callable, grid: Grid, anchor: float = 0.0, check_tail: bool = True) -> np.ndarray:
    """Zero mode exp(-int W) of V- = (W^2 - W')/2, normalized."""
    _check_endpoint_signs(w, grid)
    return state_from_log(-gr.cumulative_integral(w, grid, anchor), None, grid, check_tail)


def excited_state(t: SuperTriple, wplus: SmoothFn, wplus_tilde: SmoothFn, grid: Grid, n: int, check_tail: bool = True) -> np.ndarray:
    """The n-th analytic state, n in {1, 2}."""
    x = grid.x
    if n == 1:
        return state_from_log(-gr.cumulative_integral(t.w1, grid, t.x0), wplus(x), grid, check_tail)
    if n == 2:
        pre = (t.w0(x) + t.w2(x)) * wplus_tilde(x) - wplus_tilde.derivative()(x)
        return state_from_log(-gr.cumulative_integral(t.w2, grid, t.x0), pre, grid, check_tail)
    raise ValueError("n must be 1 or 2")


def excited_states(
    t: SuperTriple,
    wplus: SmoothFn,
    wplus_tilde: SmoothFn,
    grid: Grid,
    check_tail: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """psi1 = W+ exp(-int W1) and psi2 = ((W0 + W2) W~+ - W~+') exp(-int W2)."""
    return tuple(excited_state(t, wplus, wplus_tilde, grid, n, check_tail) for n in (1, 2))


def apply_B(w, sign: int, psi: np.ndarray, grid: Grid) -> np.ndarray:
    """(-sign * d/dx + W) psi / sqrt(2); sign=-1 is B-, which annihilates exp(-int W)."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    wv = w(grid.x) if callable(w) else np.broadcast_to(np.asarray(w, dtype=float), grid.x.shape)
    return (-sign * gr.first_derivative(psi, grid.h) + wv * psi) / math.sqrt(2.0)


@dataclass(frozen=True)
class QesModel:
    """Potential V- on a grid with up to three analytic eigenstates.

    ``states[n]`` is None when the n-th analytic candidate is not normalizable.
    """

    grid: Grid
    potential: np.ndarray
    energies: tuple[float, float, float]
    states: tuple[np.ndarray | None, np.ndarray | None, np.ndarray | None]
    metadata: dict = field(default_factory=dict)
    potential_fn: Callable | None = None

    @property
    def bound_states(self) -> int:
        n = 0
        for s in self.states:
            if s is None:
                break
            n += 1
        return n

    @property
    def available(self) -> list[int]:
        return [i for i, s in enumerate(self.states) if s is not None]

    def potential_on(self, grid: Grid) -> np.ndarray:
        if self.potential_fn is None:
            raise ValueError("model has no potential function for resampling")
        return np.asarray(self.potential_fn(grid.x), dtype=float)

    def gram(self) -> np.ndarray:
        idx = self.available
        g = np.empty((len(idx), len(idx)))
        for a, i in enumerate(idx):
            for b, j in enumerate(idx):
                g[a, b] = inner_product(self.states[i], self.states[j], self.grid)
        return g


def _edge_ok(states: Sequence[np.ndarray | None], grid: Grid) -> bool:
    mask = grid.outer_mask(EDGE_FRACTION)
    for s in states:
        if s is None:
            continue
        if np.max(np.abs(s[mask])) > EDGE_LIMIT * np.max(np.abs(s)):
            return False
    return True


def _grid(half_width: float, points: int, max_spacing: float | None) -> Grid:
    if max_spacing is not None:
        points = max(points, 2 * math.ceil(half_width / max_spacing) + 1)
    return Grid(half_width, points)


def choose_grid(
    make_states: Callable[[Grid], Sequence[np.ndarray | None]],
    half_width: float,
    points: int = 4001,
    doublings: int = 4,
    max_spacing: float | None = None,
):
    """Grow L (doubling at most ``doublings`` times) until every state is negligible at the edges.

    ``make_states`` returns unchecked candidates; after the last doubling any
    candidate whose outer tail still carries weight is replaced by None.  With
    ``max_spacing`` the point count grows with L so h stays bounded.
    """
    g = _grid(half_width, points, max_spacing)
    states = make_states(g)
    for _ in range(doublings):
        if _edge_ok(states, g):
            break
        g = _grid(2.0 * g.half_width, points, max_spacing)
        states = make_states(g)
    return g, [None if s is None or tail_mass(s, g) > TAIL_LIMIT else s for s in states]


def build_qes_model(
    triple: SuperTriple,
    wplus: SmoothFn,
    wplus_tilde: SmoothFn,
    half_width: float | None = None,
    points: int = 4001,
    adaptive: bool = True,
    metadata: dict | None = None,
    max_spacing: float | None = None,
) -> QesModel:
    """Sample V- and the three analytic states on a grid chosen per the edge rule."""
    if half_width is None:
        half_width = 10.0 / math.sqrt(min(triple.epsilon, triple.epsilon1, 1.0))

    def make(g: Grid):
        out: list[np.ndarray | None] = []
        for k in range(3):
            try:
                if k == 0:
                    out.append(ground_state(triple.w0, g, triple.x0, check_tail=False))
                else:
                    out.append(excited_state(triple, wplus, wplus_tilde, g, k, check_tail=False))
            except NonNormalizableError:
                out.append(None)
        return out

    if adaptive:
        g, states = choose_grid(make, half_width, points, max_spacing=max_spacing)
    else:
        g = Grid(half_width, points)
        states = [None if s is None or tail_mass(s, g) > TAIL_LIMIT else s for s in make(g)]
    if states[0] is None:
        raise NonNormalizableError("the zero mode exp(-int W0) is not normalizable")
    vfn = potential(triple.w0, -1)
    e, e1 = triple.epsilon, triple.epsilon1
    return QesModel(
        grid=g,
        potential=vfn(g.x),
        energies=(0.0, e, e + e1),
        states=tuple(states),
        metadata=dict(metadata or {}),
        potential_fn=vfn,
    )
