"""Finite-difference Schroedinger oracle: eigenpairs, residuals and model verification."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import grid as gr
from . import kernels
from .grid import Grid

__all__ = [
    "SolverError",
    "DiscreteOperator",
    "Eigenpairs",
    "lowest_eigenpairs",
    "richardson",
    "residual",
    "count_nodes",
    "Tolerances",
    "SpectrumReport",
    "verify_model",
    "spectrum",
]

count_nodes = gr.count_nodes
CONTINUUM_MARGIN = 1e-3
RESIDUAL_EDGE = 3


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiscreteOperator:
    """-1/2 d^2/dx^2 + V on the interior points, Dirichlet ends, 3-point Laplacian."""

    grid: Grid
    potential: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.potential, dtype=float)
        if v.shape != self.grid.x.shape:
            raise ValueError("potential samples do not match the grid")
        if not np.all(np.isfinite(v[1:-1])):
            raise ValueError("potential must be finite on interior points")

    @classmethod
    def from_function(cls, v: Callable, grid: Grid) -> "DiscreteOperator":
        return cls(grid, np.asarray(v(grid.x), dtype=float))

    @property
    def size(self) -> int:
        return self.grid.points - 2

    @property
    def diagonal(self) -> np.ndarray:
        return 1.0 / self.grid.h**2 + np.asarray(self.potential, dtype=float)[1:-1]

    @property
    def off_diagonal(self) -> np.ndarray:
        return np.full(self.size - 1, -0.5 / self.grid.h**2)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        d, o = self.diagonal, self.off_diagonal
        out = d * v
        out[:-1] += o * v[1:]
        out[1:] += o * v[:-1]
        return out


@dataclass(frozen=True)
class Eigenpairs:
    values: np.ndarray
    vectors: np.ndarray  # (k, N) on the full grid, zero at both ends, Simpson-normalized
    residuals: np.ndarray  # discrete relative residuals |T v - E v| / (max(1, |E|) |v|)


def _inverse_iteration(d, o, shift, rng, basis, iterations, backend):
    n = d.shape[0]
    v = rng.standard_normal(n)
    for _ in range(iterations):
        v = kernels.solve_tridiagonal(o, d - shift, o, v, backend=backend)
        for b in basis:
            v -= (b @ v) * b
        v /= np.linalg.norm(v)
    return v


def lowest_eigenpairs(
    op: DiscreteOperator,
    k: int,
    seed: int = 42,
    rel_tol: float = 1e-12,
    backend: str | None = None,
) -> Eigenpairs:
    """k lowest eigenpairs: Sturm bisection for values, inverse iteration for vectors."""
    if not 1 <= k <= 10:
        raise ValueError("k must be between 1 and 10")
    d, o = op.diagonal, op.off_diagonal
    vals = kernels.lowest_eigenvalues(d, o, k, rel_tol=rel_tol, backend=backend)
    rng = np.random.default_rng(seed)
    scale = max(1.0, float(np.max(np.abs(vals))))
    vecs, res = [], []
    basis: list[np.ndarray] = []
    for lam in vals:
        shift = lam
        for attempt in range(4):
            v = _inverse_iteration(d, o, shift, rng, basis, 2 + 2 * attempt, backend)
            r = float(np.linalg.norm(op.matvec(v) - lam * v) / max(1.0, abs(lam)))
            if r < 1e-8:
                break
            # near-degenerate cluster: nudge the shift off the eigenvalue and iterate longer
            shift = lam + (attempt + 1) * 1e-10 * scale
        else:
            raise SolverError(f"inverse iteration did not converge for E={lam:.12g} (residual {r:.3g})")
        basis.append(v)
        full = np.zeros(op.grid.points)
        full[1:-1] = v
        vecs.append(gr.fix_sign(gr.normalize(full, op.grid)))
        res.append(r)
    return Eigenpairs(np.asarray(vals), np.asarray(vecs), np.asarray(res))


def richardson(coarse: np.ndarray, fine: np.ndarray) -> np.ndarray:
    """Cancel the O(h^2) term between spacings h and h/2."""
    return (4.0 * np.asarray(fine) - np.asarray(coarse)) / 3.0


def spectrum(
    v: Callable,
    grid: Grid,
    k: int,
    seed: int = 42,
    extrapolate: bool = True,
    backend: str | None = None,
) -> tuple[np.ndarray, Eigenpairs]:
    """Lowest k levels of -1/2 d^2/dx^2 + v(x), Richardson-extrapolated from N and 2N - 1."""
    pairs = lowest_eigenpairs(DiscreteOperator.from_function(v, grid), k, seed, backend=backend)
    if not extrapolate:
        return pairs.values, pairs
    fine = lowest_eigenpairs(DiscreteOperator.from_function(v, grid.refined()), k, seed, backend=backend)
    return richardson(pairs.values, fine.values), pairs


def residual(v: np.ndarray, psi: np.ndarray, energy: float, grid: Grid) -> float:
    """max |-1/2 psi'' + (V - E) psi| / max |psi| on the interior, 3 points trimmed per edge."""
    d2 = gr.second_derivative(psi, grid.h)
    r = -0.5 * d2 + (np.asarray(v) - energy) * psi
    sl = slice(RESIDUAL_EDGE, -RESIDUAL_EDGE)
    return float(np.max(np.abs(r[sl])) / np.max(np.abs(psi)))


@dataclass(frozen=True)
class Tolerances:
    eigenvalue: float = 5e-4  # |E_fd - E| <= eigenvalue * max(1, |E|)
    zero_mode: float = 1e-6
    residual: float = 1e-5
    gram: float = 1e-6
    overlap: float = 1e-3  # 1 - |<phi_fd, psi>| for matching states
    richardson: bool = True

    def __post_init__(self):
        for k, v in asdict(self).items():
            if k != "richardson" and not v > 0:
                raise ValueError(f"tolerance {k} must be positive")


@dataclass
class SpectrumReport:
    requested: int
    eigenvalues: list[float]
    extrapolated: list[float] | None
    expected: list[float | None]
    residuals: list[float | None]
    node_counts_fd: list[int]
    node_counts_analytic: list[int | None]
    gram: list[list[float]]
    overlaps: list[float | None]
    verdicts: dict[str, bool]
    details: dict = field(default_factory=dict)
    eigenvectors: np.ndarray | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    @property
    def bound_states(self) -> int:
        return self.details.get("bound_states", self.requested)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "eigenvectors"}
        d["passed"] = self.passed
        return d

    def format(self) -> str:
        lines = []
        best = self.extrapolated or self.eigenvalues
        for n, e in enumerate(best):
            exp = self.expected[n]
            tail = f" expected {exp:.10g}" if exp is not None else ""
            res = self.residuals[n]
            tail += f" residual {res:.2e}" if res is not None else ""
            lines.append(f"  E{n} = {e:.10g}{tail} nodes(fd)={self.node_counts_fd[n]}")
        for name, ok in self.verdicts.items():
            lines.append(f"  [{'ok  ' if ok else 'FAIL'}] {name}")
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def verify_model(model, tolerances: Tolerances | None = None, seed: int = 42, backend: str | None = None) -> SpectrumReport:
    """Compare a QesModel's analytic claims with the finite-difference oracle.

    Analytic state n is matched to FD level n (oscillation theorem).  Levels
    are requested only for the available analytic states and, for potentials
    tending to a constant, only below that constant minus a small margin.
    """
    tol = tolerances or Tolerances()
    g = model.grid
    v = model.potential
    available = [n for n in model.available]
    v_inf = model.metadata.get("v_inf")
    if v_inf is not None:
        available = [n for n in available if model.energies[n] < v_inf - CONTINUUM_MARGIN]
    if not available:
        raise SolverError("model has no verifiable bound states")
    k = max(available) + 1
    op = DiscreteOperator(g, v)
    pairs = lowest_eigenpairs(op, k, seed, backend=backend)
    extrap = None
    if tol.richardson:
        if model.potential_fn is None:
            raise SolverError("Richardson extrapolation needs the model's potential function")
        fine = lowest_eigenpairs(DiscreteOperator(g.refined(), model.potential_on(g.refined())), k, seed, backend=backend)
        extrap = richardson(pairs.values, fine.values)
    best = extrap if extrap is not None else pairs.values

    expected: list[float | None] = [None] * k
    residuals: list[float | None] = [None] * k
    nodes_an: list[int | None] = [None] * k
    overlaps: list[float | None] = [None] * k
    verdicts: dict[str, bool] = {}
    for n in available:
        psi = model.states[n]
        e = model.energies[n]
        expected[n] = e
        residuals[n] = residual(v, psi, e, g)
        nodes_an[n] = gr.count_nodes(psi)
        overlaps[n] = float(abs(gr.inner_product(pairs.vectors[n], psi, g)))
        err = abs(best[n] - e)
        if e == 0.0:
            verdicts[f"E{n}_zero_mode"] = bool(err < tol.zero_mode)
        else:
            verdicts[f"E{n}_eigenvalue"] = bool(err <= tol.eigenvalue * max(1.0, abs(e)))
        verdicts[f"psi{n}_residual"] = bool(residuals[n] < tol.residual)
        verdicts[f"psi{n}_nodes"] = bool(nodes_an[n] == n and gr.count_nodes(pairs.vectors[n]) == n)
        verdicts[f"psi{n}_overlap"] = bool(1.0 - overlaps[n] < tol.overlap)
        verdicts[f"psi{n}_normalized"] = bool(abs(gr.inner_product(psi, psi, g) - 1.0) < 1e-8)
    gram = model.gram()
    off = gram - np.diag(np.diag(gram))
    verdicts["gram_offdiagonal"] = bool(np.max(np.abs(off), initial=0.0) < tol.gram)
    verdicts["eigensolver_residual"] = bool(np.max(pairs.residuals) < 1e-8)
    return SpectrumReport(
        requested=k,
        eigenvalues=[float(e) for e in pairs.values],
        extrapolated=None if extrap is None else [float(e) for e in extrap],
        expected=expected,
        residuals=residuals,
        node_counts_fd=[gr.count_nodes(p) for p in pairs.vectors],
        node_counts_analytic=nodes_an,
        gram=gram.tolist(),
        overlaps=overlaps,
        verdicts=verdicts,
        details={
            "bound_states": len(available),
            "grid": {"half_width": g.half_width, "points": g.points},
            "seed": seed,
            "v_inf": v_inf,
        },
        eigenvectors=pairs.vectors,
    )
