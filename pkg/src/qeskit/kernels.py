"""Hot numeric kernels: Sturm bisection, pivoted tridiagonal solves, Hermite ratios.

Each kernel exists twice: a scalar-loop version compiled with numba and a
numpy version.  ``backend=None`` picks numba unless ``QESKIT_DISABLE_NUMBA`` is
set; tests and the benchmark pass ``"numba"`` or ``"numpy"`` explicitly.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from ._accel import HAVE_NUMBA, NUMBA_ENABLED, njit

PIVMIN = 1e-300


def _backend(backend: str | None) -> str:
    if backend is None:
        return "numba" if NUMBA_ENABLED else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    return backend


# -- Sturm counts -------------------------------------------------------------------


@njit
def _sturm_count_nb(diag, off2, shift):
    count = 0
    q = diag[0] - shift
    if q == 0.0:
        q = -PIVMIN
    if q < 0.0:
        count += 1
    for i in range(1, diag.shape[0]):
        q = (diag[i] - shift) - off2[i - 1] / q
        if q == 0.0:
            q = -PIVMIN
        if q < 0.0:
            count += 1
    return count


def _sturm_counts_np(diag, off2, shifts):
    shifts = np.asarray(shifts, dtype=float)
    q = diag[0] - shifts
    q[q == 0.0] = -PIVMIN
    count = (q < 0.0).astype(np.int64)
    for i in range(1, diag.shape[0]):
        q = (diag[i] - shifts) - off2[i - 1] / q
        q[q == 0.0] = -PIVMIN
        count += q < 0.0
    return count


def sturm_count(diag, off, shift: float, backend: str | None = None) -> int:
    """Number of eigenvalues of the symmetric tridiagonal (diag, off) below ``shift``."""
    diag = np.ascontiguousarray(diag, dtype=float)
    off2 = np.ascontiguousarray(off, dtype=float) ** 2
    if _backend(backend) == "numba":
        return int(_sturm_count_nb(diag, off2, float(shift)))
    return int(_sturm_counts_np(diag, off2, np.array([shift]))[0])


# -- bisection ------------------------------------------------------------------------


def _gershgorin(diag, off):
    r = np.zeros_like(diag)
    a = np.abs(off)
    r[:-1] += a
    r[1:] += a
    return float(np.min(diag - r)), float(np.max(diag + r))


@njit
def _bisect_nb(diag, off2, k, lo0, hi0, tol, maxiter):
    out = np.empty(k)
    for j in range(k):
        lo = lo0
        hi = hi0
        # eigenvalue j lies where the count crosses from <= j to >= j + 1
        if j > 0 and out[j - 1] > lo:
            lo = out[j - 1] - tol
        for _ in range(maxiter):
            if hi - lo <= tol:
                break
            mid = 0.5 * (lo + hi)
            if _sturm_count_nb(diag, off2, mid) > j:
                hi = mid
            else:
                lo = mid
        out[j] = 0.5 * (lo + hi)
    return out


def _bisect_np(diag, off2, k, lo0, hi0, tol, maxiter):
    lo = np.full(k, lo0)
    hi = np.full(k, hi0)
    idx = np.arange(k)
    for _ in range(maxiter):
        active = hi - lo > tol
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        counts = _sturm_counts_np(diag, off2, mid[active])
        above = counts > idx[active]
        a = np.flatnonzero(active)
        hi[a[above]] = mid[active][above]
        lo[a[~above]] = mid[active][~above]
    return 0.5 * (lo + hi)


def lowest_eigenvalues(diag, off, k: int, rel_tol: float = 1e-12, backend: str | None = None):
    """The ``k`` smallest eigenvalues by Sturm-sequence bisection, ascending.

    The bracket tolerance is ``rel_tol * scale`` with ``scale`` the magnitude of the
    initial bracket around the wanted eigenvalues (at least 1).
    """
    diag = np.ascontiguousarray(diag, dtype=float)
    off = np.ascontiguousarray(off, dtype=float)
    n = diag.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}]")
    off2 = off**2
    be = _backend(backend)
    count = (lambda s: int(_sturm_count_nb(diag, off2, s))) if be == "numba" else (
        lambda s: int(_sturm_counts_np(diag, off2, np.array([s]))[0])
    )
    lo, g_hi = _gershgorin(diag, off)
    lo -= 1e-12 * max(1.0, abs(lo))
    # the Gershgorin top can be astronomically large (steep walls); grow a tighter one
    step = 1.0
    hi = lo + step
    while count(hi) < k:
        step *= 2.0
        hi = lo + step
        if hi >= g_hi:
            hi = g_hi + 1e-12 * max(1.0, abs(g_hi))
            break
    tol = rel_tol * max(1.0, abs(lo), abs(hi))
    if be == "numba":
        return _bisect_nb(diag, off2, k, lo, hi, tol, 400)
    return _bisect_np(diag, off2, k, lo, hi, tol, 400)


# -- pivoted tridiagonal solve --------------------------------------------------------


@njit
def _gtsv_nb(dl_in, d_in, du_in, b_in):
    n = d_in.shape[0]
    dl = dl_in.copy()
    d = d_in.copy()
    du = du_in.copy()
    b = b_in.copy()
    du2 = np.zeros(max(n - 2, 0))
    for i in range(n - 1):
        if abs(d[i]) >= abs(dl[i]):
            if d[i] == 0.0:
                d[i] = PIVMIN
            fact = dl[i] / d[i]
            d[i + 1] -= fact * du[i]
            b[i + 1] -= fact * b[i]
        else:
            fact = d[i] / dl[i]
            d[i] = dl[i]
            temp = d[i + 1]
            d[i + 1] = du[i] - fact * temp
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du2[i]
            du[i] = temp
            temp = b[i]
            b[i] = b[i + 1]
            b[i + 1] = temp - fact * b[i + 1]
    if d[n - 1] == 0.0:
        d[n - 1] = PIVMIN
    x = np.empty(n)
    x[n - 1] = b[n - 1] / d[n - 1]
    if n > 1:
        x[n - 2] = (b[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2]
    for i in range(n - 3, -1, -1):
        x[i] = (b[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i]
    return x


def _gtsv_np(dl, d, du, b):
    n = d.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = du
    ab[1] = d
    ab[2, :-1] = dl
    try:
        return scipy.linalg.solve_banded((1, 1), ab, b, check_finite=False)
    except np.linalg.LinAlgError:
        ab[1] = np.where(d == 0.0, PIVMIN, d)
        ab[1, -1] += PIVMIN
        return scipy.linalg.solve_banded((1, 1), ab, b, check_finite=False)


def solve_tridiagonal(dl, d, du, b, backend: str | None = None):
    """Solve ``T x = b`` for tridiagonal T with partial pivoting (dgtsv-style).

    Exactly zero pivots are replaced by a tiny number so near-singular shifted
    systems (inverse iteration) still return a large, well-directed solution.
    """
    args = [np.ascontiguousarray(a, dtype=float) for a in (dl, d, du, b)]
    if _backend(backend) == "numba":
        return _gtsv_nb(*args)
    return _gtsv_np(*args)


# -- Hermite polynomials at imaginary argument ----------------------------------------


@njit
def _hermite_ratios_nb(n, y):
    m = y.shape[0]
    r_even = np.empty(m)
    r_odd = np.empty(m)
    top = 2 * n
    for j in range(m):
        # G_{k+1} = 2 y G_k + 2 k G_{k-1}; rescale to keep the triple in range
        g_prev2 = 0.0
        g_prev = 1.0
        g_cur = 2.0 * y[j]
        if top == 0:
            r_even[j] = np.nan
            r_odd[j] = np.nan
            continue
        for k in range(1, top):
            g_next = 2.0 * y[j] * g_cur + 2.0 * k * g_prev
            g_prev2 = g_prev
            g_prev = g_cur
            g_cur = g_next
            s = abs(g_cur)
            if s > 1e150:
                g_prev2 /= s
                g_prev /= s
                g_cur /= s
        # after the loop g_cur = G_2n, g_prev = G_{2n-1}, g_prev2 = G_{2n-2}
        r_even[j] = g_prev2 / g_cur
        r_odd[j] = g_prev / g_cur
    return r_even, r_odd


def _hermite_ratios_np(n, y):
    g_prev2 = np.zeros_like(y)
    g_prev = np.ones_like(y)
    g_cur = 2.0 * y
    for k in range(1, 2 * n):
        g_next = 2.0 * y * g_cur + 2.0 * k * g_prev
        g_prev2, g_prev, g_cur = g_prev, g_cur, g_next
        s = np.abs(g_cur)
        big = s > 1e150
        if big.any():
            g_prev2 = np.where(big, g_prev2 / np.where(big, s, 1.0), g_prev2)
            g_prev = np.where(big, g_prev / np.where(big, s, 1.0), g_prev)
            g_cur = np.where(big, g_cur / np.where(big, s, 1.0), g_cur)
    return g_prev2 / g_cur, g_prev / g_cur


def hermite_imag_ratios(n: int, y, backend: str | None = None):
    """Return ``(G_{2n-2}/G_{2n}, G_{2n-1}/G_{2n})`` at real ``y``.

    ``G_k(y) = i^{-k} H_k(i y)`` obeys ``G_{k+1} = 2y G_k + 2k G_{k-1}`` with
    ``G_0 = 1, G_1 = 2y``; even ``G_k`` are strictly positive so the ratios
    have no poles on the real line.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    y = np.ascontiguousarray(np.atleast_1d(np.asarray(y, dtype=float)))
    if _backend(backend) == "numba":
        return _hermite_ratios_nb(int(n), y)
    return _hermite_ratios_np(int(n), y)


def hermite_g(k: int, y):
    """Unscaled ``G_k(y)``; for tests and small k."""
    y = np.asarray(y, dtype=float)
    g_prev, g_cur = np.ones_like(y), 2.0 * y
    if k == 0:
        return g_prev
    for j in range(1, k):
        g_prev, g_cur = g_cur, 2.0 * y * g_cur + 2.0 * j * g_prev
    return g_cur
