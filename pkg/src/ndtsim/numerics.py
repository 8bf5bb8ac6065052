"""
Small dense linear algebra and scalar search routines.

Everything here works on plain numpy arrays. The matrices involved are
tiny (a few hundred rows at most), so clarity wins over speed.
"""

from collections import namedtuple

import numpy as np
from scipy.linalg import matrix_balance
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

SpectralInfo = namedtuple("SpectralInfo", ["converged", "iterations", "upper", "lower"])

_DIAG_SHIFT = 1e-12
_PIVOT_TOL = 1e-12
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
DEFAULT_RESOLUTION = 1e-4  # fraction of the search interval


class SingularMatrixError(ValueError):
    """Raised when elimination meets a pivot below the tolerance."""


def spectral_radius(m, tol=1e-12, max_iter=20000, full_output=False):
    """
    Spectral radius of a square, elementwise nonnegative matrix.

    The sparsity graph is split into strongly connected components; the
    radius is the largest radius over the diagonal blocks. Each block of
    size one is its own eigenvalue. Larger blocks are irreducible and
    handled by power iteration on ``B = block + s*I``: the shift keeps the
    iterates strictly positive and makes ``B`` primitive, so the
    Collatz-Wielandt bounds ``min(Bx/x) <= rho(B) <= max(Bx/x)`` close
    geometrically. Blocks are diagonally balanced first so that badly
    scaled entries do not stall the iteration. For a nonnegative matrix the Perron root moves by
    exactly ``s``, which is subtracted afterwards.

    Parameters
    ----------
    m : array_like, shape (n, n)
        Nonnegative matrix.
    tol : float
        Tolerance on the returned radius, absolute below one and relative
        above.
    max_iter : int
        Iteration cap per block. On exhaustion (nearly defective blocks
        whose leading eigenvalues almost coincide) the block radius comes
        from a dense eigenvalue solve and ``info.converged`` is False.
    full_output : bool
        If True, return ``(rho, SpectralInfo)``.

    Returns
    -------
    rho : float
    info : SpectralInfo, optional
        Convergence flag, total iterations and the bounds on ``rho``.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("spectral_radius needs a square matrix, got shape %s" % (m.shape,))
    if m.shape[0] == 0:
        raise ValueError("empty matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    if np.any(m < 0):
        raise ValueError("matrix must be elementwise nonnegative")

    ncomp, labels = connected_components(csr_matrix(m > 0), directed=True, connection="strong")
    rho = upper = lower = 0.0
    converged = True
    total_iter = 0
    for c in range(ncomp):
        idx = np.flatnonzero(labels == c)
        block = m[np.ix_(idx, idx)]
        if len(idx) == 1:
            r = u = l = float(block[0, 0])
        else:
            r, u, l, ok, it = _perron_root(block, tol, max_iter)
            converged = converged and ok
            total_iter += it
        if r > rho:
            rho, upper, lower = r, u, l
    info = SpectralInfo(converged, total_iter, upper, lower)
    return (rho, info) if full_output else rho


def _perron_root(block, tol, max_iter):
    n = block.shape[0]
    # work on a unit-scale copy; the radius scales linearly
    scale = float(np.max(block))
    unit = block / scale
    # diagonal similarity scaling keeps the spectrum and evens out a skewed Perron vector
    with np.errstate(invalid="ignore"):  # unused permutation output
        unit, _ = matrix_balance(unit, permute=False)
    shift = _DIAG_SHIFT + float(np.max(np.sum(unit, axis=1))) / n
    b = unit + shift * np.eye(n)
    x = np.full(n, 1.0 / n)
    upper = lower = np.nan
    ok = False
    it = 0
    for it in range(1, max_iter + 1):
        y = b @ x
        if not np.all(y > 0):
            break
        ratios = y / x
        upper = float(np.max(ratios))
        lower = float(np.min(ratios))
        if (upper - lower) * scale <= tol * max(1.0, (lower - shift) * scale):
            ok = True
            break
        x = y / np.sum(y)
    if ok:
        r = (0.5 * (upper + lower) - shift) * scale
    else:
        r = float(np.max(np.abs(np.linalg.eigvals(block))))
    return max(r, 0.0), (upper - shift) * scale, (lower - shift) * scale, ok, it


def solve_linear(a, b):
    """
    Solve ``a @ x = b`` by Gaussian elimination with partial pivoting.

    Raises
    ------
    SingularMatrixError
        If a pivot falls below 1e-12 (relative to the largest entry of
        ``a`` when that exceeds one).
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("solve_linear needs a square matrix, got shape %s" % (a.shape,))
    n = a.shape[0]
    if b.shape != (n,):
        raise ValueError("right-hand side has shape %s, expected (%d,)" % (b.shape, n))

    pivot_tol = _PIVOT_TOL * max(1.0, float(np.max(np.abs(a))) if n else 1.0)
    for col in range(n):
        p = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[p, col]) < pivot_tol:
            raise SingularMatrixError("matrix is singular to working precision (column %d)" % col)
        if p != col:
            a[[col, p]] = a[[p, col]]
            b[[col, p]] = b[[p, col]]
        factors = a[col + 1:, col] / a[col, col]
        a[col + 1:, col:] -= np.outer(factors, a[col, col:])
        b[col + 1:] -= factors * b[col]

    x = np.empty(n)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - a[row, row + 1:] @ x[row + 1:]) / a[row, row]
    return x


def svd_singular_values(h):
    """
    Singular values of a complex 2x2 matrix, largest first.

    A Givens rotation and two phase rotations reduce ``H`` to a real
    nonnegative upper triangle, whose singular values follow from the
    LAPACK ``dlas2`` formulas. This stays accurate when the two values
    nearly coincide, where the characteristic-polynomial roots do not.
    """
    h = np.asarray(h, dtype=complex)
    if h.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix, got shape %s" % (h.shape,))
    if not np.all(np.isfinite(h)):
        raise ValueError("matrix entries must be finite")
    m = max(abs(h[0, 0]), abs(h[1, 0]))
    if m == 0.0:
        return float(np.hypot(abs(h[0, 1]), abs(h[1, 1]))), 0.0
    # rotation from the first column's direction only
    u, v = _unscale(h[0, 0], m), _unscale(h[1, 0], m)
    norm = float(np.hypot(abs(u), abs(v)))
    c, s = u / norm, v / norm
    r11 = m * norm
    r12 = np.conj(c) * h[0, 1] + np.conj(s) * h[1, 1]
    r22 = -s * h[0, 1] + c * h[1, 1]
    big, small = _triangle_singular_values(r11, abs(r12), abs(r22))
    # rounding can swap nearly equal values
    return max(big, small), min(big, small)


def _unscale(z, d):
    # parts separately: complex division by a subnormal real overflows
    return z.real / d + 1j * (z.imag / d)


def _triangle_singular_values(f, g, h):
    """Singular values of ``[[f, g], [0, h]]`` for ``f, g, h >= 0``."""
    lo, hi = min(f, h), max(f, h)
    if lo == 0.0:
        if hi == 0.0:
            return float(g), 0.0
        big, small = max(hi, g), min(hi, g)
        return float(big * np.sqrt(1.0 + (small / big) ** 2)), 0.0
    if g < hi:
        a = 1.0 + lo / hi
        t = (hi - lo) / hi
        u = (g / hi) ** 2
        k = 2.0 / (np.sqrt(a * a + u) + np.sqrt(t * t + u))
        return float(hi / k), float(lo * k)
    u = hi / g
    if u == 0.0:
        return float(g), float(lo * hi / g)
    a = 1.0 + lo / hi
    t = (hi - lo) / hi
    k = 1.0 / (np.sqrt(1.0 + (a * u) ** 2) + np.sqrt(1.0 + (t * u) ** 2))
    return float(g / (k + k)), float(2.0 * lo * k * u)


def golden_or_grid_maximize(f, lo, hi, resolution=None, vectorized=False, refine_iter=60):
    """
    Maximize a scalar function on ``[lo, hi]``.

    An exhaustive scan over ``lo, lo + resolution, ..., hi`` is followed by
    a golden-section refinement inside the bracket around the best grid
    point. The refined point replaces the grid point only if it is
    strictly better, so ties (including constant functions) resolve to the
    lowest grid point.

    If ``f`` is Lipschitz with constant L, the returned maximum is within
    ``L * resolution`` of the true maximum. For functions that are
    unimodal inside the winning bracket, the refinement brings the error
    down to roughly ``L * resolution * 0.618**refine_iter``.

    Parameters
    ----------
    f : callable
        Objective. With ``vectorized=True`` it must accept a 1-D array.
    lo, hi : float
        Interval bounds, ``lo <= hi``.
    resolution : float, optional
        Grid step, strictly positive. Defaults to ``1e-4 * (hi - lo)``.

    Returns
    -------
    argmax, fmax : float
    """
    lo = float(lo)
    hi = float(hi)
    if not hi >= lo:
        raise ValueError("empty interval [%r, %r]" % (lo, hi))
    if resolution is None:
        resolution = DEFAULT_RESOLUTION * (hi - lo) if hi > lo else 1.0
    if not resolution > 0:
        raise ValueError("resolution must be positive")

    count = int(np.floor((hi - lo) / resolution + 1e-9)) + 1
    grid = np.minimum(lo + resolution * np.arange(count), hi)
    if grid[-1] < hi:
        grid = np.append(grid, hi)
    if vectorized:
        values = np.asarray(f(grid), dtype=float)
    else:
        values = np.array([f(x) for x in grid], dtype=float)
    k = int(np.argmax(values))
    best_x, best_f = float(grid[k]), float(values[k])
    if len(grid) == 1:
        return best_x, best_f

    a = float(grid[max(k - 1, 0)])
    b = float(grid[min(k + 1, len(grid) - 1)])

    def call(x):
        if vectorized:
            return float(np.asarray(f(np.array([x])), dtype=float)[0])
        return float(f(x))

    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = call(c), call(d)
    for _ in range(refine_iter):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = call(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = call(d)
    x_ref, f_ref = (c, fc) if fc >= fd else (d, fd)
    if f_ref > best_f:
        return x_ref, f_ref
    return best_x, best_f


def grid_maximize_2d(f, lo, hi, points=201, refine_points=21):
    """
    Maximize ``f(x, y)`` over the box ``[lo[0], hi[0]] x [lo[1], hi[1]]``.

    ``f`` takes two broadcastable arrays. A ``points x points`` mesh is
    scanned, then a ``refine_points`` mesh spanning the neighbouring cells
    of the best node is scanned once. Ties go to the lowest flat index,
    so the result does not depend on evaluation order.

    Returns
    -------
    (x, y), fmax
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(hi < lo):
        raise ValueError("empty box")
    xs = np.linspace(lo[0], hi[0], points)
    ys = np.linspace(lo[1], hi[1], points)
    vals = np.asarray(f(xs[:, None], ys[None, :]), dtype=float)
    vals = np.broadcast_to(vals, (points, points))
    i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
    best = ((float(xs[i]), float(ys[j])), float(vals[i, j]))
    if refine_points < 2 or points < 2:
        return best

    xr = np.linspace(xs[max(i - 1, 0)], xs[min(i + 1, points - 1)], refine_points)
    yr = np.linspace(ys[max(j - 1, 0)], ys[min(j + 1, points - 1)], refine_points)
    rv = np.broadcast_to(np.asarray(f(xr[:, None], yr[None, :]), dtype=float),
                         (refine_points, refine_points))
    ii, jj = np.unravel_index(int(np.argmax(rv)), rv.shape)
    if rv[ii, jj] > best[1]:
        return (float(xr[ii]), float(yr[jj])), float(rv[ii, jj])
    return best
