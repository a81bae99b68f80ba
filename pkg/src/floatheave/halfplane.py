"""Harmonic extension, Hilbert transform and Dirichlet-to-Neumann map on the upper half-plane.

Every operator has two numerical realisations that share no code path:

* a kernel route (Poisson quadrature, principal-value integration of the
  piecewise-linear interpolant), and
* a spectral route (FFT multipliers ``-i sign(xi)``, ``|xi|``, ``exp(-|xi| y)``).

Fourier convention: ``eta_hat(xi) = int eta(x) exp(-i x xi) dx``.

The spectral routes zero-pad the data to twice the line length and then add
the exact difference between the whole-line kernel and its periodic
image sum.  That difference is smooth on the padded period, so it is applied
by plain trapezoid convolution and the result is the whole-line operator
rather than its periodic cousin.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from .grids import (
    FieldPoints,
    InvalidParameterError,
    LineFunction,
    LineGrid,
    _hermite_matrix,
)

__all__ = [
    "poisson_kernel",
    "dirichlet_extend_H",
    "extension_rows",
    "hilbert_pv",
    "hilbert_pv_matrix",
    "hilbert_fft",
    "lambda_H",
    "line_derivative",
    "fourier_transform",
    "smooth_taper",
    "pl_poisson_segments",
]

_CHUNK = 1 << 22  # entries per dense kernel block


def poisson_kernel(x, y, xt):
    """``y / (pi ((x - xt)^2 + y^2))``; requires ``y > 0``."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise InvalidParameterError("Poisson kernel needs y > 0")
    d = np.asarray(x, dtype=float) - np.asarray(xt, dtype=float)
    return y / (np.pi * (d * d + y * y))


def _as_points(points) -> FieldPoints:
    if isinstance(points, FieldPoints):
        return points
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 2 and np.any(arr[:, 1] < 0):
        raise InvalidParameterError("field points must satisfy y >= 0")
    return FieldPoints(arr)


def _chunks(m: int, n: int):
    step = max(1, _CHUNK // max(n, 1))
    for start in range(0, m, step):
        yield slice(start, min(m, start + step))


def dirichlet_extend_H(eta: LineFunction, points) -> np.ndarray:
    """Poisson integral of ``eta`` at ``points`` by trapezoid quadrature on the line grid.

    Points on the boundary (``y == 0``) return ``eta`` interpolated at ``x``.
    """
    pts = _as_points(points)
    x, y = pts.x, pts.y
    out = np.empty(x.size)
    grid = eta.grid
    on_axis = y == 0
    if np.any(on_axis):
        interp = _hermite_matrix(grid.nodes[0], grid.dx, grid.size, x[on_axis])
        out[on_axis] = interp @ eta.values
    idx = np.flatnonzero(~on_axis)
    support = np.flatnonzero(eta.values != 0)
    if support.size == 0:
        out[idx] = 0.0
        return out
    xs, fs = grid.nodes[support], eta.values[support]
    for sl in _chunks(idx.size, xs.size):
        k = idx[sl]
        kern = poisson_kernel(x[k, None], y[k, None], xs[None, :])
        out[k] = grid.dx * (kern @ fs)
    return out


# ---------------------------------------------------------------------------
# piecewise-linear product integration
# ---------------------------------------------------------------------------


def pl_poisson_segments(a, b, fa, fb, x, y, *, gradient=False):
    """Exact Poisson integral of a piecewise-linear function, segment by segment.

    ``a, b, fa, fb`` describe segments ``[a, b]`` carrying the linear function
    from ``fa`` to ``fb``; ``x, y`` are target coordinates with ``y > 0``.
    All arguments broadcast; the caller sums over the segment axis.
    Returns the value, or ``(value, d/dx, d/dy)`` when ``gradient`` is set.
    """
    s = (fb - fa) / (b - a)
    da, db = a - x, b - x
    ra, rb = da * da + y * y, db * db + y * y
    atan = np.arctan2(db, y) - np.arctan2(da, y)
    logr = np.log(rb / ra)
    f_at_x = fa + s * (x - a)
    val = (f_at_x * atan + 0.5 * s * y * logr) / np.pi
    if not gradient:
        return val
    # d/dx: -[f P] over the segment ends plus slope * (arctan difference) / pi
    pa, pb = y / (np.pi * ra), y / (np.pi * rb)
    gx = fa * pa - fb * pb + s * atan / np.pi
    # d/dy: [f Q] over the segment ends plus slope * log ratio / (2 pi),  Q = (x - t) / (pi r)
    qa, qb = -da / (np.pi * ra), -db / (np.pi * rb)
    gy = fb * qb - fa * qa + s * logr / (2.0 * np.pi)
    return val, gx, gy


def _hat_kernels(line: LineGrid, y: float, *, gradient: bool):
    """Kernels of one hat function at every node offset, height ``y``."""
    n, h = line.size, line.dx
    d = h * np.arange(-(n - 1), n)  # target minus hat centre
    left = pl_poisson_segments(-h, 0.0, 0.0, 1.0, d, y, gradient=gradient)
    right = pl_poisson_segments(0.0, h, 1.0, 0.0, d, y, gradient=gradient)
    if gradient:
        return tuple(l + r for l, r in zip(left, right))
    return (left + right,)


def _toeplitz_apply(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """``out[i] = sum_j values[j] kernel[i - j + n - 1]`` along axis 0."""
    n = values.shape[0]
    if values.ndim == 2:
        kernel = kernel[:, None]
    full = fftconvolve(values, kernel, mode="full", axes=0)
    return full[n - 1 : 2 * n - 1]


def extension_rows(eta: LineFunction, y: float, *, gradient: bool = False, method: str = "linear"):
    """Harmonic extension at every line node at height ``y > 0``.

    ``method='linear'`` integrates the piecewise-linear interpolant exactly
    (accurate for any ``y``); ``method='trapezoid'`` is the plain quadrature
    used by :func:`dirichlet_extend_H`.  With ``gradient`` the result is
    ``(value, d/dx, d/dy)``.
    """
    if y <= 0:
        raise InvalidParameterError("extension rows need y > 0")
    line = eta.grid
    if method == "linear":
        kernels = _hat_kernels(line, y, gradient=gradient)
    elif method == "trapezoid":
        d = line.dx * np.arange(-(line.size - 1), line.size)
        r = d * d + y * y
        kernels = (line.dx * y / (np.pi * r),)
        if gradient:
            kernels += (-line.dx * 2 * d * y / (np.pi * r * r), line.dx * (d * d - y * y) / (np.pi * r * r))
    else:
        raise InvalidParameterError(f"unknown extension method {method!r}")
    out = [_toeplitz_apply(eta.values, k) for k in kernels]
    return tuple(out) if gradient else out[0]


# ---------------------------------------------------------------------------
# principal-value Hilbert transform
# ---------------------------------------------------------------------------


def _xlogx(d):
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(d)
    nz = d != 0
    out[nz] = d[nz] * np.log(np.abs(d[nz]))
    return out


def _safe_log(d):
    out = np.zeros_like(d)
    nz = d != 0
    out[nz] = np.log(np.abs(d[nz]))
    return out


def hilbert_pv_matrix(x0: float, h: float, n: int, targets) -> np.ndarray:
    """Dense matrix of the Hilbert transform of the piecewise-linear interpolant.

    The interpolant lives on ``n`` uniform nodes starting at ``x0`` and is
    zero outside them (so it may jump at the two end nodes).  At a target
    that coincides with a jumping end node only the finite part is kept.
    """
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    nodes = x0 + h * np.arange(n)
    out = np.empty((targets.size, n))
    for sl in _chunks(targets.size, n):
        d = targets[sl, None] - nodes[None, :]
        phi = _xlogx(d)
        w = np.zeros_like(d)
        # hat pieces: left half couples node j to j-1, right half to j+1
        w[:, 1:] += (phi[:, :-1] - phi[:, 1:]) / h
        w[:, :-1] += (phi[:, 1:] - phi[:, :-1]) / h
        w[:, 0] += _safe_log(d[:, 0]) + 1.0
        w[:, -1] += -_safe_log(d[:, -1]) - 1.0
        out[sl] = w / np.pi
    return out


def _pv_node_kernel(n: int) -> np.ndarray:
    """Offsets ``-(n-1) .. n-1`` of the uniform hat-function PV kernel (times pi)."""
    k = np.arange(-(n - 1), n, dtype=float)
    return _xlogx(k + 1) - 2 * _xlogx(k) + _xlogx(k - 1)


def _prefilter(values: np.ndarray) -> np.ndarray:
    """``f - (1/12) delta^2 f``, cancelling the leading interpolation error of the hat basis."""
    out = np.array(values, dtype=float, copy=True)
    out[1:-1] -= (values[2:] - 2 * values[1:-1] + values[:-2]) / 12.0
    return out


def hilbert_pv(f: LineFunction, targets=None, *, order: int = 4, warn_far: bool = True) -> np.ndarray:
    """``(1/pi) PV int f(t) / (x - t) dt`` for the piecewise-linear interpolant of ``f``.

    With ``targets=None`` the transform is returned at every line node (fast
    Toeplitz path).  ``order=4`` integrates the interpolant of the
    prefiltered samples ``f - delta^2 f / 12``, which removes the
    ``O(dx^2)`` smoothing of the hat basis; ``order=2`` uses the raw samples.
    """
    grid = f.grid
    if order not in (2, 4):
        raise InvalidParameterError("order must be 2 or 4")
    vals = _prefilter(f.values) if order == 4 else f.values
    if targets is None:
        return _toeplitz_apply(vals, _pv_node_kernel(grid.size)) / np.pi
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    if warn_far and np.any(np.abs(targets) > 2 * grid.M):
        import warnings

        warnings.warn("Hilbert targets far outside the line grid: tail truncation dominates", stacklevel=2)
    return hilbert_pv_matrix(grid.nodes[0], grid.dx, grid.size, targets) @ vals


# ---------------------------------------------------------------------------
# spectral route
# ---------------------------------------------------------------------------


def smooth_taper(grid: LineGrid, fraction: float = 0.1) -> np.ndarray:
    """Raised-cosine window equal to one except on the outer ``fraction`` of ``[-M, M]``."""
    x = np.abs(grid.nodes)
    start = (1.0 - fraction) * grid.M
    w = np.ones(grid.size)
    edge = x > start
    w[edge] = 0.5 * (1 + np.cos(np.pi * (x[edge] - start) / (grid.M - start)))
    return w


def _frequencies(n: int, dx: float) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(n, dx)


def _hilbert_image_kernel(line: LineGrid, period: float) -> np.ndarray:
    d = line.dx * np.arange(-(line.size - 1), line.size)
    out = np.zeros_like(d)
    nz = d != 0
    out[nz] = 1.0 / (np.pi * d[nz]) - 1.0 / (period * np.tan(np.pi * d[nz] / period))
    return out


def _dtn_image_kernel(line: LineGrid, period: float) -> np.ndarray:
    d = line.dx * np.arange(-(line.size - 1), line.size)
    out = np.full_like(d, np.pi / (3 * period**2))
    nz = d != 0
    s = np.sin(np.pi * d[nz] / period)
    out[nz] = (np.pi**2 / (period**2 * s * s) - 1.0 / d[nz] ** 2) / np.pi
    return out


def _spectral_apply(values: np.ndarray, line: LineGrid, multiplier, image_kernel, pad: int):
    """Apply a Fourier multiplier on the zero-padded grid, then the image correction."""
    n = line.size
    npad = pad * n
    shape = (npad,) + values.shape[1:]
    buf = np.zeros(shape)
    buf[:n] = values
    xi = _frequencies(npad, line.dx)
    mult = multiplier(xi)
    if values.ndim == 2:
        mult = mult[:, None]
    spec = np.fft.fft(buf, axis=0) * mult
    out = np.fft.ifft(spec, axis=0)[:n]
    imag = float(np.max(np.abs(out.imag))) if out.size else 0.0
    real = out.real
    if image_kernel is not None:
        real = real + line.dx * _toeplitz_apply(values, image_kernel(line, npad * line.dx))
    return real, imag


def _hilbert_multiplier(xi):
    m = -1j * np.sign(xi)
    # Nyquist mode cannot carry an odd multiplier in a real transform
    m[np.argmax(np.abs(xi))] = 0.0
    return m


def hilbert_fft(f: LineFunction, *, pad: int = 2, periodic_correction: bool = True, taper: bool = False,
                return_residue: bool = False):
    """Hilbert transform through the multiplier ``-i sign(xi)`` (``sign(0) = 0``).

    ``taper`` multiplies by :func:`smooth_taper` first when the edge values
    exceed ``1e-12``.  ``return_residue`` also returns the largest imaginary
    part left after the inverse transform.
    """
    if pad < 1:
        raise InvalidParameterError("pad must be >= 1")
    vals = f.values
    if taper and max(abs(vals[0]), abs(vals[-1])) > 1e-12:
        vals = vals * smooth_taper(f.grid)
    kern = _hilbert_image_kernel if periodic_correction else None
    real, imag = _spectral_apply(vals, f.grid, _hilbert_multiplier, kern, pad)
    out = LineFunction(f.grid, real)
    return (out, imag) if return_residue else out


def line_derivative(values: np.ndarray, dx: float) -> np.ndarray:
    """Fourth-order centred first derivative along axis 0 (second order at the two edge nodes)."""
    v = np.asarray(values, dtype=float)
    d = np.empty_like(v)
    d[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * dx)
    d[1] = (v[2] - v[0]) / (2 * dx)
    d[-2] = (v[-1] - v[-3]) / (2 * dx)
    d[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * dx)
    d[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * dx)
    return d


def lambda_H_values(values: np.ndarray, line: LineGrid, route: str = "multiplier", *, pad: int = 2) -> np.ndarray:
    """Array form of :func:`lambda_H`; ``values`` may carry extra trailing columns."""
    if route == "multiplier":
        real, _ = _spectral_apply(values, line, np.abs, _dtn_image_kernel, pad)
        return real
    if route == "hilbert":
        deriv = _prefilter(line_derivative(values, line.dx))
        return _toeplitz_apply(deriv, _pv_node_kernel(line.size)) / np.pi
    raise InvalidParameterError(f"unknown Lambda_H route {route!r}")


def lambda_H(eta: LineFunction, route: str = "multiplier", *, pad: int = 2) -> LineFunction:
    """Half-plane Dirichlet-to-Neumann map.

    ``route='hilbert'`` evaluates ``H(eta')`` with the principal-value
    quadrature; ``route='multiplier'`` multiplies the transform by ``|xi|``.
    With ``H`` having symbol ``-i sign(xi)`` and ``d/dx`` symbol ``i xi`` the
    two coincide, and ``-d/dy`` of the Poisson extension at ``y = 0+`` is the
    same operator.
    """
    return LineFunction(eta.grid, lambda_H_values(eta.values, eta.grid, route, pad=pad))


def fourier_transform(f: LineFunction):
    """``(xi, f_hat)`` with ``f_hat(xi) = int f(x) exp(-i x xi) dx`` in FFT order."""
    grid = f.grid
    xi = _frequencies(grid.size, grid.dx)
    fhat = grid.dx * np.exp(-1j * xi * grid.nodes[0]) * np.fft.fft(f.values)
    return xi, fhat
