"""Operators on the fluid domain outside the half-disk.

The domain is ``Omega = {y > 0, x^2 + y^2 > 1}`` with free surface
``E = {|x| > 1}``.  Inversion ``z -> z / |z|^2`` maps ``Omega`` onto the part
of the upper half-plane inside the unit circle and fixes the circle, so

    D_Omega v (z) = F(z) + F(z / |z|^2),

where ``F`` is the half-plane Poisson integral of ``v`` extended by zero.  The
sum is symmetric under inversion, hence has zero radial derivative on
``r = 1``.  Equivalently ``D_Omega v`` is the half-plane extension of the
reflected data ``eta(v)``, which gives the two routes to the
Dirichlet-to-Neumann map implemented here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .grids import (
    FieldPoints,
    InvalidParameterError,
    LineGrid,
    SurfaceFunction,
    SurfaceGrid,
    _fd4_matrix,
    _hermite_matrix,
    build_line_grid,
    endpoint_values,
    extension_matrix,
    restriction_matrix,
)
from .halfplane import _prefilter, hilbert_pv_matrix, lambda_H_values, pl_poisson_segments

__all__ = [
    "phi1",
    "default_line",
    "dirichlet_extend_omega",
    "lambda_omega_direct",
    "lambda_omega_reflect",
    "DtnOperator",
    "FactorizationError",
    "assemble_dtn",
    "energy_form_matrix",
    "dirichlet_energy",
    "resolvent_solve",
    "resolvent_norm",
    "sqrt_norm",
]


class FactorizationError(RuntimeError):
    """Raised when a DtN matrix is too far from symmetric, or too ill-conditioned, to factorize."""


def default_line(grid: SurfaceGrid, size: int = 2**14) -> LineGrid:
    """Line grid of half-width ``2L`` used when none is given."""
    return build_line_grid(2.0 * grid.L, size, cover=grid.L)


def phi1(points):
    """Cylinder potential ``-y / (x^2 + y^2)``; returns ``(value, gradient)`` with gradient shape ``(k, 2)``."""
    pts = points if isinstance(points, FieldPoints) else FieldPoints(np.atleast_2d(np.asarray(points, dtype=float)))
    x, y = pts.x, pts.y
    r2 = x * x + y * y
    if np.any(r2 == 0):
        raise InvalidParameterError("phi1 is singular at the origin")
    val = -y / r2
    gx = 2 * x * y / r2**2
    gy = (y * y - x * x) / r2**2
    return val, np.stack([gx, gy], axis=-1)


# ---------------------------------------------------------------------------
# explicit Dirichlet operator
# ---------------------------------------------------------------------------


def _segments(v: SurfaceFunction, tol: float = 0.0, *, order: int = 4):
    """Segments of the piecewise-linear interpolant on both half-lines, dropping zero ones.

    ``order=4`` interpolates the prefiltered samples ``f - delta^2 f / 12``
    on each half-line, which cancels the leading smoothing error of the hat
    basis when the result is integrated against a smooth kernel.
    """
    x, f = v.grid.nodes, v.values
    a, b, fa, fb = [], [], [], []
    for sl in (v.grid.left, v.grid.right):
        xs, fs = x[sl], f[sl]
        if order == 4:
            fs = _prefilter(fs)
        a.append(xs[:-1])
        b.append(xs[1:])
        fa.append(fs[:-1])
        fb.append(fs[1:])
    a, b, fa, fb = (np.concatenate(t) for t in (a, b, fa, fb))
    keep = (np.abs(fa) > tol) | (np.abs(fb) > tol)
    return a[keep], b[keep], fa[keep], fb[keep]


def _poisson_pl(segs, x, y, *, gradient: bool, chunk: int = 1 << 21):
    a, b, fa, fb = segs
    val = np.zeros(x.size)
    gx = np.zeros(x.size)
    gy = np.zeros(x.size)
    if a.size == 0:
        return (val, gx, gy) if gradient else val
    step = max(1, chunk // a.size)
    for s in range(0, x.size, step):
        sl = slice(s, s + step)
        out = pl_poisson_segments(a, b, fa, fb, x[sl, None], y[sl, None], gradient=gradient)
        if gradient:
            val[sl] = out[0].sum(axis=1)
            gx[sl] = out[1].sum(axis=1)
            gy[sl] = out[2].sum(axis=1)
        else:
            val[sl] = out.sum(axis=1)
    return (val, gx, gy) if gradient else val


def _omega_points(points) -> FieldPoints:
    pts = points if isinstance(points, FieldPoints) else FieldPoints(np.atleast_2d(np.asarray(points, dtype=float)))
    r2 = pts.x**2 + pts.y**2
    if np.any(r2 < 1.0 - 1e-12):
        raise InvalidParameterError("field points must lie outside the unit disk")
    return pts


def dirichlet_extend_omega(v: SurfaceFunction, points, *, gradient: bool = False, order: int = 4):
    """Evaluate ``D_Omega v`` at points of the closed fluid domain.

    The surface data are integrated exactly as a piecewise-linear function
    against both Poisson kernels.  Points on ``y = 0`` return ``v`` itself,
    interpolated (exact at grid nodes).  ``order`` selects the plain
    (2) or prefiltered (4) interpolant.  With ``gradient`` returns
    ``(value, grad)`` where ``grad`` has shape ``(k, 2)``; the gradient is
    analytic and only defined for ``y > 0``.
    """
    pts = _omega_points(points)
    x, y = pts.x, pts.y
    value = np.zeros(x.size)
    grad = np.zeros((x.size, 2))
    on_axis = y == 0
    if np.any(on_axis):
        value[on_axis] = _surface_interp(v, x[on_axis])
        if gradient:
            grad[on_axis] = np.nan
    idx = np.flatnonzero(~on_axis)
    if order not in (2, 4):
        raise InvalidParameterError("order must be 2 or 4")
    scale = float(np.max(np.abs(v.values))) if v.values.size else 0.0
    segs = _segments(v, 1e-15 * scale, order=order)
    xi, yi = x[idx], y[idx]
    r2 = xi * xi + yi * yi
    xs, ys = xi / r2, yi / r2
    if not gradient:
        value[idx] = _poisson_pl(segs, xi, yi, gradient=False) + _poisson_pl(segs, xs, ys, gradient=False)
        return value
    v1, gx1, gy1 = _poisson_pl(segs, xi, yi, gradient=True)
    v2, gx2, gy2 = _poisson_pl(segs, xs, ys, gradient=True)
    # Jacobian of the inversion is symmetric: [[y2-x2, -2xy], [-2xy, x2-y2]] / r^4
    r4 = r2 * r2
    jxx = (yi * yi - xi * xi) / r4
    jxy = -2 * xi * yi / r4
    value[idx] = v1 + v2
    grad[idx, 0] = gx1 + jxx * gx2 + jxy * gy2
    grad[idx, 1] = gy1 + jxy * gx2 - jxx * gy2
    return value, grad


def _surface_interp(v: SurfaceFunction, targets) -> np.ndarray:
    g = v.grid
    targets = np.asarray(targets, dtype=float)
    right = _hermite_matrix(1.0, g.h, g.n, targets) @ v.values[g.right]
    left = _hermite_matrix(1.0, g.h, g.n, -targets) @ v.values[g.left][::-1]
    out = right + left
    # nodes return their sample bit for bit
    pos = np.clip(np.searchsorted(g.nodes, targets), 0, g.size - 1)
    hit = g.nodes[pos] == targets
    out[hit] = v.values[pos[hit]]
    return out


# ---------------------------------------------------------------------------
# Dirichlet-to-Neumann map, direct route
# ---------------------------------------------------------------------------


def _run_hilbert(grid: SurfaceGrid, targets: np.ndarray) -> np.ndarray:
    """Hilbert transform of the zero-extended piecewise-linear data on both half-lines.

    Returns a dense ``(len(targets), 2n)`` matrix acting on surface values.
    """
    left = hilbert_pv_matrix(-grid.L, grid.h, grid.n, targets)
    right = hilbert_pv_matrix(1.0, grid.h, grid.n, targets)
    return np.hstack([left, right])


def _prefilter_matrix(grid: SurfaceGrid) -> sp.csr_matrix:
    eye = np.eye(grid.n)
    block = sp.csr_matrix(_prefilter(eye))
    return sp.block_diag([block, block]).tocsr()


@dataclass(frozen=True)
class _DirectParts:
    h1: np.ndarray
    h2: np.ndarray
    endpoint: sp.csr_matrix


_DIRECT_CACHE: dict = {}


def _direct_parts(grid: SurfaceGrid) -> _DirectParts:
    """Dense matrices ``v -> H g(x)`` and ``v -> x^-2 H g(1/x)`` at the surface nodes."""
    key = (grid.L, grid.n)
    if key in _DIRECT_CACHE:
        return _DIRECT_CACHE[key]
    x = grid.nodes
    d4 = sp.block_diag([_fd4_matrix(grid.n, grid.h)] * 2).tocsr()
    filt = _prefilter_matrix(grid) @ d4
    h1 = np.asarray((filt.T @ _run_hilbert(grid, x).T).T)
    h2 = np.asarray((filt.T @ _run_hilbert(grid, 1.0 / x).T).T) / (x * x)[:, None]
    # endpoint term picks v(1) - v(-1)
    e = np.zeros(grid.size)
    e[grid.n], e[grid.n - 1] = 1.0, -1.0
    endpoint = sp.csr_matrix(np.outer(1.0 / (np.pi * x), e))
    parts = _DirectParts(h1, h2, endpoint)
    if len(_DIRECT_CACHE) > 4:
        _DIRECT_CACHE.clear()
    _DIRECT_CACHE[key] = parts
    return parts


def lambda_omega_direct(v: SurfaceFunction, *, endpoint_sign: float = 1.0, diagnostics: bool = False):
    """Dirichlet-to-Neumann map from the surface-only formula.

    ``Lambda v(x) = H g(x) + x^-2 H g(1/x) + (v(1) - v(-1)) / (pi x)`` with
    ``g`` the derivative of ``v`` extended by zero off the surface.  The
    Hilbert transform of ``g`` integrates the piecewise-linear interpolant of
    fourth-order differences exactly.  ``endpoint_sign`` scales the last
    term (``-1`` is the mutation used by the verification suite).  With
    ``diagnostics`` also returns a dict with the terms ``h1``, ``h2`` and
    ``endpoint`` separately.
    """
    grid = v.grid
    if grid.nodes[grid.n] != 1.0 or grid.nodes[grid.n - 1] != -1.0:
        raise InvalidParameterError("surface grid must contain the endpoints +-1")
    parts = _direct_parts(grid)
    h1 = parts.h1 @ v.values
    h2 = parts.h2 @ v.values
    vp, vm = endpoint_values(v)
    ep = endpoint_sign * (vp - vm) / (np.pi * grid.nodes)
    out = SurfaceFunction(grid, h1 + h2 + ep)
    if diagnostics:
        return out, {"h1": h1, "h2": h2, "endpoint": ep}
    return out


def _direct_matrix(grid: SurfaceGrid, endpoint_sign: float = 1.0) -> np.ndarray:
    parts = _direct_parts(grid)
    return parts.h1 + parts.h2 + endpoint_sign * parts.endpoint.toarray()


# ---------------------------------------------------------------------------
# Dirichlet-to-Neumann map, reflection route
# ---------------------------------------------------------------------------


def lambda_omega_reflect(v: SurfaceFunction, line: LineGrid | None = None, *, pad: int = 2) -> SurfaceFunction:
    """Dirichlet-to-Neumann map as the half-plane map of the reflected data, read back on the surface."""
    line = line or default_line(v.grid)
    if line.M < v.grid.L:
        raise InvalidParameterError("line grid must cover the surface grid")
    eta = extension_matrix(v.grid, line) @ v.values
    lam = lambda_H_values(eta, line, "multiplier", pad=pad)
    return SurfaceFunction(v.grid, restriction_matrix(v.grid, line) @ lam)


# ---------------------------------------------------------------------------
# Dirichlet-to-Neumann map, variational route
# ---------------------------------------------------------------------------


def _log_moment(m) -> np.ndarray:
    """``int_0^1 int_0^1 log|m + s - t| ds dt`` for real offsets ``m``."""
    m = np.abs(np.asarray(m, dtype=float))
    out = np.empty_like(m)
    small = m < 3.0

    def phi(d):
        d2 = d * d
        return 0.5 * d2 * _safe_log(d) - 0.75 * d2

    ms = m[small]
    out[small] = phi(ms + 1) - 2 * phi(ms) + phi(ms - 1)
    mb = m[~small]
    acc = np.log(mb)
    inv2 = 1.0 / (mb * mb)
    term = np.ones_like(mb)
    for j in range(1, 18):
        term = term * inv2
        acc -= term / (j * (2 * j + 1) * (2 * j + 2))
    out[~small] = acc
    return out


def _safe_log(d):
    d = np.abs(d)
    return np.log(np.where(d > 0, d, 1.0))


def _energy_kernel_blocks(n: int, h: float, order: int = 6):
    """Segment-pair integrals of ``-(1/pi) log|(s - t) / (1 - s t)|``.

    Segment ``i`` of a half-line is ``1 + [i, i+1] h`` (mirrored on the left).
    Returns the same-side block and the opposite-side block.  With
    ``s = 1 + a``, ``t = 1 + b`` the same-side kernel is
    ``log|a - b| - log(a + b) - log(1 + a b / (a + b))``, and the
    opposite-side kernel is ``-log(1 + a b / (2 + a + b))``; the first two
    terms are integrated in closed form, the smooth remainders by
    Gauss-Legendre.
    """
    i = np.arange(n)
    diff = _log_moment(i[:, None] - i[None, :])
    summ = _log_moment(i[:, None] + i[None, :] + 1.0)
    t, w = np.polynomial.legendre.leggauss(order)
    t, w = 0.5 * (t + 1), 0.5 * w
    a = (i[:, None] + t[None, :]) * h  # (n, q)
    rem_same = np.zeros((n, n))
    rem_cross = np.zeros((n, n))
    for p in range(order):
        ap = a[:, p][:, None, None]
        prod = ap * a[None, :, :]
        weight = w[p] * w[None, None, :]
        rem_same += np.sum(weight * np.log1p(prod / (ap + a[None, :, :])), axis=2)
        rem_cross += np.sum(weight * np.log1p(prod / (2.0 + ap + a[None, :, :])), axis=2)
    h2 = h * h
    same = -h2 / np.pi * (diff - summ - rem_same)
    cross = h2 / np.pi * rem_cross
    return same, cross


def _slope_matrix(grid: SurfaceGrid) -> sp.csr_matrix:
    """Nodal values to slopes on every segment, ordered like the kernel blocks.

    Each half-line has ``n - 1`` segments plus one closing segment beyond
    ``|x| = L`` on which the interpolant returns to zero, so every nodal
    vector is a continuous piecewise-linear function on the surface.
    """
    n, h = grid.n, grid.h
    rows, cols, vals = [], [], []
    # right half-line: node n + k sits at 1 + k h; segment k joins nodes k and k + 1
    for k in range(n):
        rows += [n + k, n + k]
        cols += [n + k, n + k + 1 if k < n - 1 else -1]
        vals += [-1.0, 1.0]
    # left half-line: node n - 1 - k sits at -1 - k h; segment k joins it to the next node outward
    for k in range(n):
        rows += [k, k]
        cols += [n - 1 - k, n - 2 - k if k < n - 1 else -1]
        vals += [1.0, -1.0]
    rows, cols, vals = np.array(rows), np.array(cols), np.array(vals)
    keep = cols >= 0
    return sp.csr_matrix((vals[keep] / h, (rows[keep], cols[keep])), shape=(2 * n, 2 * n))


def energy_form_matrix(grid: SurfaceGrid) -> np.ndarray:
    """Symmetric matrix ``G`` with ``v^T G u = <Lambda v, u>`` for piecewise-linear ``v, u``.

    Built from ``<Lambda v, u> = -(1/pi) iint v'(s) u'(t) log|(s - t)/(1 - s t)| ds dt``
    over ``E x E``, the pairing of tangential derivatives through the
    Neumann Green function of the domain.
    """
    n = grid.n
    same, cross = _energy_kernel_blocks(n, grid.h)
    # segment order: left segments in mirrored index k (0 at x = -1), then right segments k
    kern = np.block([[same, cross], [cross.T, same]])
    d = _slope_matrix(grid)
    g = (d.T @ (d.T @ kern).T).T
    return 0.5 * (g + g.T)


# ---------------------------------------------------------------------------
# assembled operator
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DtnOperator:
    """Dense matrix of the Dirichlet-to-Neumann map on a surface grid.

    ``symmetrized`` is the part of ``matrix`` that is self-adjoint in the
    trapezoid inner product ``<a, b> = sum w a b``; the discarded skew part is
    reported as ``asymmetry_defect`` (spectral norm, in the same inner
    product) and ``relative_defect`` (divided by the norm of ``matrix``).
    ``eigvals``/``eigvecs`` diagonalize ``W^1/2 symmetrized W^-1/2``.
    """

    grid: SurfaceGrid
    matrix: np.ndarray
    route: str
    symmetrized: np.ndarray
    asymmetry_defect: float
    relative_defect: float
    g: float = 9.81
    eigvals: np.ndarray | None = None
    eigvecs: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def factorized(self) -> bool:
        return self.eigvals is not None

    @property
    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue of ``I + g * symmetrized``."""
        self._need_factor()
        return float(1.0 + self.g * self.eigvals.min())

    def _need_factor(self):
        if not self.factorized:
            raise FactorizationError("operator was not factorized: " + self.info.get("refusal", "factorize=False"))

    def apply(self, v: SurfaceFunction, *, symmetric: bool = False) -> SurfaceFunction:
        mat = self.symmetrized if symmetric else self.matrix
        return SurfaceFunction(self.grid, mat @ v.values)

    def diagnostics(self) -> dict:
        out = {
            "route": self.route,
            "L": self.grid.L,
            "n": self.grid.n,
            "g": self.g,
            "asymmetry_defect": self.asymmetry_defect,
            "relative_defect": self.relative_defect,
        }
        if self.factorized:
            out["min_eigenvalue"] = self.min_eigenvalue
            out["min_lambda_eigenvalue"] = float(self.eigvals.min())
        out.update(self.info)
        return out

    def dump(self, path, *, fmt: str = "npy") -> Path:
        """Write the matrix (``.npy`` or ``.csv``) and a JSON header next to it."""
        path = Path(path)
        if fmt == "npy":
            target = path.with_suffix(".npy")
            np.save(target, self.matrix)
        elif fmt == "csv":
            target = path.with_suffix(".csv")
            np.savetxt(target, self.matrix, delimiter=",", fmt="%.17g")
        else:
            raise InvalidParameterError(f"unknown dump format {fmt!r}")
        header = dict(self.diagnostics(), shape=list(self.matrix.shape), file=target.name)
        path.with_suffix(".json").write_text(json.dumps(header, indent=2))
        return target


def _reflect_matrix(grid: SurfaceGrid, line: LineGrid, pad: int, block: int = 256) -> np.ndarray:
    ext = extension_matrix(grid, line)
    res = restriction_matrix(grid, line)
    out = np.empty((grid.size, grid.size))
    for s in range(0, grid.size, block):
        cols = ext[:, s : s + block].toarray()
        out[:, s : s + block] = res @ lambda_H_values(cols, line, "multiplier", pad=pad)
    return out


def _spectral_norm(a: np.ndarray, iters: int = 60, seed: int = 0) -> float:
    """Power-iteration estimate of the largest singular value."""
    if not np.any(a):
        return 0.0
    x = np.random.default_rng(seed).standard_normal(a.shape[1])
    est = 0.0
    for _ in range(iters):
        y = a.T @ (a @ x)
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0
        est = np.sqrt(nrm / np.linalg.norm(x))
        x = y / nrm
    return float(est)


def _weighted_split(matrix: np.ndarray, w: np.ndarray):
    sw = np.sqrt(w)
    s = sw[:, None] * matrix / sw[None, :]
    sym = 0.5 * (s + s.T)
    skew = 0.5 * (s - s.T)
    return s, sym, skew


def assemble_dtn(grid: SurfaceGrid, route: str = "variational", *, g: float = 9.81, line: LineGrid | None = None,
                 factorize: bool = True, max_defect: float = 1e-3,
                 pad: int = 2, endpoint_sign: float = 1.0) -> DtnOperator:
    """Assemble the Dirichlet-to-Neumann matrix column by column.

    ``route='variational'`` builds the energy form of the piecewise-linear
    basis and returns ``W^-1 G``, which is self-adjoint and non-negative in
    the trapezoid inner product by construction.  ``route='reflect'`` applies
    the half-plane multiplier to the reflected extension of every nodal unit
    vector and samples the result at the nodes; ``route='direct'`` uses the
    surface-only formula.  These two collocation matrices carry an
    asymmetry that shrinks only with the mesh.  Factorization of
    ``I + g * symmetrized`` is refused when the relative skew part exceeds
    ``max_defect``.
    """
    if g < 0:
        raise InvalidParameterError("g must be non-negative")
    if route == "reflect":
        line = line or default_line(grid)
        matrix = _reflect_matrix(grid, line, pad)
        info = {"line_M": line.M, "line_size": line.size}
    elif route == "variational":
        matrix = energy_form_matrix(grid) / grid.weights[:, None]
        info = {}
    elif route == "direct":
        matrix = _direct_matrix(grid, endpoint_sign)
        info = {}
    else:
        raise InvalidParameterError(f"unknown route {route!r}")
    w = grid.weights
    s, sym, skew = _weighted_split(matrix, w)
    norm_s = _spectral_norm(s)
    defect = _spectral_norm(skew)
    rel = defect / norm_s if norm_s > 0 else 0.0
    sw = np.sqrt(w)
    symmetrized = sym / sw[:, None] * sw[None, :]
    eigvals = eigvecs = None
    if factorize:
        if rel > max_defect:
            info["refusal"] = f"relative asymmetry {rel:.3e} exceeds {max_defect:.1e}"
        else:
            eigvals, eigvecs = sla.eigh(sym)
    return DtnOperator(grid, matrix, route, symmetrized, defect, rel, g, eigvals, eigvecs, info)


# ---------------------------------------------------------------------------
# solves and norms through the factorization
# ---------------------------------------------------------------------------


def _check_grid(v: SurfaceFunction, op: DtnOperator):
    if v.grid != op.grid:
        raise InvalidParameterError("function and operator live on different grids")


def resolvent_solve(f: SurfaceFunction, g: float, op: DtnOperator, *, rtol: float = 1e-10) -> SurfaceFunction:
    """Solve ``(I + g Lambda) v = f`` with the symmetrized operator."""
    _check_grid(f, op)
    op._need_factor()
    if g < 0:
        raise InvalidParameterError("g must be non-negative")
    diag = 1.0 + g * op.eigvals
    cond = diag.max() / diag.min() if diag.min() > 0 else np.inf
    if not np.isfinite(cond) or cond > 1e14:
        raise FactorizationError(f"I + g Lambda is singular or ill-conditioned (condition estimate {cond:.3e})")
    sw = np.sqrt(op.grid.weights)
    q = op.eigvecs
    v = (q @ ((q.T @ (sw * f.values)) / diag)) / sw
    resid = v + g * (op.symmetrized @ v) - f.values
    scale = np.linalg.norm(f.values)
    if scale > 0 and np.linalg.norm(resid) / scale > rtol:
        raise FactorizationError(f"resolvent residual {np.linalg.norm(resid) / scale:.3e} above {rtol:.1e}")
    return SurfaceFunction(op.grid, v)


def sqrt_norm(v: SurfaceFunction, g: float, op: DtnOperator) -> float:
    """``||(I + g Lambda)^1/2 v||`` in the trapezoid ``L2`` norm."""
    _check_grid(v, op)
    op._need_factor()
    coeff = op.eigvecs.T @ (np.sqrt(op.grid.weights) * v.values)
    return float(np.sqrt(np.sum((1.0 + g * op.eigvals) * coeff**2)))


def resolvent_norm(op: DtnOperator, g: float = 1.0, *, iters: int = 200, seed: int = 0) -> float:
    """Power-iteration estimate of the ``L2`` operator norm of ``(I + g Lambda)^-1``."""
    rng = np.random.default_rng(seed)
    w = op.grid.weights
    v = rng.standard_normal(op.grid.size)
    est = 0.0
    for _ in range(iters):
        v = v / np.sqrt(np.dot(w, v * v))
        tv = resolvent_solve(SurfaceFunction(op.grid, v), g, op).values
        est = float(np.sqrt(np.dot(w, tv * tv)))
        v = tv
    return est


# ---------------------------------------------------------------------------
# energy form by quadrature in the fluid
# ---------------------------------------------------------------------------


def _composite_gauss(edges: np.ndarray, order: int):
    t, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * t[None, :]
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def dirichlet_energy(v: SurfaceFunction, u: SurfaceFunction, R: float, *, n_r: int = 24, n_theta: int = 24,
                     order: int = 6) -> float:
    """``int grad(D v) . grad(D u)`` over ``Omega`` cut at radius ``R``.

    Composite Gauss-Legendre in ``r`` on geometrically stretched panels over
    ``[1, R]`` and on ``n_theta`` uniform panels in ``theta``; the gradients
    are exact for the piecewise-linear surface data.
    """
    if R <= 1:
        raise InvalidParameterError("R must exceed 1")
    if u.grid != v.grid:
        raise InvalidParameterError("v and u must share a grid")
    r, wr = _composite_gauss(np.geomspace(1.0, R, n_r + 1), order)
    th, wt = _composite_gauss(np.linspace(-np.pi / 2, np.pi / 2, n_theta + 1), order)
    rr, tt = np.meshgrid(r, th, indexing="ij")
    weight = (wr[:, None] * wt[None, :] * rr).ravel()
    pts = FieldPoints.polar(rr.ravel(), tt.ravel())
    _, gv = dirichlet_extend_omega(v, pts, gradient=True)
    gu = gv if u is v else dirichlet_extend_omega(u, pts, gradient=True)[1]
    return float(np.sum(weight * np.sum(gv * gu, axis=1)))
