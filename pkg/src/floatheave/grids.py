"""Discrete functions on the free surface, on the extended line and in the fluid.

The free surface is the pair of half-lines ``[-L, -1]`` and ``[1, L]``; values
beyond ``+-L`` are taken to be zero.  The extended line is a uniform grid on
``[-M, M)`` sized for FFTs.  Linear maps between the two (reflection
extension, restriction, zero extension of the derivative) are assembled as
sparse matrices so that operator assembly can reuse them column by column.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "InvalidParameterError",
    "SurfaceGrid",
    "SurfaceFunction",
    "LineGrid",
    "LineFunction",
    "FieldPoints",
    "build_surface_grid",
    "build_line_grid",
    "reflect_extend",
    "restrict_to_surface",
    "zero_extend_derivative",
    "surface_derivative",
    "endpoint_values",
    "norm",
    "gregory_weights",
    "gagliardo_half_norm",
]


class InvalidParameterError(ValueError):
    """Raised when a grid, point set or operator parameter is out of range."""


# ---------------------------------------------------------------------------
# grids and sampled functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SurfaceGrid:
    """Uniform sampling of ``[-L, -1] U [1, L]`` with ``n`` points per half-line."""

    L: float
    n: int

    def __post_init__(self):
        if not np.isfinite(self.L) or self.L <= 1.0:
            raise InvalidParameterError(f"L must exceed 1 (got {self.L})")
        if int(self.n) != self.n or self.n < 8:
            raise InvalidParameterError(f"n must be an integer >= 8 (got {self.n})")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "n", int(self.n))

    @functools.cached_property
    def positive(self) -> np.ndarray:
        return np.linspace(1.0, self.L, self.n)

    @functools.cached_property
    def nodes(self) -> np.ndarray:
        pos = self.positive
        nodes = np.concatenate([-pos[::-1], pos])
        nodes.flags.writeable = False
        return nodes

    @property
    def h(self) -> float:
        return (self.L - 1.0) / (self.n - 1)

    @property
    def size(self) -> int:
        return 2 * self.n

    @functools.cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights, one half-line at a time."""
        w = np.full(self.n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        out = np.concatenate([w[::-1], w])
        out.flags.writeable = False
        return out

    @property
    def mirror(self) -> np.ndarray:
        """Index permutation realising ``x -> -x``."""
        return np.arange(self.size)[::-1]

    @property
    def left(self) -> slice:
        return slice(0, self.n)

    @property
    def right(self) -> slice:
        return slice(self.n, 2 * self.n)

    def sample(self, func) -> "SurfaceFunction":
        return SurfaceFunction(self, func(self.nodes))

    def zeros(self) -> "SurfaceFunction":
        return SurfaceFunction(self, np.zeros(self.size))

    def inner(self, a, b) -> float:
        """Trapezoid L2(E) inner product of two nodal vectors."""
        return float(np.dot(self.weights * _values(a), _values(b)))


@dataclass(frozen=True)
class LineGrid:
    """Periodic-friendly uniform grid ``x_k = -M + k dx``, ``k < size``, ``dx = 2M/size``."""

    M: float
    size: int

    def __post_init__(self):
        if not np.isfinite(self.M) or self.M <= 0:
            raise InvalidParameterError(f"M must be positive (got {self.M})")
        size = int(self.size)
        if size != self.size or size < 16 or size & (size - 1):
            raise InvalidParameterError(f"line node count must be a power of two >= 16 (got {self.size})")
        object.__setattr__(self, "M", float(self.M))
        object.__setattr__(self, "size", size)

    @property
    def dx(self) -> float:
        return 2.0 * self.M / self.size

    @functools.cached_property
    def nodes(self) -> np.ndarray:
        x = -self.M + self.dx * np.arange(self.size)
        x.flags.writeable = False
        return x

    @property
    def origin_index(self) -> int:
        return self.size // 2

    def sample(self, func) -> "LineFunction":
        return LineFunction(self, func(self.nodes))

    def window(self, half_width: float) -> np.ndarray:
        """Boolean mask of nodes with ``|x| <= half_width``."""
        return np.abs(self.nodes) <= half_width


def build_surface_grid(L: float, n: int) -> SurfaceGrid:
    return SurfaceGrid(L, n)


def build_line_grid(M: float, size: int, *, cover: float | None = None) -> LineGrid:
    grid = LineGrid(M, size)
    if cover is not None and grid.M < cover:
        raise InvalidParameterError(f"line grid half-width M={grid.M} must cover L={cover}")
    return grid


def _values(f) -> np.ndarray:
    return np.asarray(getattr(f, "values", f), dtype=float)


@dataclass(frozen=True, eq=False)
class SurfaceFunction:
    grid: SurfaceGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.size,):
            raise InvalidParameterError(
                f"surface function needs {self.grid.size} values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise InvalidParameterError("surface function values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __add__(self, other):
        return SurfaceFunction(self.grid, self.values + _values(other))

    def __sub__(self, other):
        return SurfaceFunction(self.grid, self.values - _values(other))

    def __mul__(self, c):
        return SurfaceFunction(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return SurfaceFunction(self.grid, -self.values)

    def even_part(self) -> np.ndarray:
        return 0.5 * (self.values + self.values[self.grid.mirror])

    def odd_part(self) -> np.ndarray:
        return 0.5 * (self.values - self.values[self.grid.mirror])


@dataclass(frozen=True, eq=False)
class LineFunction:
    grid: LineGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.size,):
            raise InvalidParameterError(
                f"line function needs {self.grid.size} values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise InvalidParameterError("line function values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __add__(self, other):
        return LineFunction(self.grid, self.values + _values(other))

    def __sub__(self, other):
        return LineFunction(self.grid, self.values - _values(other))

    def __mul__(self, c):
        return LineFunction(self.grid, self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class FieldPoints:
    """Points of the closed upper half-plane, ``y >= 0``.

    Polar coordinates follow the water-wave convention ``x = r sin(theta)``,
    ``y = r cos(theta)`` with ``theta`` in ``[-pi/2, pi/2]``.
    """

    x: np.ndarray
    y: np.ndarray = field(default=None)

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if self.y is None:
            pts = x.reshape(-1, 2)
            x, y = pts[:, 0].copy(), pts[:, 1].copy()
        else:
            y = np.atleast_1d(np.asarray(self.y, dtype=float))
            x, y = np.broadcast_arrays(x, y)
            x, y = x.ravel().copy(), y.ravel().copy()
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidParameterError("field points must be finite")
        if np.any(y < 0):
            raise InvalidParameterError("field points must satisfy y >= 0")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def polar(cls, r, theta) -> "FieldPoints":
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if np.any(r < 0) or np.any(np.abs(theta) > np.pi / 2 + 1e-14):
            raise InvalidParameterError("polar points need r >= 0 and |theta| <= pi/2")
        theta = np.clip(theta, -np.pi / 2, np.pi / 2)
        return cls(r * np.sin(theta), np.abs(r * np.cos(theta)))

    def __len__(self):
        return self.x.size

    @property
    def r(self) -> np.ndarray:
        return np.hypot(self.x, self.y)

    @property
    def theta(self) -> np.ndarray:
        return np.arctan2(self.x, self.y)


# ---------------------------------------------------------------------------
# finite differences and cubic Hermite interpolation on uniform half-lines
# ---------------------------------------------------------------------------


def _fd2_matrix(n: int, h: float) -> sp.csr_matrix:
    """Second-order derivative stencil: centred inside, one-sided at both ends."""
    rows, cols, vals = [], [], []
    for i in range(1, n - 1):
        rows += [i, i]
        cols += [i - 1, i + 1]
        vals += [-0.5, 0.5]
    rows += [0, 0, 0, n - 1, n - 1, n - 1]
    cols += [0, 1, 2, n - 1, n - 2, n - 3]
    vals += [-1.5, 2.0, -0.5, 1.5, -2.0, 0.5]
    return sp.csr_matrix((np.array(vals) / h, (rows, cols)), shape=(n, n))


# one-sided fourth-order first-derivative weights at offsets 0..4 and -1..3
_FD4_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_FD4_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0
_FD4_CENTRE = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def _fd4_matrix(n: int, h: float) -> sp.csr_matrix:
    rows, cols, vals = [], [], []

    def put(i, start, w):
        rows.extend([i] * len(w))
        cols.extend(range(start, start + len(w)))
        vals.extend(w)

    put(0, 0, _FD4_EDGE0)
    put(1, 0, _FD4_EDGE1)
    for i in range(2, n - 2):
        put(i, i - 2, _FD4_CENTRE)
    put(n - 2, n - 5, -_FD4_EDGE1[::-1])
    put(n - 1, n - 5, -_FD4_EDGE0[::-1])
    return sp.csr_matrix((np.array(vals) / h, (rows, cols)), shape=(n, n))


def _hermite_matrix(x0: float, h: float, n: int, targets: np.ndarray) -> sp.csr_matrix:
    """Cubic Hermite interpolation from ``n`` uniform nodes to ``targets``.

    Nodal slopes come from fourth-order differences.  Targets outside the node
    range get an empty row (the function is zero there).
    """
    targets = np.asarray(targets, dtype=float)
    s = (targets - x0) / h
    inside = (s >= -1e-12) & (s <= n - 1 + 1e-12)
    idx = np.flatnonzero(inside)
    s = np.clip(s[inside], 0.0, n - 1)
    cell = np.minimum(np.floor(s).astype(int), n - 2)
    t = s - cell
    t2, t3 = t * t, t * t * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    m = targets.size
    val = sp.csr_matrix(
        (np.concatenate([h00, h01]), (np.concatenate([idx, idx]), np.concatenate([cell, cell + 1]))),
        shape=(m, n),
    )
    der = sp.csr_matrix(
        (np.concatenate([h10, h11]) * h, (np.concatenate([idx, idx]), np.concatenate([cell, cell + 1]))),
        shape=(m, n),
    )
    return (val + der @ _fd4_matrix(n, h)).tocsr()


def _half_line_blocks(grid: SurfaceGrid, targets: np.ndarray, *, reflect: bool = False) -> sp.csr_matrix:
    """Interpolate surface data at ``targets`` (or at ``1/targets`` when ``reflect``)."""
    targets = np.asarray(targets, dtype=float)
    pts = np.zeros_like(targets)
    if reflect:
        nz = targets != 0
        pts[nz] = 1.0 / targets[nz]
        pts[~nz] = np.inf
    else:
        pts = targets.copy()
    n, h = grid.n, grid.h
    # left half-line is stored in decreasing |x|; interpolate in -x then flip columns
    right = _hermite_matrix(1.0, h, n, pts)
    left = _hermite_matrix(1.0, h, n, -pts)[:, ::-1]
    return sp.hstack([left, right]).tocsr()


@functools.lru_cache(maxsize=16)
def extension_matrix(grid: SurfaceGrid, line: LineGrid) -> sp.csr_matrix:
    """Sparse matrix of ``v -> eta(v)`` sampled on the line grid."""
    x = line.nodes
    outer = np.abs(x) >= 1.0
    mat_out = _half_line_blocks(grid, np.where(outer, x, np.inf))
    mat_in = _half_line_blocks(grid, np.where(outer, np.inf, x), reflect=True)
    # x = 0 maps to 1/x = inf, which is outside every half-line: eta(0) = 0
    return (mat_out + mat_in).tocsr()


@functools.lru_cache(maxsize=16)
def restriction_matrix(grid: SurfaceGrid, line: LineGrid) -> sp.csr_matrix:
    """Sparse cubic Hermite interpolation from the line grid onto surface nodes."""
    return _hermite_matrix(line.nodes[0], line.dx, line.size, grid.nodes)


@functools.lru_cache(maxsize=16)
def derivative_matrix(grid: SurfaceGrid) -> sp.csr_matrix:
    """Second-order derivative on each half-line (no coupling across the gap)."""
    d = _fd2_matrix(grid.n, grid.h)
    # left half-line runs from -L to -1 with increasing x, same spacing
    return sp.block_diag([d, d]).tocsr()


def _check_covers(grid: SurfaceGrid, line: LineGrid):
    if line.M < grid.L:
        raise InvalidParameterError(f"line grid (M={line.M}) must cover the surface grid (L={grid.L})")


def reflect_extend(v: SurfaceFunction, line: LineGrid) -> LineFunction:
    """Extension across the cylinder footprint, ``eta(x) = v(1/x)`` for ``0 < |x| < 1``."""
    _check_covers(v.grid, line)
    return LineFunction(line, extension_matrix(v.grid, line) @ v.values)


def restrict_to_surface(f: LineFunction, grid: SurfaceGrid) -> SurfaceFunction:
    _check_covers(grid, f.grid)
    return SurfaceFunction(grid, restriction_matrix(grid, f.grid) @ f.values)


def surface_derivative(v: SurfaceFunction) -> SurfaceFunction:
    return SurfaceFunction(v.grid, derivative_matrix(v.grid) @ v.values)


def zero_extend_derivative(v: SurfaceFunction, line: LineGrid) -> LineFunction:
    """``v'`` on the surface, extended by zero on ``(-1, 1)`` and beyond ``+-L``."""
    if v.grid.n < 2:
        raise InvalidParameterError("need at least two nodes per half-line")
    _check_covers(v.grid, line)
    dv = derivative_matrix(v.grid) @ v.values
    x = line.nodes
    out = np.zeros(line.size)
    pos = (x >= 1.0) & (x <= v.grid.L)
    neg = (x <= -1.0) & (x >= -v.grid.L)
    nodes = v.grid.nodes
    out[pos] = np.interp(x[pos], nodes[v.grid.right], dv[v.grid.right])
    out[neg] = np.interp(x[neg], nodes[v.grid.left], dv[v.grid.left])
    return LineFunction(line, out)


def endpoint_values(v: SurfaceFunction) -> tuple[float, float]:
    """``(v(1), v(-1))`` read at the endpoint nodes."""
    g = v.grid
    return float(v.values[g.n]), float(v.values[g.n - 1])


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


_GREGORY = np.array([3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0])


def gregory_weights(grid: "SurfaceGrid") -> np.ndarray:
    """Fourth-order end-corrected trapezoid weights on each half-line."""
    w = np.full(grid.size, grid.h)
    k = len(_GREGORY)
    for sl in (grid.left, grid.right):
        idx = np.arange(grid.size)[sl]
        w[idx[:k]] = grid.h * _GREGORY
        w[idx[-k:]] = grid.h * _GREGORY[::-1]
    return w


def norm(f, kind: str = "L2", *, rule: str = "trapezoid") -> float:
    """``L2`` norm or ``W12`` norm (value plus derivative) of a sampled function.

    Surface functions may use ``rule='gregory'`` for fourth-order end
    corrections; line functions always use the trapezoid rule.
    """
    kind = kind.upper()
    if kind not in ("L2", "W12"):
        raise InvalidParameterError(f"unknown norm kind {kind!r}")
    if rule not in ("trapezoid", "gregory"):
        raise InvalidParameterError(f"unknown quadrature rule {rule!r}")
    if isinstance(f, SurfaceFunction):
        w = f.grid.weights if rule == "trapezoid" else gregory_weights(f.grid)
        sq = float(np.dot(w, f.values**2))
        if kind == "W12":
            d = derivative_matrix(f.grid) @ f.values
            sq += float(np.dot(w, d**2))
    elif isinstance(f, LineFunction):
        dx = f.grid.dx
        sq = dx * float(np.dot(f.values, f.values))
        if kind == "W12":
            d = np.gradient(f.values, dx)
            sq += dx * float(np.dot(d, d))
    else:
        raise InvalidParameterError(f"cannot take a norm of {type(f).__name__}")
    return float(np.sqrt(sq))


def gagliardo_half_norm(v: SurfaceFunction) -> float:
    """``W^{1/2,2}(E)`` norm from the double-integral (Gagliardo) seminorm.

    The singular diagonal is filled with ``v'(x)^2``, its limit for smooth
    ``v``; the truncated exterior ``|y| > L`` where ``v = 0`` is integrated in
    closed form.
    """
    g = v.grid
    x, w, f = g.nodes, g.weights, v.values
    dx = x[:, None] - x[None, :]
    df = f[:, None] - f[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = df**2 / dx**2
    d = derivative_matrix(g) @ f
    np.fill_diagonal(q, d**2)
    semi = float(w @ q @ w)
    # |y| > L contributes twice (x,y) and (y,x) orderings
    gap_r = np.maximum(g.L - x, 0.5 * g.h)
    gap_l = np.maximum(g.L + x, 0.5 * g.h)
    tail = 2.0 * float(np.dot(w, f**2 * (1.0 / gap_r + 1.0 / gap_l)))
    return float(np.sqrt(np.dot(w, f**2) + semi + tail))
