"""Coupled evolution of the free-surface potential and the heaving cylinder.

State ``z = [v, h, u, l]`` with ``u = v_t`` and ``l = h_t``.  The system is

    v_t = u
    h_t = l
    u_t = -g Lambda v - g l sigma
    l_t = -(2g/pi) h + (1/pi) int (D_Omega u)(sin t, cos t) cos t dt + f / rho

with ``sigma(x) = 1/x^2``.  The first and last entries of the last two rows
form ``A``; the coupling terms form the bounded perturbation ``P``.

The added-force integral reduces to a surface integral against the kernel
``K(x) = int_{-pi/2}^{pi/2} cos^2 t / (x^2 - 2 x sin t + 1) dt = pi / (2 x^2)``,

    (1/pi) int (D_Omega u) cos t dt = (2 / pi^2) int_E u K = (1/pi) <sigma, u>,

so the coupled flow conserves
``E' = |u|^2/2 + (g/2)<Lambda v, v> + (g pi / 2) l^2 + g^2 h^2`` when ``f = 0``.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from threadpoolctl import threadpool_limits

from .grids import FieldPoints, InvalidParameterError, SurfaceFunction, SurfaceGrid, norm
from .omega import DtnOperator, dirichlet_extend_omega, sqrt_norm

__all__ = [
    "SystemState",
    "PhysicsParams",
    "Forcing",
    "HeaveKernel",
    "heave_kernel",
    "sigma",
    "added_force",
    "apply_A",
    "apply_P",
    "apply_Q",
    "energy",
    "coupled_energy",
    "x_inner",
    "system_matrix",
    "Stepper",
    "step",
    "integrate",
    "simulate",
    "Trajectory",
    "DivergenceError",
    "SolverError",
]


class DivergenceError(FloatingPointError):
    """A non-finite value appeared in the state."""


class SolverError(RuntimeError):
    """The implicit linear system could not be factorized."""


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhysicsParams:
    g: float = 9.81
    rho: float = 1000.0

    def __post_init__(self):
        if not (self.g > 0 and self.rho > 0):
            raise InvalidParameterError("g and rho must be positive")


@dataclass(frozen=True, eq=False)
class SystemState:
    v: SurfaceFunction
    h: float
    u: SurfaceFunction
    ell: float
    t: float = 0.0

    def __post_init__(self):
        if self.v.grid != self.u.grid:
            raise InvalidParameterError("v and u must share a grid")
        if not (np.isfinite(self.h) and np.isfinite(self.ell) and np.isfinite(self.t)):
            raise InvalidParameterError("state scalars must be finite")

    @property
    def grid(self) -> SurfaceGrid:
        return self.v.grid

    @classmethod
    def zeros(cls, grid: SurfaceGrid, t: float = 0.0) -> "SystemState":
        return cls(grid.zeros(), 0.0, grid.zeros(), 0.0, t)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.v.values, [self.h], self.u.values, [self.ell]])

    @classmethod
    def from_vector(cls, grid: SurfaceGrid, z: np.ndarray, t: float = 0.0) -> "SystemState":
        m = grid.size
        _check_finite(z, m)
        return cls(SurfaceFunction(grid, z[:m]), float(z[m]), SurfaceFunction(grid, z[m + 1 : 2 * m + 1]),
                   float(z[2 * m + 1]), t)

    def __add__(self, other: "SystemState") -> "SystemState":
        return SystemState(self.v + other.v, self.h + other.h, self.u + other.u, self.ell + other.ell, self.t)

    def __mul__(self, c: float) -> "SystemState":
        return SystemState(self.v * c, self.h * c, self.u * c, self.ell * c, self.t)

    __rmul__ = __mul__


_BLOCKS = ("v", "h", "u", "ell")


def _check_finite(z: np.ndarray, m: int):
    if np.all(np.isfinite(z)):
        return
    parts = (z[:m], z[m : m + 1], z[m + 1 : 2 * m + 1], z[2 * m + 1 :])
    bad = [name for name, p in zip(_BLOCKS, parts) if not np.all(np.isfinite(p))]
    raise DivergenceError(f"non-finite values in block(s) {', '.join(bad)}")


@dataclass(frozen=True)
class Forcing:
    """Applied vertical force per unit length, ``f(t)`` in newtons per metre.

    Kinds and parameters:

    * ``zero``
    * ``constant``: ``value``
    * ``sinusoid``: ``amplitude``, ``omega``, ``phase`` (``a sin(omega t + phase)``)
    * ``pulse``: ``amplitude``, ``t0``, ``width`` (Gaussian in time)
    * ``table``: ``times``, ``values`` (piecewise linear, must cover the run)
    """

    kind: str = "zero"
    params: dict = field(default_factory=dict)

    _KEYS = {
        "zero": set(),
        "constant": {"value"},
        "sinusoid": {"amplitude", "omega", "phase"},
        "pulse": {"amplitude", "t0", "width"},
        "table": {"times", "values"},
    }

    def __post_init__(self):
        if self.kind not in self._KEYS:
            raise InvalidParameterError(f"unknown forcing kind {self.kind!r}")
        allowed = self._KEYS[self.kind]
        extra = set(self.params) - allowed
        if extra:
            raise InvalidParameterError(f"forcing {self.kind!r} does not take {sorted(extra)}")
        if self.kind == "table":
            t = np.asarray(self.params.get("times", []), dtype=float)
            f = np.asarray(self.params.get("values", []), dtype=float)
            if t.size < 2 or t.shape != f.shape or np.any(np.diff(t) <= 0):
                raise InvalidParameterError("forcing table needs matching, strictly increasing times and values")
        if self.kind == "pulse" and self.params.get("width", 1.0) <= 0:
            raise InvalidParameterError("pulse width must be positive")

    def covers(self, t_end: float) -> bool:
        if self.kind != "table":
            return True
        t = self.params["times"]
        return t[0] <= 0.0 and t[-1] >= t_end

    def __call__(self, t: float) -> float:
        p = self.params
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return float(p.get("value", 0.0))
        if self.kind == "sinusoid":
            return float(p.get("amplitude", 1.0) * np.sin(p.get("omega", 1.0) * t + p.get("phase", 0.0)))
        if self.kind == "pulse":
            s = (t - p.get("t0", 0.0)) / p.get("width", 1.0)
            return float(p.get("amplitude", 1.0) * np.exp(-s * s))
        times, values = p["times"], p["values"]
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise InvalidParameterError(f"forcing table does not cover t={t}")
        return float(np.interp(t, times, values))


# ---------------------------------------------------------------------------
# heave kernel and added force
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HeaveKernel:
    """``K = I1 + I2`` sampled at the surface nodes (``I1`` carries ``+2x sin t``)."""

    grid: SurfaceGrid
    K: np.ndarray
    I1: np.ndarray
    I2: np.ndarray


def heave_kernel(grid: SurfaceGrid, order: int = 64) -> HeaveKernel:
    """Gauss-Legendre evaluation of the added-force kernel, symmetrized under ``x -> -x``."""
    t, w = np.polynomial.legendre.leggauss(order)
    theta = 0.25 * np.pi * (t + 1)
    w = 0.25 * np.pi * w
    x = grid.nodes[:, None]
    c2 = np.cos(theta) ** 2
    s = np.sin(theta)
    i1 = (w * c2 / (x * x + 2 * x * s + 1)) @ np.ones(order)
    i2 = (w * c2 / (x * x - 2 * x * s + 1)) @ np.ones(order)
    k = i1 + i2
    k = 0.5 * (k + k[grid.mirror])
    return HeaveKernel(grid, k, i1, i2)


def sigma(grid: SurfaceGrid) -> SurfaceFunction:
    return SurfaceFunction(grid, 1.0 / grid.nodes**2)


def added_force(u: SurfaceFunction, route: str = "kernel", *, kernel: HeaveKernel | None = None,
                panels: int = 64, order: int = 8) -> float:
    """``(1/pi) int_{-pi/2}^{pi/2} (D_Omega u)(sin t, cos t) cos t dt``.

    ``route='kernel'`` integrates ``(2/pi^2) u K`` over the surface with the
    trapezoid rule; ``route='field'`` evaluates the extension on the
    half-circle and integrates in ``t`` with composite Gauss-Legendre.
    """
    if route == "kernel":
        kernel = kernel or heave_kernel(u.grid)
        if kernel.grid != u.grid:
            raise InvalidParameterError("kernel and u live on different grids")
        return float(2.0 / np.pi**2 * np.dot(u.grid.weights, u.values * kernel.K))
    if route == "field":
        tq, wq = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(-np.pi / 2, np.pi / 2, panels + 1)
        a, b = edges[:-1, None], edges[1:, None]
        theta = (0.5 * (a + b) + 0.5 * (b - a) * tq).ravel()
        wt = (0.5 * (b - a) * wq).ravel()
        vals = dirichlet_extend_omega(u, FieldPoints.polar(np.ones_like(theta), theta))
        return float(np.dot(wt, vals * np.cos(theta)) / np.pi)
    raise InvalidParameterError(f"unknown added-force route {route!r}")


# ---------------------------------------------------------------------------
# operators on states
# ---------------------------------------------------------------------------


def _lam(op: DtnOperator, symmetric: bool) -> np.ndarray:
    return op.symmetrized if symmetric else op.matrix


def apply_A(z: SystemState, params: PhysicsParams, op: DtnOperator, *, symmetric: bool = True) -> SystemState:
    """``[u, l, -g Lambda v, -(2g/pi) h]``."""
    g = params.g
    lv = _lam(op, symmetric) @ z.v.values
    return SystemState(z.u, z.ell, SurfaceFunction(z.grid, -g * lv), -2 * g / np.pi * z.h, z.t)


def apply_Q(z: SystemState) -> SystemState:
    """``[0, 0, -v, -h]``; ``A + Q`` is skew-adjoint in the shifted inner product."""
    return SystemState(z.grid.zeros(), 0.0, z.v * -1.0, -z.h, z.t)


def apply_P(z: SystemState, params: PhysicsParams, kernel: HeaveKernel) -> SystemState:
    """``[0, 0, -g l sigma, added_force(u)]``."""
    if kernel.grid != z.grid:
        raise InvalidParameterError("kernel and state live on different grids")
    s = sigma(z.grid)
    return SystemState(z.grid.zeros(), 0.0, s * (-params.g * z.ell), added_force(z.u, kernel=kernel), z.t)


def x_inner(z1: SystemState, z2: SystemState, params: PhysicsParams, op: DtnOperator, *,
            h_weight: float | None = None) -> float:
    """Inner product of ``X``: ``<(I + g Lambda) v1, v2> + c h1 h2 + <u1, u2> + l1 l2``.

    ``h_weight`` defaults to ``c = 2g/pi`` as in the displayed norm; the
    skew-adjoint shift ``A + Q`` needs ``c = 1 + 2g/pi``.
    """
    g = params.g
    c = 2 * g / np.pi if h_weight is None else h_weight
    w = z1.grid.weights
    v2 = z2.v.values + g * (op.symmetrized @ z2.v.values)
    return float(np.dot(w, z1.v.values * v2) + c * z1.h * z2.h + np.dot(w, z1.u.values * z2.u.values)
                 + z1.ell * z2.ell)


def energy(z: SystemState, params: PhysicsParams, op: DtnOperator) -> float:
    """Squared ``X`` norm ``|(I + g Lambda)^1/2 v|^2 + (2g/pi) h^2 + |u|^2 + l^2``."""
    g = params.g
    sv = sqrt_norm(z.v, g, op)
    return float(sv * sv + 2 * g / np.pi * z.h**2 + norm(z.u) ** 2 + z.ell**2)


def coupled_energy(z: SystemState, params: PhysicsParams, op: DtnOperator) -> float:
    """Energy conserved by the unforced coupled system, ``|u|^2/2 + (g/2)<Lambda v, v> + (g pi/2) l^2 + g^2 h^2``."""
    g = params.g
    w = z.grid.weights
    lv = op.symmetrized @ z.v.values
    return float(0.5 * np.dot(w, z.u.values**2) + 0.5 * g * np.dot(w, lv * z.v.values)
                 + 0.5 * g * np.pi * z.ell**2 + g * g * z.h**2)


def system_matrix(grid: SurfaceGrid, params: PhysicsParams, op: DtnOperator, kernel: HeaveKernel | None = None, *,
                  coupling: bool = True, shift: bool = False) -> np.ndarray:
    """Dense matrix of ``A`` (+ ``P`` when ``coupling``, + ``Q`` when ``shift``) on ``[v, h, u, l]``."""
    m = grid.size
    g = params.g
    iv, ih, iu, il = slice(0, m), m, slice(m + 1, 2 * m + 1), 2 * m + 1
    a = np.zeros((2 * m + 2, 2 * m + 2))
    a[iv, iu] = np.eye(m)
    a[ih, il] = 1.0
    a[iu, iv] = -g * op.symmetrized
    a[il, ih] = -2 * g / np.pi
    if coupling:
        kernel = kernel or heave_kernel(grid)
        a[iu, il] = -g / grid.nodes**2
        a[il, iu] = 2.0 / np.pi**2 * grid.weights * kernel.K
    if shift:
        a[iu, iv] -= np.eye(m)
        a[il, ih] -= 1.0
    return a


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------


class Stepper:
    """Advance ``z' = A1 z + F(t)`` with a fixed step.

    ``implicit-midpoint`` prefactorizes ``I - (dt/2) A1`` once; forcing is
    sampled at the half step.  ``rk4`` is the classical explicit scheme.
    """

    def __init__(self, matrix: np.ndarray, dt: float, scheme: str = "implicit-midpoint", rho: float = 1000.0):
        if dt <= 0:
            raise InvalidParameterError("dt must be positive")
        if scheme not in ("implicit-midpoint", "rk4"):
            raise InvalidParameterError(f"unknown scheme {scheme!r}")
        self.matrix, self.dt, self.scheme, self.rho = matrix, dt, scheme, rho
        self.size = matrix.shape[0]
        if scheme == "implicit-midpoint":
            eye = np.eye(self.size)
            try:
                self._lu = sla.lu_factor(eye - 0.5 * dt * matrix, check_finite=True)
            except (ValueError, sla.LinAlgError) as exc:
                raise SolverError(f"cannot factorize I - dt/2 A1: {exc}") from exc
            diag = np.abs(np.diag(self._lu[0]))
            if diag.min() <= np.finfo(float).eps * diag.max():
                raise SolverError("I - dt/2 A1 is numerically singular")
            self._rhs = eye + 0.5 * dt * matrix

    def _force(self, forcing, t: float) -> np.ndarray:
        f = np.zeros(self.size)
        if forcing is not None:
            f[-1] = forcing(t) / self.rho
        return f

    def advance(self, z: np.ndarray, t: float, forcing=None) -> np.ndarray:
        dt = self.dt
        if self.scheme == "implicit-midpoint":
            rhs = self._rhs @ z + dt * self._force(forcing, t + 0.5 * dt)
            out = sla.lu_solve(self._lu, rhs)
        else:
            a = self.matrix
            k1 = a @ z + self._force(forcing, t)
            k2 = a @ (z + 0.5 * dt * k1) + self._force(forcing, t + 0.5 * dt)
            k3 = a @ (z + 0.5 * dt * k2) + self._force(forcing, t + 0.5 * dt)
            k4 = a @ (z + dt * k3) + self._force(forcing, t + dt)
            out = z + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        _check_finite(out, (self.size - 2) // 2)
        return out


def step(z: SystemState, dt: float, scheme: str, params: PhysicsParams, op: DtnOperator,
         kernel: HeaveKernel | None = None, forcing: Forcing | None = None, *, coupling: bool = True,
         stepper: Stepper | None = None) -> SystemState:
    """One step of size ``dt``; pass a prebuilt ``stepper`` to reuse its factorization."""
    if stepper is None:
        stepper = Stepper(system_matrix(z.grid, params, op, kernel, coupling=coupling), dt, scheme, params.rho)
    out = stepper.advance(z.to_vector(), z.t, forcing)
    return SystemState.from_vector(z.grid, out, z.t + stepper.dt)


@dataclass
class Trajectory:
    """Sampled history: one row per output stride, plus full snapshots."""

    t: np.ndarray
    h: np.ndarray
    hdot: np.ndarray
    energy: np.ndarray
    v_l2: np.ndarray
    v_half_norm: np.ndarray
    snapshots: list = field(default_factory=list)
    final: SystemState | None = None
    manifest: dict = field(default_factory=dict)

    def columns(self) -> np.ndarray:
        return np.column_stack([self.t, self.h, self.hdot, self.energy, self.v_l2, self.v_half_norm])


def integrate(z0: SystemState, params: PhysicsParams, op: DtnOperator, *, dt: float, t_end: float,
              scheme: str = "implicit-midpoint", kernel: HeaveKernel | None = None, forcing: Forcing | None = None,
              coupling: bool = True, stride: int = 1, snapshot_times=()) -> Trajectory:
    """Step from ``z0.t`` to ``t_end``; the step count is ``round((t_end - t0) / dt)``."""
    if t_end <= z0.t:
        raise InvalidParameterError("t_end must exceed the initial time")
    if stride < 1:
        raise InvalidParameterError("output stride must be a positive number of steps")
    nsteps = int(round((t_end - z0.t) / dt))
    grid = z0.grid
    kernel = kernel or heave_kernel(grid)
    started = _time.perf_counter()
    stepper = Stepper(system_matrix(grid, params, op, kernel, coupling=coupling), dt, scheme, params.rho)
    setup = _time.perf_counter() - started
    snap_steps = {int(round((ts - z0.t) / dt)): ts for ts in snapshot_times}
    rows = []
    snaps = []

    def record(state: SystemState):
        rows.append((state.t, state.h, state.ell, energy(state, params, op), norm(state.v),
                     sqrt_norm(state.v, params.g, op)))

    z = z0.to_vector()
    state = z0
    record(state)
    if 0 in snap_steps:
        snaps.append(state)
    # the loop is latency bound: one BLAS thread avoids oversubscription
    with threadpool_limits(1):
        for k in range(1, nsteps + 1):
            t_prev = z0.t + (k - 1) * dt
            z = stepper.advance(z, t_prev, forcing)
            if k % stride == 0 or k == nsteps or k in snap_steps:
                state = SystemState.from_vector(grid, z, z0.t + k * dt)
                if k % stride == 0 or k == nsteps:
                    record(state)
                if k in snap_steps:
                    snaps.append(state)
    arr = np.array(rows)
    traj = Trajectory(*arr.T, snapshots=snaps, final=SystemState.from_vector(grid, z, z0.t + nsteps * dt))
    traj.manifest = {
        "steps": nsteps,
        "dt": dt,
        "scheme": scheme,
        "coupling": coupling,
        "setup_seconds": setup,
        "loop_seconds": _time.perf_counter() - started - setup,
    }
    return traj


def simulate(config) -> Trajectory:
    """Run a full simulation described by a :class:`floatheave.config.SimConfig`."""
    from .config import build_run

    run = build_run(config)
    traj = integrate(run.initial, run.params, run.op, dt=config.dt, t_end=config.T, scheme=config.scheme,
                     kernel=run.kernel, forcing=run.forcing, coupling=config.coupling, stride=config.stride,
                     snapshot_times=config.snapshot_times)
    traj.manifest.update(run.manifest)
    return traj
