"""Verification harness: every identity, bound and route equivalence as a named check.

Each check returns a measured value compared against one entry of the
versioned :data:`TOLERANCES` table.  :func:`run_suite` executes the checks
at ``quick`` or ``full`` resolution and reports one :class:`CheckReport` per
check; failures are recorded, never raised.
"""

from __future__ import annotations

import functools
import hashlib
import json
import sys
import time
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import quad

from .grids import (
    InvalidParameterError,
    LineFunction,
    SurfaceFunction,
    build_line_grid,
    build_surface_grid,
    norm,
    reflect_extend,
)

__all__ = [
    "CheckReport",
    "Outcome",
    "Context",
    "LEVELS",
    "TOLERANCES",
    "TOLERANCES_VERSION",
    "CHECKS",
    "harmonic_residual",
    "neumann_residual",
    "run_check",
    "run_suite",
    "summary_table",
]

# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------


def _inside_omega(x, y) -> bool:
    return bool(np.all(y > 0) and np.all(x * x + y * y >= 1))


def harmonic_residual(field, box, h: float, *, samples: int = 5, dtype=np.float64) -> float:
    """Largest five-point Laplacian of ``field`` over a ``samples x samples`` lattice in ``box``.

    ``field(x, y)`` takes and returns arrays; ``box = (x0, x1, y0, y1)``.
    Pass ``dtype=np.longdouble`` to evaluate the stencil in extended
    precision when ``h`` is tiny.
    """
    x0, x1, y0, y1 = box
    if not (h > 0 and x1 >= x0 and y1 >= y0):
        raise InvalidParameterError("need h > 0 and an ordered box")
    one = dtype(1)
    hh = dtype(h)
    xs = np.linspace(dtype(x0), dtype(x1), samples, dtype=dtype)
    ys = np.linspace(dtype(y0), dtype(y1), samples, dtype=dtype)
    x, y = (a.ravel() for a in np.meshgrid(xs, ys, indexing="ij"))
    stencil_x = np.concatenate([x, x - hh, x + hh, x, x])
    stencil_y = np.concatenate([y, y, y, y - hh, y + hh])
    if not _inside_omega(stencil_x, stencil_y):
        raise InvalidParameterError("the five-point stencil leaves the fluid domain")
    vals = np.asarray(field(stencil_x, stencil_y)).reshape(5, -1)
    lap = (vals[1] + vals[2] + vals[3] + vals[4] - 4 * one * vals[0]) / (hh * hh)
    return float(np.max(np.abs(lap)))


def neumann_residual(field, thetas, dr: float = 1e-5, *, target=None) -> float:
    """Largest radial derivative of ``field`` on the cylinder ``r = 1``.

    One-sided differences at steps ``dr`` and ``dr / 2`` are combined by
    Richardson extrapolation.  With ``target(theta)`` the result is the
    largest deviation from it instead.  Points are ``(sin theta, cos theta)``.
    """
    if dr <= 0:
        raise InvalidParameterError("dr must be positive")
    th = np.asarray(thetas, dtype=float)
    if np.any(np.abs(th) >= np.pi / 2):
        raise InvalidParameterError("theta samples must lie in (-pi/2, pi/2)")
    s, c = np.sin(th), np.cos(th)

    def radial(step):
        r = 1.0 + step
        return (np.asarray(field(r * s, r * c)) - np.asarray(field(s, c))) / step

    d = 2 * radial(0.5 * dr) - radial(dr)
    if target is not None:
        d = d - target(th)
    return float(np.max(np.abs(d)))


# ---------------------------------------------------------------------------
# reports, tolerances, levels
# ---------------------------------------------------------------------------

TOLERANCES_VERSION = "1"

# anchor -> tolerance, or {level: tolerance} where resolution matters
TOLERANCES: dict[str, float | dict] = {
    "poisson-kernel-mass": 1e-10,
    "poisson-semigroup": 1e-5,
    "fourier-convention": 1e-10,
    "hilbert-route-agreement": 1e-5,
    "hilbert-closed-form": 1e-4,
    "hilbert-involution": 1e-12,
    "multiplier-route-agreement": 1e-5,
    "multiplier-closed-form": 1e-4,
    "halfplane-dtn-symmetry": 1e-8,
    "trace-limit": 5e-3,
    "classical-normal-derivative": (0.8, 1.2),
    "halfplane-energy-identity": 0.02,
    "gradient-bound": 1e-3,
    "dirichlet-trace": 0.0,
    "cylinder-neumann": 1e-3,
    "interior-harmonicity": (3.5, 4.5),
    "cylinder-potential-harmonic": 1e-9,
    "cylinder-potential-neumann": 1e-6,
    "neumann-probe-exact": 1e-8,
    "extension-route-agreement": 1e-5,
    "dtn-route-agreement": {"quick": 1e-2, "full": 1e-4},
    "dtn-mutation-detected": {"quick": 1e-2, "full": 1e-4},
    "dtn-symmetry": 1e-6,
    "dtn-positivity": 1e-8,
    "dtn-parity": 1e-12,
    "dtn-energy-route-agreement": {"quick": 2e-2, "full": 2e-3},
    "omega-energy-identity": {"quick": 0.02, "full": 0.02},
    "resolvent-bound": 1e-6,
    "resolvent-manufactured": 1e-8,
    "sigma-norm": 1e-6,
    "kernel-positive-even": 0.0,
    "kernel-log-bound": 0.0,
    "kernel-far-field": 0.05,
    "added-force-routes": {"quick": 1e-2, "full": 1e-3},
    "added-force-odd": 1e-10,
    "perturbation-bound": {"quick": 5e-2, "full": 1e-3},
    "skew-adjointness": 1e-10,
    "midpoint-conservation": 1e-12,
    "wave-energy-conservation": 1e-12,
    "coupled-energy-conservation": 1e-9,
    "decoupled-oscillator": 1e-6,
    "time-order": (1.8, 2.2),
    "coupled-self-convergence": (1.8, 2.2),
    "growth-bound": 0.0,
    "flow-linearity": 1e-12,
    "data-continuity": 0.0,
}


@dataclass(frozen=True)
class Settings:
    """Resolution of one suite level; the half-plane line is shared by all levels."""

    L: float
    n: int
    M: float = 100.0
    line_size: int = 2**14
    g: float = 9.81
    seed: int = 20240611
    route_samples: int = 10
    gradient_samples: int = 20
    skew_samples: int = 20
    box: float = 50.0
    conv_levels: tuple = ((256, 0.02), (512, 0.01), (1024, 0.005))
    conv_L: float = 40.0

    def fingerprint(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


LEVELS = {
    "quick": Settings(L=30.0, n=256, route_samples=3, gradient_samples=4, skew_samples=5, box=25.0,
                      conv_levels=((128, 0.04), (256, 0.02), (512, 0.01))),
    "full": Settings(L=50.0, n=2048),
}


@dataclass
class Outcome:
    """What a check function returns: the measured value and, optionally, its own verdict."""

    measured: float
    passed: bool | None = None
    details: dict = field(default_factory=dict)


@dataclass
class CheckReport:
    check_id: str
    anchor: str
    measured: float | None
    tolerance: object
    passed: bool
    runtime: float
    fingerprint: str
    level: str
    seed: int
    details: dict = field(default_factory=dict)
    skipped: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), default=_jsonable, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    return str(obj)


def tolerance_for(anchor: str, level: str):
    tol = TOLERANCES[anchor]
    return tol[level] if isinstance(tol, dict) else tol


def _verdict(measured: float, tol) -> bool:
    if not np.isfinite(measured):
        return False
    if isinstance(tol, tuple):
        return tol[0] <= measured <= tol[1]
    return measured <= tol


# ---------------------------------------------------------------------------
# shared, lazily built resources
# ---------------------------------------------------------------------------


class Context:
    """Grids and operators shared between checks of one suite run."""

    def __init__(self, level: str = "quick", settings: Settings | None = None):
        if level not in LEVELS:
            raise InvalidParameterError(f"unknown level {level!r}")
        self.level = level
        self.settings = settings or LEVELS[level]

    def rng(self, check_id: str) -> np.random.Generator:
        return np.random.default_rng([self.settings.seed, zlib.crc32(check_id.encode())])

    @functools.cached_property
    def line(self):
        s = self.settings
        return build_line_grid(s.M, s.line_size)

    @functools.cached_property
    def grid(self):
        return build_surface_grid(self.settings.L, self.settings.n)

    @functools.cached_property
    def surface_line(self):
        s = self.settings
        return build_line_grid(max(s.M, 2 * s.L), s.line_size, cover=s.L)

    @functools.cached_property
    def op(self):
        from .omega import assemble_dtn

        return assemble_dtn(self.grid, "variational", g=self.settings.g)

    @functools.cached_property
    def kernel(self):
        from .coupling import heave_kernel

        return heave_kernel(self.grid)

    @functools.cached_property
    def params(self):
        from .coupling import PhysicsParams

        return PhysicsParams(self.settings.g)


CHECKS: dict[str, tuple[str, callable]] = {}


def check(check_id: str, anchor: str):
    def deco(func):
        if check_id in CHECKS:
            raise ValueError(f"duplicate check {check_id}")
        CHECKS[check_id] = (anchor, func)
        return func

    return deco


def _rel(a, b, w=None) -> float:
    w = 1.0 if w is None else w
    return float(np.sqrt(np.sum(w * (a - b) ** 2) / np.sum(w * b**2)))


# ---------------------------------------------------------------------------
# half-plane checks
# ---------------------------------------------------------------------------


@check("poisson_mass", "poisson-kernel-mass")
def check_poisson_mass(ctx: Context) -> Outcome:
    from .halfplane import poisson_kernel

    rng = ctx.rng("poisson_mass")
    big = 1e4
    worst = 0.0
    for x, y in zip(rng.uniform(-5, 5, 8), rng.uniform(0.05, 3, 8)):
        cuts = [-big, x - 50 * y, x, x + 50 * y, big]
        inner = sum(quad(lambda t: poisson_kernel(x, y, t), a, b, limit=200, epsabs=1e-15, epsrel=1e-13)[0]
                    for a, b in zip(cuts, cuts[1:]))
        tails = (np.pi - np.arctan((big - x) / y) - np.arctan((big + x) / y)) / np.pi
        worst = max(worst, abs(inner + tails - 1.0))
    return Outcome(worst)


@check("poisson_semigroup", "poisson-semigroup")
def check_poisson_semigroup(ctx: Context) -> Outcome:
    from .halfplane import dirichlet_extend_H

    rng = ctx.rng("poisson_semigroup")
    x = ctx.line.nodes
    eta = LineFunction(ctx.line, 1.0 / (1.0 + x * x))
    pts = np.column_stack([rng.uniform(-5, 5, 100), rng.uniform(0.05, 3, 100)])
    got = dirichlet_extend_H(eta, pts)
    exact = (1 + pts[:, 1]) / (pts[:, 0] ** 2 + (1 + pts[:, 1]) ** 2)
    return Outcome(float(np.max(np.abs(got - exact) / exact)))


@check("fourier_gaussian", "fourier-convention")
def check_fourier(ctx: Context) -> Outcome:
    from .halfplane import fourier_transform

    x = ctx.line.nodes
    xi, fhat = fourier_transform(LineFunction(ctx.line, np.exp(-x * x)))
    return Outcome(float(np.max(np.abs(fhat - np.sqrt(np.pi) * np.exp(-xi * xi / 4)))))


def _hilbert_family(line):
    x = line.nodes
    return {"gauss": np.exp(-x * x), "lorentz": 1 / (1 + x * x), "odd_gauss": x * np.exp(-x * x)}


@check("hilbert_routes", "hilbert-route-agreement")
def check_hilbert_routes(ctx: Context) -> Outcome:
    from .halfplane import hilbert_fft, hilbert_pv

    errs = {}
    for name, f in _hilbert_family(ctx.line).items():
        lf = LineFunction(ctx.line, f)
        errs[name] = _rel(hilbert_fft(lf).values, hilbert_pv(lf))
    return Outcome(max(errs.values()), details=errs)


def _window(line, half=10.0):
    return np.abs(line.nodes) <= half


@check("hilbert_closed_form", "hilbert-closed-form")
def check_hilbert_closed(ctx: Context) -> Outcome:
    from .halfplane import hilbert_fft, hilbert_pv

    x = ctx.line.nodes
    lf = LineFunction(ctx.line, 1 / (1 + x * x))
    exact = x / (1 + x * x)
    w = _window(ctx.line)
    errs = {"fft": _rel(hilbert_fft(lf).values[w], exact[w]), "pv": _rel(hilbert_pv(lf)[w], exact[w])}
    return Outcome(max(errs.values()), details=errs)


@check("hilbert_involution", "hilbert-involution")
def check_hilbert_involution(ctx: Context) -> Outcome:
    from .halfplane import hilbert_fft

    x = ctx.line.nodes
    f = np.exp(-x * x)
    kw = dict(pad=1, periodic_correction=False)
    hh = hilbert_fft(hilbert_fft(LineFunction(ctx.line, f), **kw), **kw).values
    return Outcome(float(np.max(np.abs(hh + f - f.mean()))))


@check("multiplier_routes", "multiplier-route-agreement")
def check_multiplier_routes(ctx: Context) -> Outcome:
    from .halfplane import lambda_H

    x = ctx.line.nodes
    errs = {}
    for name, f in {"gauss": np.exp(-x * x), "odd_gauss": x * np.exp(-x * x),
                    "wide_gauss": np.exp(-((x - 1) / 3) ** 2)}.items():
        lf = LineFunction(ctx.line, f)
        errs[name] = _rel(lambda_H(lf, "multiplier").values, lambda_H(lf, "hilbert").values)
    return Outcome(max(errs.values()), details=errs)


@check("multiplier_closed_form", "multiplier-closed-form")
def check_multiplier_closed(ctx: Context) -> Outcome:
    from .halfplane import lambda_H

    x = ctx.line.nodes
    lf = LineFunction(ctx.line, 1 / (1 + x * x))
    exact = (1 - x * x) / (1 + x * x) ** 2
    w = _window(ctx.line)
    errs = {r: _rel(lambda_H(lf, r).values[w], exact[w]) for r in ("multiplier", "hilbert")}
    return Outcome(max(errs.values()), details=errs)


@check("halfplane_dtn_symmetry", "halfplane-dtn-symmetry")
def check_halfplane_symmetry(ctx: Context) -> Outcome:
    from .halfplane import lambda_H

    rng = ctx.rng("halfplane_dtn_symmetry")
    x = ctx.line.nodes
    worst, min_form = 0.0, np.inf
    for _ in range(5):
        c1, c2 = rng.uniform(-3, 3, 2)
        s1, s2 = rng.uniform(0.5, 3, 2)
        a = np.exp(-((x - c1) / s1) ** 2) * np.cos(rng.uniform(0, 2) * x)
        b = np.exp(-((x - c2) / s2) ** 2)
        la = lambda_H(LineFunction(ctx.line, a)).values
        lb = lambda_H(LineFunction(ctx.line, b)).values
        worst = max(worst, abs(la @ b - a @ lb) / (np.linalg.norm(a) * np.linalg.norm(b)))
        min_form = min(min_form, float(la @ a), float(lb @ b))
    return Outcome(worst, passed=bool(worst <= tolerance_for("halfplane-dtn-symmetry", ctx.level)
                                      and min_form >= 0), details={"min_form": min_form})


@check("trace_limit", "trace-limit")
def check_trace_limit(ctx: Context) -> Outcome:
    from .halfplane import extension_rows, lambda_H

    x = ctx.line.nodes
    eta = LineFunction(ctx.line, np.exp(-((x / 4) ** 2)))
    lam = lambda_H(eta).values
    vals = []
    for y in (0.2, 0.1, 0.05, 0.025):
        _, _, gy = extension_rows(eta, y, gradient=True)
        vals.append(float(np.sqrt(ctx.line.dx) * np.linalg.norm(gy + lam)))
    scale = norm(eta, "W12")
    measured = vals[-1] / scale
    decreasing = all(b < a for a, b in zip(vals, vals[1:]))
    tol = tolerance_for("trace-limit", ctx.level)
    return Outcome(measured, passed=bool(decreasing and measured < tol), details={"sequence": vals, "W12": scale})


@check("classical_normal_derivative", "classical-normal-derivative")
def check_classical(ctx: Context) -> Outcome:
    from .halfplane import extension_rows, lambda_H

    x = ctx.line.nodes
    eta = LineFunction(ctx.line, np.exp(-x * x))
    lam = lambda_H(eta).values
    errs = []
    for dy in (0.16, 0.08, 0.04):
        quotient = (eta.values - extension_rows(eta, dy)) / dy
        errs.append(float(np.max(np.abs(quotient - lam))))
    orders = [float(np.log2(a / b)) for a, b in zip(errs, errs[1:])]
    return Outcome(orders[-1], details={"errors": errs, "orders": orders})


def _box_energy(line, e1, e2, half_width: float, panels: int = 40, order: int = 8) -> float:
    from .halfplane import extension_rows

    edges = np.concatenate([[0.0], np.geomspace(1e-3, half_width, panels)])
    t, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    ys = (0.5 * (a + b) + 0.5 * (b - a) * t).ravel()
    wy = (0.5 * (b - a) * w).ravel()
    inside = np.abs(line.nodes) <= half_width
    total = 0.0
    for y, wt in zip(ys, wy):
        _, gx1, gy1 = extension_rows(e1, y, gradient=True)
        if e2 is e1:
            gx2, gy2 = gx1, gy1
        else:
            _, gx2, gy2 = extension_rows(e2, y, gradient=True)
        total += wt * line.dx * float(np.sum((gx1 * gx2 + gy1 * gy2)[inside]))
    return total


@check("halfplane_energy", "halfplane-energy-identity")
def check_halfplane_energy(ctx: Context) -> Outcome:
    from .halfplane import lambda_H

    x = ctx.line.nodes
    e1 = LineFunction(ctx.line, np.exp(-x * x))
    e2 = LineFunction(ctx.line, np.exp(-((x - 0.5) ** 2) / 2))
    box = _box_energy(ctx.line, e1, e2, ctx.settings.box)
    ref = ctx.line.dx * float(lambda_H(e1).values @ e2.values)
    return Outcome(abs(box - ref) / abs(ref), details={"box": box, "form": ref})


@check("gradient_bound", "gradient-bound")
def check_gradient_bound(ctx: Context) -> Outcome:
    from .halfplane import fourier_transform

    rng = ctx.rng("gradient_bound")
    x = ctx.line.nodes
    worst = -np.inf
    for _ in range(ctx.settings.gradient_samples):
        c, s = rng.uniform(-3, 3), rng.uniform(1, 3)
        k, ph = rng.uniform(0, 2), rng.uniform(0, 2 * np.pi)
        eta = LineFunction(ctx.line, rng.uniform(0.5, 2) * np.exp(-((x - c) / s) ** 2) * np.cos(k * x + ph))
        lhs = _box_energy(ctx.line, eta, eta, 10.0, panels=16, order=6)
        xi, fhat = fourier_transform(eta)
        dxi = abs(xi[1] - xi[0])
        rhs = 0.5 * float(np.sum((1 + np.abs(xi)) * np.abs(fhat) ** 2) * dxi)
        worst = max(worst, lhs - rhs)
    return Outcome(float(worst))


# ---------------------------------------------------------------------------
# fluid-domain checks
# ---------------------------------------------------------------------------


def _flat_profile(grid, center=1.0, width=1.0, skew=0.0, parity="even"):
    x = grid.nodes
    base = np.exp(-(((np.abs(x) - center) / width) ** 2))
    if parity == "odd":
        return base * np.sign(x)
    return base * (1 + skew * np.sign(x))


@check("dirichlet_trace", "dirichlet-trace")
def check_dirichlet_trace(ctx: Context) -> Outcome:
    from .omega import dirichlet_extend_omega

    grid = ctx.grid
    v = SurfaceFunction(grid, _flat_profile(grid, skew=0.3))
    pts = np.column_stack([grid.nodes, np.zeros(grid.size)])
    return Outcome(float(np.max(np.abs(dirichlet_extend_omega(v, pts) - v.values))))


def _omega_field(v):
    from .omega import dirichlet_extend_omega

    return lambda x, y: dirichlet_extend_omega(v, np.column_stack([x, y]))


@check("cylinder_neumann", "cylinder-neumann")
def check_cylinder_neumann(ctx: Context) -> Outcome:
    v = SurfaceFunction(ctx.grid, _flat_profile(ctx.grid, skew=0.3))
    thetas = np.linspace(-1.4, 1.4, 41)
    res = neumann_residual(_omega_field(v), thetas, 1e-5)
    return Outcome(res / norm(v, "W12"), details={"residual": res})


@check("interior_harmonicity", "interior-harmonicity")
def check_interior_harmonicity(ctx: Context) -> Outcome:
    v = SurfaceFunction(ctx.grid, _flat_profile(ctx.grid, skew=0.3))
    box = (-1.0, 1.0, 1.5, 2.5)
    r1 = harmonic_residual(_omega_field(v), box, 0.1)
    r2 = harmonic_residual(_omega_field(v), box, 0.05)
    return Outcome(r1 / r2, details={"h=0.1": r1, "h=0.05": r2})


def _phi1_field(x, y):
    return -y / (x * x + y * y)


@check("cylinder_potential_harmonic", "cylinder-potential-harmonic")
def check_phi1_harmonic(ctx: Context) -> Outcome:
    return Outcome(harmonic_residual(_phi1_field, (2.0, 3.0, 2.0, 3.0), 2e-5, dtype=np.longdouble))


@check("cylinder_potential_neumann", "cylinder-potential-neumann")
def check_phi1_neumann(ctx: Context) -> Outcome:
    thetas = np.linspace(-1.5, 1.5, 61)
    return Outcome(neumann_residual(_phi1_field, thetas, 1e-5, target=np.cos))


@check("neumann_probe_exact", "neumann-probe-exact")
def check_neumann_probe(ctx: Context) -> Outcome:
    thetas = np.linspace(-1.5, 1.5, 61)
    return Outcome(neumann_residual(lambda x, y: x + x / (x * x + y * y), thetas, 1e-5))


@check("extension_routes", "extension-route-agreement")
def check_extension_routes(ctx: Context) -> Outcome:
    from .halfplane import dirichlet_extend_H
    from .omega import dirichlet_extend_omega

    grid = build_surface_grid(50.0, 2048)
    line = build_line_grid(100.0, 2**15)
    v = grid.sample(lambda x: 1 / (1 + x * x))
    pts = np.array([[1.3, 0.9], [-2.0, 1.5], [0.4, 1.2]])
    a = dirichlet_extend_omega(v, pts)
    b = dirichlet_extend_H(reflect_extend(v, line), pts)
    return Outcome(float(np.max(np.abs(a - b) / np.abs(a))))


def _route_family(ctx: Context, count: int):
    rng = ctx.rng("dtn_routes")
    grid = ctx.grid
    x = grid.nodes
    out = []
    for k in range(count):
        width = rng.uniform(0.7, 2.0)
        if k % 3 == 2:
            out.append(_flat_profile(grid, width=width, parity="odd"))
        else:
            skew = rng.uniform(-0.5, 0.5)
            wave = np.cos(rng.uniform(0, 2) * (np.abs(x) - 1))
            out.append(_flat_profile(grid, width=width, skew=skew) * wave)
    return [SurfaceFunction(grid, f) for f in out]


@check("dtn_routes", "dtn-route-agreement")
def check_dtn_routes(ctx: Context) -> Outcome:
    from .omega import lambda_omega_direct, lambda_omega_reflect

    w = ctx.grid.weights
    errs = []
    for v in _route_family(ctx, ctx.settings.route_samples):
        a = lambda_omega_direct(v).values
        b = lambda_omega_reflect(v, ctx.surface_line).values
        errs.append(_rel(a, b, w))
    return Outcome(max(errs), details={"per_sample": errs})


@check("dtn_mutation", "dtn-mutation-detected")
def check_dtn_mutation(ctx: Context) -> Outcome:
    from .omega import lambda_omega_direct, lambda_omega_reflect

    v = SurfaceFunction(ctx.grid, _flat_profile(ctx.grid, skew=0.4))
    a = lambda_omega_direct(v, endpoint_sign=-1.0).values
    b = lambda_omega_reflect(v, ctx.surface_line).values
    disc = _rel(a, b, ctx.grid.weights)
    tol = tolerance_for("dtn-mutation-detected", ctx.level)
    return Outcome(disc, passed=bool(disc > 10 * tol), details={"route_tolerance": tol})


@check("dtn_symmetry", "dtn-symmetry")
def check_dtn_symmetry(ctx: Context) -> Outcome:
    return Outcome(ctx.op.relative_defect)


@check("dtn_positivity", "dtn-positivity")
def check_dtn_positivity(ctx: Context) -> Outcome:
    lowest = ctx.op.min_eigenvalue
    return Outcome(max(0.0, 1.0 - lowest), details={"min_eigenvalue": lowest})


@check("dtn_parity", "dtn-parity")
def check_dtn_parity(ctx: Context) -> Outcome:
    rng = ctx.rng("dtn_parity")
    grid = ctx.grid
    f = _flat_profile(grid, width=1.5, skew=0.3) * (1 + 0.1 * rng.standard_normal(grid.size))
    lam = ctx.op.matrix
    lhs = lam @ f[grid.mirror]
    rhs = (lam @ f)[grid.mirror]
    return Outcome(float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs)))


@check("dtn_energy_routes", "dtn-energy-route-agreement")
def check_dtn_energy_routes(ctx: Context) -> Outcome:
    from .omega import lambda_omega_direct

    w = ctx.grid.weights
    errs = []
    for v in _route_family(ctx, 3):
        a = float(w @ (ctx.op.matrix @ v.values * v.values))
        b = float(w @ (lambda_omega_direct(v).values * v.values))
        errs.append(abs(a - b) / abs(b))
    return Outcome(max(errs), details={"per_sample": errs})


@check("omega_energy", "omega-energy-identity")
def check_omega_energy(ctx: Context) -> Outcome:
    from .omega import dirichlet_energy

    grid = ctx.grid
    w = grid.weights
    v = SurfaceFunction(grid, _flat_profile(grid))
    u = SurfaceFunction(grid, _flat_profile(grid, center=1.5, width=np.sqrt(2), skew=0.4))
    o = SurfaceFunction(grid, _flat_profile(grid, parity="odd"))
    radius = min(grid.L, 50.0)
    out = {}
    for name, a, b in (("vv", v, v), ("vu", v, u), ("parity", v, o)):
        quad_val = dirichlet_energy(a, b, radius)
        form = float(w @ (ctx.op.matrix @ a.values * b.values))
        out[name] = (quad_val, form)
    rel = max(abs(q - f) / abs(f) for q, f in (out["vv"], out["vu"]))
    parity = max(abs(out["parity"][0]), abs(out["parity"][1]))
    tol = tolerance_for("omega-energy-identity", ctx.level)
    return Outcome(rel, passed=bool(rel < tol and parity < 1e-6),
                   details={k: list(val) for k, val in out.items()} | {"parity_abs": parity})


@check("resolvent_bound", "resolvent-bound")
def check_resolvent_bound(ctx: Context) -> Outcome:
    from .omega import resolvent_norm

    est = resolvent_norm(ctx.op, 1.0)
    return Outcome(max(0.0, est - 1.0), details={"norm": est})


@check("resolvent_manufactured", "resolvent-manufactured")
def check_manufactured(ctx: Context) -> Outcome:
    from .omega import resolvent_solve

    g = ctx.settings.g
    v = _flat_profile(ctx.grid, width=1.3, skew=0.2)
    f = SurfaceFunction(ctx.grid, v + g * (ctx.op.symmetrized @ v))
    got = resolvent_solve(f, g, ctx.op).values
    return Outcome(float(np.max(np.abs(got - v)) / np.max(np.abs(v))))


# ---------------------------------------------------------------------------
# coupling checks
# ---------------------------------------------------------------------------


@check("sigma_norm", "sigma-norm")
def check_sigma_norm(ctx: Context) -> Outcome:
    from .coupling import sigma

    grid = build_surface_grid(200.0, 16384)
    val = norm(sigma(grid), rule="gregory") ** 2
    return Outcome(abs(val - 2.0 / 3.0), details={"value": val})


@check("kernel_positive_even", "kernel-positive-even")
def check_kernel_positive_even(ctx: Context) -> Outcome:
    k = ctx.kernel.K
    asym = float(np.max(np.abs(k - k[ctx.grid.mirror])))
    return Outcome(asym, passed=bool(asym == 0.0 and np.all(k > 0)), details={"min": float(k.min())})


@check("kernel_log_bound", "kernel-log-bound")
def check_kernel_log_bound(ctx: Context) -> Outcome:
    x = ctx.grid.nodes
    right = x > 1
    xr = x[right]
    bound = np.log(np.abs(xr + 1)) / xr - np.log(xr * xr + 1) / (2 * xr)
    excess = float(np.max(ctx.kernel.I1[right] - bound))
    return Outcome(max(0.0, excess), details={"max_excess": excess})


@check("kernel_far_field", "kernel-far-field")
def check_kernel_far_field(ctx: Context) -> Outcome:
    x = ctx.grid.nodes
    far = np.abs(x) >= min(20.0, 0.5 * ctx.grid.L)
    dev = np.abs(ctx.kernel.K[far] * x[far] ** 2 / (np.pi / 2) - 1)
    return Outcome(float(dev.max()))


@check("added_force_routes", "added-force-routes")
def check_added_force_routes(ctx: Context) -> Outcome:
    from .coupling import added_force

    x = ctx.grid.nodes
    u = SurfaceFunction(ctx.grid, np.exp(-(np.abs(x) - 1)))
    a = added_force(u, kernel=ctx.kernel)
    b = added_force(u, "field")
    return Outcome(abs(a - b) / abs(a), details={"kernel": a, "field": b})


@check("added_force_odd", "added-force-odd")
def check_added_force_odd(ctx: Context) -> Outcome:
    from .coupling import added_force

    u = SurfaceFunction(ctx.grid, _flat_profile(ctx.grid, parity="odd"))
    return Outcome(abs(added_force(u, kernel=ctx.kernel)))


def perturbation_norm(grid, params, kernel) -> float:
    """Exact ``X`` operator norm of the discrete coupling block ``P``.

    ``P`` maps ``l`` into the ``u`` slot and ``u`` into the ``l`` slot, both of
    unit weight, so its norm is the larger of the two rank-one norms.
    """
    from .coupling import sigma

    w = grid.weights
    to_u = params.g * norm(sigma(grid))
    to_l = float(np.sqrt(np.sum(w * (2.0 / np.pi**2 * kernel.K) ** 2)))
    return max(to_u, to_l)


def shift_norm(params) -> float:
    """``X`` operator norm bound of ``Q z = [0, 0, -v, -h]``."""
    c = 2 * params.g / np.pi
    return max(1.0, 1.0 / np.sqrt(c))


@check("perturbation_bound", "perturbation-bound")
def check_perturbation_bound(ctx: Context) -> Outcome:
    from .coupling import heave_kernel

    coarse = build_surface_grid(ctx.settings.L, ctx.settings.n // 2)
    a = perturbation_norm(coarse, ctx.params, heave_kernel(coarse))
    b = perturbation_norm(ctx.grid, ctx.params, ctx.kernel)
    proof = float(np.sqrt(2.0 / 3.0) * ctx.params.g)
    return Outcome(abs(a - b) / b, details={"coarse": a, "fine": b, "g_sigma_norm_limit": proof})


def _random_state(rng, grid):
    from .coupling import SystemState

    return SystemState(SurfaceFunction(grid, rng.standard_normal(grid.size)), float(rng.standard_normal()),
                       SurfaceFunction(grid, rng.standard_normal(grid.size)), float(rng.standard_normal()))


@check("skew_adjointness", "skew-adjointness")
def check_skew_adjointness(ctx: Context) -> Outcome:
    from .coupling import apply_A, apply_Q, x_inner

    rng = ctx.rng("skew_adjointness")
    p, op = ctx.params, ctx.op
    c = 1 + 2 * p.g / np.pi

    def a_tilde(z):
        return apply_A(z, p, op) + apply_Q(z)

    def nrm(z):
        return np.sqrt(x_inner(z, z, p, op, h_weight=c))

    worst = 0.0
    for _ in range(ctx.settings.skew_samples):
        z1, z2 = _random_state(rng, ctx.grid), _random_state(rng, ctx.grid)
        a1, a2 = a_tilde(z1), a_tilde(z2)
        defect = abs(x_inner(a1, z2, p, op, h_weight=c) + x_inner(z1, a2, p, op, h_weight=c))
        worst = max(worst, defect / (nrm(a1) * nrm(z2) + nrm(z1) * nrm(a2)))
    return Outcome(float(worst))


def _small_op(ctx: Context, L: float = 20.0, n: int = 128):
    from .omega import assemble_dtn

    grid = build_surface_grid(L, n)
    return grid, assemble_dtn(grid, g=ctx.settings.g)


@check("midpoint_conservation", "midpoint-conservation")
def check_midpoint_conservation(ctx: Context) -> Outcome:
    from .coupling import Stepper, system_matrix, x_inner, SystemState

    p, op, grid = ctx.params, ctx.op, ctx.grid
    c = 1 + 2 * p.g / np.pi
    rng = ctx.rng("midpoint_conservation")
    mat = system_matrix(grid, p, op, coupling=False, shift=True)
    stepper = Stepper(mat, 0.01)
    x = grid.nodes
    z = SystemState(SurfaceFunction(grid, _flat_profile(grid)), 0.3,
                    SurfaceFunction(grid, 0.5 * np.exp(-((np.abs(x) - 2) ** 2))), -0.1).to_vector()
    z = z + 1e-3 * rng.standard_normal(z.size)
    worst = 0.0
    e0 = x_inner(*(SystemState.from_vector(grid, z),) * 2, p, op, h_weight=c)
    for _ in range(10):
        z = stepper.advance(z, 0.0)
        e1 = x_inner(*(SystemState.from_vector(grid, z),) * 2, p, op, h_weight=c)
        worst = max(worst, abs(e1 - e0) / e0)
        e0 = e1
    return Outcome(worst)


def _wave_energy(state, p, op):
    w = state.grid.weights
    lv = op.symmetrized @ state.v.values
    return float(0.5 * w @ state.u.values**2 + 0.5 * p.g * w @ (lv * state.v.values) + 0.5 * state.ell**2
                 + p.g / np.pi * state.h**2)


def _pulse_state(grid, amplitude=0.1, width=1.0, h0=0.05):
    from .coupling import SystemState

    v0 = SurfaceFunction(grid, amplitude * _flat_profile(grid, width=width))
    return SystemState(v0, h0, grid.zeros(), 0.0)


@check("wave_energy_conservation", "wave-energy-conservation")
def check_wave_energy(ctx: Context) -> Outcome:
    from .coupling import integrate

    grid, op = _small_op(ctx)
    z0 = _pulse_state(grid)
    traj = integrate(z0, ctx.params, op, dt=0.01, t_end=2.0, coupling=False, stride=200)
    e0 = _wave_energy(z0, ctx.params, op)
    e1 = _wave_energy(traj.final, ctx.params, op)
    return Outcome(abs(e1 - e0) / e0, details={"steps": traj.manifest["steps"]})


@check("coupled_energy_conservation", "coupled-energy-conservation")
def check_coupled_energy(ctx: Context) -> Outcome:
    from .coupling import coupled_energy, heave_kernel, integrate

    grid, op = _small_op(ctx)
    z0 = _pulse_state(grid)
    traj = integrate(z0, ctx.params, op, dt=0.01, t_end=2.0, kernel=heave_kernel(grid), stride=200)
    e0 = coupled_energy(z0, ctx.params, op)
    e1 = coupled_energy(traj.final, ctx.params, op)
    return Outcome(abs(e1 - e0) / e0)


@check("decoupled_oscillator", "decoupled-oscillator")
def check_oscillator(ctx: Context) -> Outcome:
    from .coupling import SystemState, integrate

    grid, op = _small_op(ctx, 10.0, 64)
    period = 2 * np.pi / np.sqrt(2 * ctx.params.g / np.pi)
    z0 = SystemState(grid.zeros(), 1.0, grid.zeros(), 0.0)
    traj = integrate(z0, ctx.params, op, dt=period / 1000, t_end=period, coupling=False, stride=1000)
    final = traj.final
    waves = max(np.max(np.abs(final.v.values)), np.max(np.abs(final.u.values)))
    return Outcome(abs(final.h - 1.0), details={"wave_blocks_max": float(waves)})


@check("time_order", "time-order")
def check_time_order(ctx: Context) -> Outcome:
    from .coupling import heave_kernel, integrate

    grid, op = _small_op(ctx, 20.0, 128)
    kernel = heave_kernel(grid)
    z0 = _pulse_state(grid)
    dt0, t_end = 0.02, 2.0
    final = {}
    for k in (1, 2, 16):
        final[k] = integrate(z0, ctx.params, op, dt=dt0 / k, t_end=t_end, kernel=kernel, stride=10**9).final
    ref = final[16].to_vector()
    e1 = np.linalg.norm(final[1].to_vector() - ref)
    e2 = np.linalg.norm(final[2].to_vector() - ref)
    return Outcome(float(np.log2(e1 / e2)), details={"errors": [float(e1), float(e2)]})


def self_convergence(levels, L: float, params, t_end: float = 5.0, sample: float = 0.2):
    """Run the coupled pulse at successive ``(n, dt)`` levels and return observed orders.

    Orders come from the max-in-time differences of ``h`` and of the ``X``
    energy between consecutive levels, sampled every ``sample`` seconds.
    """
    from .coupling import heave_kernel, integrate
    from .omega import assemble_dtn

    runs = []
    for n, dt in levels:
        grid = build_surface_grid(L, n)
        op = assemble_dtn(grid, g=params.g)
        z0 = _pulse_state(grid, width=2.0)
        traj = integrate(z0, params, op, dt=dt, t_end=t_end, kernel=heave_kernel(grid),
                         stride=int(round(sample / dt)))
        runs.append(traj)
    dh = [float(np.max(np.abs(a.h - b.h))) for a, b in zip(runs, runs[1:])]
    de = [float(np.max(np.abs(a.energy - b.energy))) for a, b in zip(runs, runs[1:])]
    return {
        "h_order": float(np.log2(dh[-2] / dh[-1])),
        "energy_order": float(np.log2(de[-2] / de[-1])),
        "h_differences": dh,
        "energy_differences": de,
        "runs": runs,
    }


@check("coupled_self_convergence", "coupled-self-convergence")
def check_self_convergence(ctx: Context) -> Outcome:
    s = ctx.settings
    res = self_convergence(s.conv_levels, s.conv_L, ctx.params)
    orders = (res["h_order"], res["energy_order"])
    band = tolerance_for("coupled-self-convergence", ctx.level)
    worst = min(orders, key=lambda p: -abs(p - 2.0))
    return Outcome(worst, passed=all(band[0] <= p <= band[1] for p in orders),
                   details={k: v for k, v in res.items() if k != "runs"})


def growth_rate(traj) -> float:
    """``max_t log(|z(t)| / |z(0)|) / t`` from the recorded ``X`` energies."""
    t = traj.t[1:] - traj.t[0]
    return float(np.max(0.5 * np.log(traj.energy[1:] / traj.energy[0]) / t))


@check("growth_bound", "growth-bound")
def check_growth_bound(ctx: Context) -> Outcome:
    from .coupling import heave_kernel, integrate

    grid, op = _small_op(ctx, 40.0, 256)
    kernel = heave_kernel(grid)
    traj = integrate(_pulse_state(grid, width=2.0), ctx.params, op, dt=0.02, t_end=10.0, kernel=kernel, stride=5)
    omega = growth_rate(traj)
    bound = shift_norm(ctx.params) + perturbation_norm(grid, ctx.params, kernel)
    return Outcome(omega - bound, details={"omega": omega, "bound": bound})


@check("flow_linearity", "flow-linearity")
def check_linearity(ctx: Context) -> Outcome:
    from .coupling import heave_kernel, integrate

    grid, op = _small_op(ctx)
    kernel = heave_kernel(grid)
    z0 = _pulse_state(grid)
    alpha = -2.5
    a = integrate(z0, ctx.params, op, dt=0.01, t_end=1.0, kernel=kernel, stride=100).final.to_vector()
    b = integrate(z0 * alpha, ctx.params, op, dt=0.01, t_end=1.0, kernel=kernel, stride=100).final.to_vector()
    return Outcome(float(np.linalg.norm(b - alpha * a) / np.linalg.norm(alpha * a)))


@check("data_continuity", "data-continuity")
def check_continuity(ctx: Context) -> Outcome:
    from .coupling import SystemState, energy, heave_kernel, integrate

    grid, op = _small_op(ctx)
    kernel = heave_kernel(grid)
    rng = ctx.rng("data_continuity")
    z0 = _pulse_state(grid)
    delta = SystemState(SurfaceFunction(grid, 1e-3 * _flat_profile(grid, width=1.5)), 1e-3 * rng.standard_normal(),
                        grid.zeros(), 0.0)
    times = (0.5, 1.0, 1.5, 2.0)
    a = integrate(z0, ctx.params, op, dt=0.01, t_end=2.0, kernel=kernel, stride=50, snapshot_times=times)
    b = integrate(z0 + delta, ctx.params, op, dt=0.01, t_end=2.0, kernel=kernel, stride=50, snapshot_times=times)
    d0 = np.sqrt(energy(delta, ctx.params, op))
    omega = shift_norm(ctx.params) + perturbation_norm(grid, ctx.params, kernel)
    excess = -np.inf
    ratios = []
    for t, sa, sb in zip(times, a.snapshots, b.snapshots):
        ratio = np.sqrt(energy(sb + sa * -1.0, ctx.params, op)) / d0
        ratios.append(float(ratio))
        excess = max(excess, ratio - np.exp(omega * t))
    return Outcome(float(excess), details={"ratios": ratios, "omega_bound": omega})


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def run_check(check_id: str, ctx: Context) -> CheckReport:
    """Run one check; exceptions from the numerics become failed reports."""
    anchor, func = CHECKS[check_id]
    tol = tolerance_for(anchor, ctx.level)
    started = time.perf_counter()
    try:
        out = func(ctx)
        passed = _verdict(out.measured, tol) if out.passed is None else bool(out.passed)
        measured, details, skipped = float(out.measured), out.details, None
    except (ArithmeticError, InvalidParameterError, RuntimeError, np.linalg.LinAlgError) as exc:
        measured, passed, details, skipped = None, False, {"error": f"{type(exc).__name__}: {exc}"}, None
    return CheckReport(check_id, anchor, measured, tol, passed, time.perf_counter() - started,
                       ctx.settings.fingerprint(), ctx.level, ctx.settings.seed, details, skipped)


def run_suite(level: str = "quick", config=None, *, only=None, stream=None) -> list[CheckReport]:
    """Run every registered check (or those in ``only``) and return the reports.

    ``config`` (a :class:`~floatheave.config.SimConfig`) overrides the grid,
    gravity and seed of the level.  With ``stream`` each report is written as
    one JSON line as soon as it finishes.
    """
    settings = LEVELS[level] if level in LEVELS else None
    if settings is None:
        raise InvalidParameterError(f"unknown level {level!r}")
    if config is not None:
        from dataclasses import replace

        settings = replace(settings, L=config.L, n=config.n, M=max(config.line_M, settings.M),
                           line_size=config.line_size, g=config.g, seed=config.seed)
    ctx = Context(level, settings)
    wanted = set(only) if only else None
    reports = []
    for check_id in CHECKS:
        if wanted is not None and check_id not in wanted:
            anchor = CHECKS[check_id][0]
            rep = CheckReport(check_id, anchor, None, tolerance_for(anchor, level), True, 0.0,
                              settings.fingerprint(), level, settings.seed, skipped="not selected")
        else:
            rep = run_check(check_id, ctx)
        reports.append(rep)
        if stream is not None:
            stream.write(rep.to_json() + "\n")
            stream.flush()
    return reports


def summary_table(reports) -> str:
    """Fixed-width table with one row per check."""
    rows = [f"{'check':<30} {'measured':>12} {'tolerance':>16} {'time[s]':>8}  result"]
    for r in reports:
        if r.skipped:
            status = f"SKIP ({r.skipped})"
        else:
            status = "PASS" if r.passed else "FAIL"
        meas = "-" if r.measured is None else f"{r.measured:.3e}"
        tol = f"[{r.tolerance[0]}, {r.tolerance[1]}]" if isinstance(r.tolerance, tuple) else f"{r.tolerance:.1e}"
        rows.append(f"{r.check_id:<30} {meas:>12} {tol:>16} {r.runtime:8.2f}  {status}")
    failed = sum(1 for r in reports if not r.passed and not r.skipped)
    rows.append(f"{len(reports)} checks, {failed} failed")
    return "\n".join(rows)


if __name__ == "__main__":  # pragma: no cover
    reps = run_suite(sys.argv[1] if len(sys.argv) > 1 else "quick", stream=sys.stdout)
    print(summary_table(reps))
