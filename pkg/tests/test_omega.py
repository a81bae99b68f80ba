import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from conftest import flat_bump
from floatheave.grids import InvalidParameterError, SurfaceFunction, build_line_grid, build_surface_grid, norm
from floatheave.halfplane import dirichlet_extend_H
from floatheave.grids import reflect_extend
from floatheave.omega import (
    FactorizationError,
    _log_moment,
    assemble_dtn,
    dirichlet_energy,
    dirichlet_extend_omega,
    energy_form_matrix,
    lambda_omega_direct,
    lambda_omega_reflect,
    phi1,
    resolvent_norm,
    resolvent_solve,
    sqrt_norm,
)
from floatheave.verify import harmonic_residual, neumann_residual


def wrel(a, b, w):
    return np.sqrt(np.sum(w * (a - b) ** 2) / np.sum(w * b * b))


# -- cylinder potential ------------------------------------------------------------------


def test_phi1_values_and_gradient():
    val, grad = phi1([[0.0, 2.0], [1.0, 1.0]])
    np.testing.assert_allclose(val, [-0.5, -0.5])
    np.testing.assert_allclose(grad, [[0.0, 0.25], [0.5, 0.0]])


def test_phi1_vanishes_on_surface():
    val, _ = phi1(np.column_stack([np.linspace(1, 10, 7), np.zeros(7)]))
    assert np.all(val == 0)


def test_phi1_radial_derivative_is_cos():
    field = lambda x, y: phi1(np.column_stack([x, y]))[0]
    assert neumann_residual(field, np.linspace(-1.5, 1.5, 31), target=np.cos) < 1e-6


def test_phi1_rejects_origin():
    with pytest.raises(InvalidParameterError):
        phi1([[0.0, 0.0]])


def test_harmonic_residual_of_quadratic_is_two():
    assert harmonic_residual(lambda x, y: x * x, (1.5, 2.5, 1.0, 2.0), 0.1) == pytest.approx(2.0, rel=1e-12)


def test_harmonic_residual_rejects_stencil_outside():
    with pytest.raises(InvalidParameterError):
        harmonic_residual(lambda x, y: x, (0.0, 0.5, 0.5, 0.9), 0.1)


def test_neumann_probe_on_exact_field():
    assert neumann_residual(lambda x, y: x + x / (x * x + y * y), np.linspace(-1.5, 1.5, 31)) < 1e-8


# -- harmonic extension --------------------------------------------------------------------


@pytest.fixture(scope="module")
def bump(mid_grid):
    return SurfaceFunction(mid_grid, flat_bump(mid_grid.nodes, skew=0.3))


def test_extension_trace_exact(bump):
    g = bump.grid
    pts = np.column_stack([g.nodes, np.zeros(g.size)])
    np.testing.assert_array_equal(dirichlet_extend_omega(bump, pts), bump.values)


def test_extension_neumann_on_cylinder(bump):
    field = lambda x, y: dirichlet_extend_omega(bump, np.column_stack([x, y]))
    assert neumann_residual(field, np.linspace(-1.4, 1.4, 21)) < 1e-3 * norm(bump, "W12")


def test_extension_is_harmonic_second_order(bump):
    field = lambda x, y: dirichlet_extend_omega(bump, np.column_stack([x, y]))
    box = (-1.0, 1.0, 1.5, 2.5)
    ratio = harmonic_residual(field, box, 0.1) / harmonic_residual(field, box, 0.05)
    assert 3.5 <= ratio <= 4.5


def test_extension_gradient_matches_differences(bump):
    p = np.array([[1.7, 0.6], [-0.4, 1.5]])
    d = 1e-6
    _, grad = dirichlet_extend_omega(bump, p, gradient=True)
    fx = (dirichlet_extend_omega(bump, p + [d, 0]) - dirichlet_extend_omega(bump, p - [d, 0])) / (2 * d)
    fy = (dirichlet_extend_omega(bump, p + [0, d]) - dirichlet_extend_omega(bump, p - [0, d])) / (2 * d)
    np.testing.assert_allclose(grad[:, 0], fx, rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(grad[:, 1], fy, rtol=1e-6, atol=1e-9)


def test_extension_against_quadrature():
    x0, y0, L = 1.3, 0.9, 50.0
    kern = lambda t: y0 / (np.pi * ((x0 - t) ** 2 + y0**2))
    ref = (quad(lambda t: kern(t) / (1 + t * t), 1, L, limit=500)[0]
           + quad(lambda t: kern(t) / (1 + t * t), -L, -1, limit=500)[0]
           + quad(lambda t: kern(t) * t * t / (1 + t * t), -1, 1, points=[0], limit=500)[0])
    g = build_surface_grid(L, 2048)
    got = dirichlet_extend_omega(g.sample(lambda x: 1 / (1 + x * x)), [[x0, y0]])[0]
    assert got == pytest.approx(ref, rel=1e-5)


def test_extension_matches_reflected_halfplane():
    g = build_surface_grid(50.0, 2048)
    v = g.sample(lambda x: 1 / (1 + x * x))
    p = np.array([[1.3, 0.9], [-2.0, 1.5]])
    line = build_line_grid(100.0, 2**15)
    np.testing.assert_allclose(dirichlet_extend_omega(v, p), dirichlet_extend_H(reflect_extend(v, line), p),
                               rtol=1e-5)


def test_extension_rejects_points_in_disk(bump):
    with pytest.raises(InvalidParameterError):
        dirichlet_extend_omega(bump, [[0.1, 0.5]])


def test_extension_even_data_gives_even_field(mid_grid):
    v = SurfaceFunction(mid_grid, flat_bump(mid_grid.nodes, width=1.5))
    p = np.array([[1.2, 0.7], [3.0, 2.0]])
    np.testing.assert_allclose(dirichlet_extend_omega(v, p), dirichlet_extend_omega(v, p * [-1, 1]), rtol=1e-12)


# -- DtN routes -------------------------------------------------------------------------------


def test_direct_and_reflect_routes_converge():
    errs = []
    for n in (256, 512):
        g = build_surface_grid(30.0, n)
        v = SurfaceFunction(g, flat_bump(g.nodes, width=1.3, skew=0.3))
        errs.append(wrel(lambda_omega_direct(v).values, lambda_omega_reflect(v).values, g.weights))
    assert errs[1] < errs[0] < 1e-2


def test_endpoint_mutation_is_detected(bump):
    good = lambda_omega_direct(bump).values
    bad = lambda_omega_direct(bump, endpoint_sign=-1.0).values
    ref = lambda_omega_reflect(bump).values
    w = bump.grid.weights
    assert wrel(bad, ref, w) > 100 * wrel(good, ref, w)


def test_direct_diagnostics_sum(bump):
    out, parts = lambda_omega_direct(bump, diagnostics=True)
    np.testing.assert_allclose(parts["h1"] + parts["h2"] + parts["endpoint"], out.values)
    # symmetric-in-sign data has no endpoint term
    even = SurfaceFunction(bump.grid, flat_bump(bump.grid.nodes))
    assert np.all(lambda_omega_direct(even, diagnostics=True)[1]["endpoint"] == 0)


@settings(max_examples=10, deadline=None)
@given(a=st.floats(-4, 4), b=st.floats(-4, 4))
def test_direct_route_linear(a, b):
    g = build_surface_grid(10.0, 64)
    u = SurfaceFunction(g, flat_bump(g.nodes))
    z = SurfaceFunction(g, flat_bump(g.nodes, center=2.0, skew=0.5))
    lhs = lambda_omega_direct(u * a + z * b).values
    rhs = a * lambda_omega_direct(u).values + b * lambda_omega_direct(z).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-11 * (1 + abs(a) + abs(b)))


# -- assembled operator -------------------------------------------------------------------------


def test_log_moment_frozen_values():
    assert _log_moment(np.array([0.0]))[0] == pytest.approx(-1.5, abs=1e-14)
    # both branches agree where they meet
    lo, hi = _log_moment(np.array([3.0 - 1e-9, 3.0 + 1e-9]))
    assert lo == pytest.approx(hi, abs=1e-8)
    # far offsets behave like log m
    assert _log_moment(np.array([1e4]))[0] == pytest.approx(np.log(1e4), abs=1e-8)


def test_variational_operator_is_selfadjoint_and_positive(small_op):
    g = small_op.grid
    wa = g.weights[:, None] * small_op.matrix
    np.testing.assert_allclose(wa, wa.T, atol=1e-14 * np.abs(wa).max())
    assert small_op.relative_defect < 1e-12
    assert small_op.eigvals.min() > 0
    assert small_op.min_eigenvalue >= 1.0


def test_energy_form_matrix_psd(small_grid):
    G = energy_form_matrix(small_grid)
    np.testing.assert_allclose(G, G.T, atol=1e-15)
    assert np.linalg.eigvalsh(G).min() > 0


def test_operator_commutes_with_reflection(small_op):
    g = small_op.grid
    f = flat_bump(g.nodes, skew=0.4)
    np.testing.assert_allclose(small_op.matrix @ f[g.mirror], (small_op.matrix @ f)[g.mirror], atol=1e-13)


def test_variational_agrees_with_direct_energy(mid_grid):
    op = assemble_dtn(mid_grid)
    v = SurfaceFunction(mid_grid, flat_bump(mid_grid.nodes, skew=0.3))
    w = mid_grid.weights
    a = w @ (op.matrix @ v.values * v.values)
    b = w @ (lambda_omega_direct(v).values * v.values)
    assert a == pytest.approx(b, rel=5e-3)


@pytest.mark.parametrize("route", ["reflect", "direct"])
def test_collocation_routes_refused_when_asymmetric(small_grid, route):
    op = assemble_dtn(small_grid, route, max_defect=1e-6)
    assert not op.factorized
    assert "refusal" in op.info
    assert op.relative_defect > 1e-6
    with pytest.raises(FactorizationError):
        op.min_eigenvalue


def test_assemble_rejects_unknown_route(small_grid):
    with pytest.raises(InvalidParameterError):
        assemble_dtn(small_grid, "galerkin")


def test_resolvent_manufactured(small_op):
    g = small_op.grid
    v = flat_bump(g.nodes, width=1.3)
    f = SurfaceFunction(g, v + 9.81 * (small_op.symmetrized @ v))
    np.testing.assert_allclose(resolvent_solve(f, 9.81, small_op).values, v, atol=1e-12)


def test_resolvent_norm_below_one(small_op):
    assert resolvent_norm(small_op, 1.0) <= 1.0 + 1e-6


def test_sqrt_norm_is_energy(small_op):
    g = small_op.grid
    v = SurfaceFunction(g, flat_bump(g.nodes, skew=0.2))
    quad_form = g.weights @ (v.values * (v.values + 9.81 * small_op.symmetrized @ v.values))
    assert sqrt_norm(v, 9.81, small_op) ** 2 == pytest.approx(quad_form, rel=1e-12)


def test_grid_mismatch_rejected(small_op):
    other = build_surface_grid(10.0, 32)
    with pytest.raises(InvalidParameterError):
        sqrt_norm(other.zeros(), 1.0, small_op)


def test_dirichlet_energy_matches_form(mid_grid):
    op = assemble_dtn(mid_grid)
    w = mid_grid.weights
    v = SurfaceFunction(mid_grid, flat_bump(mid_grid.nodes))
    odd = SurfaceFunction(mid_grid, flat_bump(mid_grid.nodes) * np.sign(mid_grid.nodes))
    e = dirichlet_energy(v, v, 30.0)
    assert e == pytest.approx(w @ (op.matrix @ v.values * v.values), rel=0.02)
    assert abs(dirichlet_energy(v, odd, 30.0)) < 1e-6


@pytest.mark.parametrize("fmt", ["npy", "csv"])
def test_dump_round_trip(small_op, tmp_path, fmt):
    target = small_op.dump(tmp_path / "dtn", fmt=fmt)
    back = np.load(target) if fmt == "npy" else np.loadtxt(target, delimiter=",")
    np.testing.assert_array_equal(back, small_op.matrix)
    header = json.loads((tmp_path / "dtn.json").read_text())
    assert header["shape"] == list(small_op.matrix.shape)
    assert header["route"] == "variational"
