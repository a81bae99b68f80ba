import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import flat_bump
from floatheave.coupling import (
    DivergenceError,
    Forcing,
    PhysicsParams,
    SolverError,
    Stepper,
    SystemState,
    added_force,
    apply_A,
    apply_P,
    apply_Q,
    coupled_energy,
    energy,
    heave_kernel,
    integrate,
    sigma,
    step,
    system_matrix,
    x_inner,
)
from floatheave.grids import InvalidParameterError, SurfaceFunction, build_surface_grid, norm
from floatheave.omega import assemble_dtn

P = PhysicsParams()


@pytest.fixture(scope="module")
def kernel(small_grid):
    return heave_kernel(small_grid)


def pulse(grid, h0=0.05):
    return SystemState(SurfaceFunction(grid, 0.1 * flat_bump(grid.nodes, width=2.0)), h0, grid.zeros(), 0.0)


def states(grid, seed):
    rng = np.random.default_rng(seed)
    return SystemState(SurfaceFunction(grid, rng.standard_normal(grid.size)), rng.standard_normal(),
                       SurfaceFunction(grid, rng.standard_normal(grid.size)), rng.standard_normal())


# -- data types ----------------------------------------------------------------------------


def test_params_validate():
    with pytest.raises(InvalidParameterError):
        PhysicsParams(g=-1.0)


def test_state_vector_round_trip(small_grid):
    z = states(small_grid, 0)
    back = SystemState.from_vector(small_grid, z.to_vector())
    np.testing.assert_array_equal(back.to_vector(), z.to_vector())


@pytest.mark.parametrize("index, block", [(0, "v"), (256, "h"), (300, "u"), (-1, "ell")])
def test_divergence_names_block(small_grid, index, block):
    z = np.zeros(2 * small_grid.size + 2)
    z[index] = np.nan
    with pytest.raises(DivergenceError, match=block):
        SystemState.from_vector(small_grid, z)


@pytest.mark.parametrize("kind, params, t, expected", [
    ("zero", {}, 1.0, 0.0),
    ("constant", {"value": 3.0}, 7.0, 3.0),
    ("sinusoid", {"amplitude": 2.0, "omega": np.pi, "phase": 0.0}, 0.5, 2.0),
    ("pulse", {"amplitude": 1.0, "t0": 1.0, "width": 0.5}, 1.0, 1.0),
    ("table", {"times": [0.0, 2.0], "values": [0.0, 4.0]}, 0.5, 1.0),
])
def test_forcing_values(kind, params, t, expected):
    assert Forcing(kind, params)(t) == pytest.approx(expected)


@pytest.mark.parametrize("kind, params", [
    ("wind", {}),
    ("constant", {"amplitude": 1.0}),
    ("table", {"times": [0.0], "values": [1.0]}),
    ("table", {"times": [1.0, 0.0], "values": [1.0, 2.0]}),
    ("pulse", {"width": 0.0}),
])
def test_forcing_rejects(kind, params):
    with pytest.raises(InvalidParameterError):
        Forcing(kind, params)


def test_forcing_table_coverage():
    f = Forcing("table", {"times": [0.0, 5.0], "values": [0.0, 1.0]})
    assert f.covers(5.0) and not f.covers(10.0)
    with pytest.raises(InvalidParameterError):
        f(6.0)


# -- kernel and added force ---------------------------------------------------------------------


def test_kernel_closed_form(kernel):
    x = kernel.grid.nodes
    np.testing.assert_allclose(kernel.K, np.pi / (2 * x * x), rtol=1e-10)


def test_kernel_positive_even_and_bounded(kernel):
    g = kernel.grid
    assert np.all(kernel.K > 0)
    np.testing.assert_array_equal(kernel.K, kernel.K[g.mirror])
    x = g.nodes[g.nodes > 1]
    bound = np.log(x + 1) / x - np.log(x * x + 1) / (2 * x)
    assert np.all(kernel.I1[g.nodes > 1] <= bound)


def test_sigma_norm_two_thirds():
    g = build_surface_grid(200.0, 16384)
    assert norm(sigma(g), rule="gregory") ** 2 == pytest.approx(2 / 3, abs=1e-6)


def test_added_force_routes_agree():
    g = build_surface_grid(50.0, 2048)
    u = SurfaceFunction(g, np.exp(-(np.abs(g.nodes) - 1)))
    a = added_force(u)
    assert added_force(u, "field") == pytest.approx(a, rel=1e-3)
    # the kernel route equals <sigma, u> / pi
    assert a == pytest.approx(g.inner(sigma(g), u) / np.pi, rel=1e-9)


def test_added_force_odd_and_zero(small_grid, kernel):
    odd = SurfaceFunction(small_grid, flat_bump(small_grid.nodes) * np.sign(small_grid.nodes))
    assert abs(added_force(odd, kernel=kernel)) < 1e-10
    assert added_force(small_grid.zeros(), kernel=kernel) == 0.0


def test_added_force_grid_mismatch(kernel):
    with pytest.raises(InvalidParameterError):
        added_force(build_surface_grid(5.0, 16).zeros(), kernel=kernel)


# -- operators -----------------------------------------------------------------------------------


def test_apply_A_examples(small_grid, small_op):
    z = SystemState(small_grid.zeros(), 1.0, small_grid.zeros(), 0.0)
    out = apply_A(z, P, small_op)
    assert out.ell == pytest.approx(-2 * P.g / np.pi) and out.h == 0.0
    v = SurfaceFunction(small_grid, flat_bump(small_grid.nodes))
    out = apply_A(SystemState(v, 0.0, small_grid.zeros(), 0.0), P, small_op)
    np.testing.assert_allclose(out.u.values, -P.g * small_op.symmetrized @ v.values)


def test_apply_P_examples(small_grid, kernel):
    z = SystemState(small_grid.zeros(), 0.0, small_grid.zeros(), 1.0)
    np.testing.assert_allclose(apply_P(z, P, kernel).u.values, -P.g / small_grid.nodes**2)
    assert not apply_P(SystemState.zeros(small_grid), P, kernel).to_vector().any()


def test_energy_unit_heave():
    g = build_surface_grid(5.0, 16)
    op = assemble_dtn(g, g=np.pi / 2)
    z = SystemState(g.zeros(), 1.0, g.zeros(), 0.0)
    assert energy(z, PhysicsParams(g=np.pi / 2), op) == pytest.approx(1.0)
    assert energy(SystemState.zeros(g), P, op) == 0.0


def test_system_matrix_matches_operators(small_grid, small_op, kernel):
    z = states(small_grid, 3)
    mat = system_matrix(small_grid, P, small_op, kernel)
    expected = (apply_A(z, P, small_op) + apply_P(z, P, kernel)).to_vector()
    np.testing.assert_allclose(mat @ z.to_vector(), expected, rtol=1e-12, atol=1e-12)
    shifted = system_matrix(small_grid, P, small_op, kernel, coupling=False, shift=True)
    expected = (apply_A(z, P, small_op) + apply_Q(z)).to_vector()
    np.testing.assert_allclose(shifted @ z.to_vector(), expected, rtol=1e-12, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_shifted_generator_skew_adjoint(small_grid, small_op, seed):
    c = 1 + 2 * P.g / np.pi
    z1, z2 = states(small_grid, seed), states(small_grid, seed + 1)
    a1 = apply_A(z1, P, small_op) + apply_Q(z1)
    a2 = apply_A(z2, P, small_op) + apply_Q(z2)
    lhs = x_inner(a1, z2, P, small_op, h_weight=c) + x_inner(z1, a2, P, small_op, h_weight=c)
    scale = abs(x_inner(a1, z2, P, small_op, h_weight=c)) + 1.0
    assert abs(lhs) <= 1e-10 * scale


# -- time stepping --------------------------------------------------------------------------------


def test_zero_state_stays_zero(small_grid, small_op, kernel):
    traj = integrate(SystemState.zeros(small_grid), P, small_op, dt=0.05, t_end=1.0, kernel=kernel)
    assert np.all(traj.columns()[:, 1:] == 0)
    assert np.all(traj.final.to_vector() == 0)


def test_decoupled_oscillator_period(small_grid, small_op):
    period = 2 * np.pi / np.sqrt(2 * P.g / np.pi)
    z0 = SystemState(small_grid.zeros(), 1.0, small_grid.zeros(), 0.0)
    traj = integrate(z0, P, small_op, dt=period / 1000, t_end=period, coupling=False, stride=1000)
    assert abs(traj.final.h - 1.0) < 1e-6


def test_constant_force_static_offset(small_grid, small_op):
    f = 500.0
    omega = np.sqrt(2 * P.g / np.pi)
    h_star = np.pi * f / (2 * P.g * P.rho)
    t_end = 3.0
    traj = integrate(SystemState.zeros(small_grid), P, small_op, dt=1e-3, t_end=t_end, coupling=False,
                     forcing=Forcing("constant", {"value": f}), stride=3000)
    assert traj.final.h == pytest.approx(h_star * (1 - np.cos(omega * t_end)), abs=1e-6)


@pytest.mark.parametrize("scheme", ["implicit-midpoint", "rk4"])
def test_schemes_agree(small_grid, small_op, kernel, scheme):
    ref = integrate(pulse(small_grid), P, small_op, dt=0.001, t_end=0.5, kernel=kernel, stride=500).final
    got = integrate(pulse(small_grid), P, small_op, dt=0.005, t_end=0.5, kernel=kernel, scheme=scheme,
                    stride=100).final
    assert got.h == pytest.approx(ref.h, abs=1e-5)


def test_coupled_energy_conserved(small_grid, small_op, kernel):
    z0 = pulse(small_grid)
    traj = integrate(z0, P, small_op, dt=0.01, t_end=2.0, kernel=kernel, stride=200)
    assert coupled_energy(traj.final, P, small_op) == pytest.approx(coupled_energy(z0, P, small_op), rel=1e-9)


def test_shifted_flow_conserves_shifted_norm(small_grid, small_op):
    c = 1 + 2 * P.g / np.pi
    stepper = Stepper(system_matrix(small_grid, P, small_op, coupling=False, shift=True), 0.01)
    z = states(small_grid, 7)
    e0 = x_inner(z, z, P, small_op, h_weight=c)
    z1 = SystemState.from_vector(small_grid, stepper.advance(z.to_vector(), 0.0))
    assert x_inner(z1, z1, P, small_op, h_weight=c) == pytest.approx(e0, rel=1e-12)


def test_step_is_deterministic(small_grid, small_op, kernel):
    z0 = pulse(small_grid)
    a = step(z0, 0.01, "implicit-midpoint", P, small_op, kernel)
    b = step(z0, 0.01, "implicit-midpoint", P, small_op, kernel)
    np.testing.assert_array_equal(a.to_vector(), b.to_vector())
    assert a.t == pytest.approx(0.01)


def test_flow_is_linear(small_grid, small_op, kernel):
    z0 = pulse(small_grid)
    a = integrate(z0, P, small_op, dt=0.01, t_end=1.0, kernel=kernel, stride=100).final.to_vector()
    b = integrate(z0 * 3.0, P, small_op, dt=0.01, t_end=1.0, kernel=kernel, stride=100).final.to_vector()
    np.testing.assert_allclose(b, 3 * a, rtol=1e-12, atol=1e-15)


def test_trajectory_layout(small_grid, small_op, kernel):
    traj = integrate(pulse(small_grid), P, small_op, dt=0.01, t_end=1.0, kernel=kernel, stride=10,
                     snapshot_times=(0.0, 0.5, 1.0))
    assert traj.columns().shape == (11, 6)
    np.testing.assert_allclose(traj.t, np.linspace(0, 1, 11), atol=1e-12)
    assert [round(s.t, 9) for s in traj.snapshots] == [0.0, 0.5, 1.0]
    assert traj.manifest["steps"] == 100


@pytest.mark.parametrize("kwargs", [dict(dt=-0.1, t_end=1.0), dict(dt=0.1, t_end=0.0), dict(dt=0.1, t_end=1.0,
                                                                                             stride=0)])
def test_integrate_rejects(small_grid, small_op, kwargs):
    with pytest.raises(InvalidParameterError):
        integrate(SystemState.zeros(small_grid), P, small_op, **kwargs)


def test_stepper_rejects_singular():
    with pytest.raises(SolverError):
        Stepper(np.eye(4) * 2.0, 1.0)


def test_divergence_detected():
    stepper = Stepper(np.eye(4) * 1e308, 1.0, "rk4")
    with pytest.raises(DivergenceError):
        stepper.advance(np.ones(4), 0.0)
