"""Acceptance criteria at production settings (L=50, n=2048, M=100, 2^14 line nodes).

Each criterion maps onto one or more verification checks and prints a single
``criterion N: PASS|FAIL`` line.  Run with ``pytest tests/test_acceptance.py -s``
to see the lines.
"""

import pytest

from floatheave.verify import Context, run_check

CRITERIA = {
    1: ("Hilbert transform routes and closed form", ["hilbert_routes", "hilbert_closed_form"]),
    2: ("half-plane multiplier routes and closed form", ["multiplier_routes", "multiplier_closed_form"]),
    3: ("Poisson semigroup at random points", ["poisson_semigroup"]),
    4: ("trace limit of the normal derivative", ["trace_limit"]),
    5: ("half-plane energy identity", ["halfplane_energy"]),
    6: ("gradient bound for the half-plane extension", ["gradient_bound"]),
    7: ("harmonic extension on the exterior domain", ["dirichlet_trace", "cylinder_neumann", "interior_harmonicity"]),
    8: ("exterior DtN route agreement and mutation detection", ["dtn_routes", "dtn_mutation"]),
    9: ("DtN matrix symmetry and positivity", ["dtn_symmetry", "dtn_positivity"]),
    10: ("exterior energy identity", ["omega_energy"]),
    11: ("Robin resolvent bound and manufactured solution", ["resolvent_bound", "resolvent_manufactured"]),
    12: ("sigma norm and heave kernel properties",
         ["sigma_norm", "kernel_positive_even", "kernel_log_bound", "kernel_far_field"]),
    13: ("skew-adjointness and midpoint conservation", ["skew_adjointness", "midpoint_conservation"]),
    14: ("decoupled heave oscillator", ["decoupled_oscillator"]),
    15: ("coupled self-convergence and growth bound", ["coupled_self_convergence", "growth_bound"]),
}


@pytest.fixture(scope="module")
def ctx():
    return Context("full")


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(ctx, number):
    title, check_ids = CRITERIA[number]
    reports = [run_check(cid, ctx) for cid in check_ids]
    passed = all(r.passed for r in reports)
    parts = "; ".join(
        f"{r.check_id}={'error' if r.measured is None else f'{r.measured:.3e}'} (tol {r.tolerance})"
        for r in reports
    )
    print(f"\ncriterion {number}: {'PASS' if passed else 'FAIL'} {title}: {parts}")
    failed = {r.check_id: r.details for r in reports if not r.passed}
    assert passed, failed
