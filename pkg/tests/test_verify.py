import io
import json

import numpy as np
import pytest

from floatheave.grids import InvalidParameterError
from floatheave.verify import (
    CHECKS,
    LEVELS,
    TOLERANCES,
    Context,
    harmonic_residual,
    neumann_residual,
    run_check,
    run_suite,
    summary_table,
    tolerance_for,
)


@pytest.fixture(scope="module")
def quick_reports():
    stream = io.StringIO()
    reports = run_suite("quick", stream=stream)
    return reports, stream.getvalue()


def test_registry_shape():
    assert len(CHECKS) >= 20
    anchors = [a for a, _ in CHECKS.values()]
    assert len(set(anchors)) == len(anchors)
    assert set(anchors) == set(TOLERANCES)
    for anchor in anchors:
        for level in LEVELS:
            tol = tolerance_for(anchor, level)
            assert isinstance(tol, (float, tuple))


def test_quick_suite_passes(quick_reports):
    reports, _ = quick_reports
    failed = [(r.check_id, r.measured, r.details) for r in reports if not r.passed]
    assert not failed, summary_table(reports)


def test_json_lines(quick_reports):
    reports, text = quick_reports
    lines = text.strip().splitlines()
    assert len(lines) == len(reports) == len(CHECKS)
    first = json.loads(lines[0])
    for key in ("check_id", "anchor", "measured", "tolerance", "passed", "runtime", "fingerprint", "level", "seed"):
        assert key in first
    assert {json.loads(line)["fingerprint"] for line in lines} == {LEVELS["quick"].fingerprint()}


def test_summary_table(quick_reports):
    reports, _ = quick_reports
    table = summary_table(reports)
    assert table.splitlines()[-1] == f"{len(CHECKS)} checks, 0 failed"


@pytest.mark.parametrize("check_id", ["hilbert_routes", "dtn_routes", "skew_adjointness", "midpoint_conservation"])
def test_checks_deterministic(check_id):
    a = run_check(check_id, Context("quick"))
    b = run_check(check_id, Context("quick"))
    assert a.measured == b.measured


def test_only_marks_others_skipped():
    reports = run_suite("quick", only=["poisson_mass"])
    ran = [r for r in reports if not r.skipped]
    assert [r.check_id for r in ran] == ["poisson_mass"]
    assert all(r.skipped == "not selected" for r in reports if r.check_id != "poisson_mass")


def test_unknown_level():
    with pytest.raises(InvalidParameterError):
        run_suite("medium")


def test_mutation_is_detected():
    rep = run_check("dtn_mutation", Context("quick"))
    assert rep.passed
    assert rep.measured > 10 * tolerance_for("dtn-route-agreement", "quick")


def test_failing_check_is_reported(monkeypatch):
    anchor, _ = CHECKS["poisson_mass"]

    def broken(ctx):
        raise FloatingPointError("overflow")

    monkeypatch.setitem(CHECKS, "poisson_mass", (anchor, broken))
    rep = run_check("poisson_mass", Context("quick"))
    assert not rep.passed and "FloatingPointError" in rep.details["error"]


# -- residual primitives ------------------------------------------------------------------------


def test_harmonic_residual_detects_non_harmonic():
    box = (2.0, 3.0, 2.0, 3.0)
    assert harmonic_residual(lambda x, y: x * y, box, 1e-3) < 1e-8
    assert harmonic_residual(lambda x, y: x * x + y * y, box, 1e-3) == pytest.approx(4.0, rel=1e-4)


def test_harmonic_residual_rejects_box_touching_cylinder():
    with pytest.raises(InvalidParameterError):
        harmonic_residual(lambda x, y: x, (-0.5, 0.5, 0.1, 0.5), 1e-3)


def test_neumann_residual_of_cylinder_dipole():
    # x + x / r^2 has zero normal derivative on r = 1
    thetas = np.linspace(-1.4, 1.4, 9)
    assert neumann_residual(lambda x, y: x + x / (x * x + y * y), thetas) < 1e-8
    assert neumann_residual(lambda x, y: x, thetas) > 0.1
