import json

import numpy as np
import pytest
import yaml

from floatheave.cli import cli_main


def write_config(tmp_path, **overrides):
    cfg = {"L": 5.0, "n": 32, "dt": 0.05, "T": 0.5, "stride": 2, "output_dir": "out",
           "snapshot_times": [0.0, 0.5]}
    cfg.update(overrides)
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


def test_simulate_zero_data(tmp_path):
    path = write_config(tmp_path)
    assert cli_main(["simulate", str(path)]) == 0
    out = tmp_path / "out"
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,h,hdot,energy,v_l2,v_half_norm"
    data = np.loadtxt(out / "trajectory.csv", delimiter=",", skiprows=1)
    assert data.shape == (6, 6)
    np.testing.assert_array_equal(data[:, 1:], 0.0)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["M"] == 10.0
    assert sorted(manifest["snapshots"]) == ["snapshot_t0.000000.csv", "snapshot_t0.500000.csv"]


def test_simulate_reruns_bit_identical(tmp_path):
    path = write_config(tmp_path, h0=0.1, v0={"profile": "gaussian", "amplitude": 0.1})
    assert cli_main(["simulate", str(path), "--output", str(tmp_path / "a")]) == 0
    assert cli_main(["simulate", str(path), "--output", str(tmp_path / "b")]) == 0
    for name in ("trajectory.csv", "snapshot_t0.500000.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("overrides", [{"L": 0.5}, {"colour": 1}, {"n": "many"}])
def test_bad_config_exit_2(tmp_path, overrides, capsys):
    path = write_config(tmp_path, **overrides)
    assert cli_main(["simulate", str(path)]) == 2
    assert "error" in capsys.readouterr().err


def test_usage_errors_exit_2(tmp_path):
    assert cli_main([]) == 2
    assert cli_main(["simulate"]) == 2
    assert cli_main(["simulate", str(tmp_path / "missing.yaml")]) == 2


def test_dtn_apply(tmp_path):
    path = write_config(tmp_path)
    x = np.concatenate([-np.linspace(5, 1, 32), np.linspace(1, 5, 32)])
    np.savetxt(tmp_path / "v.csv", np.c_[x, np.exp(-(np.abs(x) - 1) ** 2)], delimiter=",", header="x,v",
               comments="")
    target = tmp_path / "lv.csv"
    assert cli_main(["dtn", str(path), "--apply", str(tmp_path / "v.csv"), "--output", str(target)]) == 0
    data = np.loadtxt(target, delimiter=",", skiprows=1)
    assert data.shape == (64, 3)
    np.testing.assert_allclose(data[:, 2], data[::-1, 2], rtol=1e-10)


def test_dtn_length_mismatch(tmp_path, capsys):
    path = write_config(tmp_path)
    np.savetxt(tmp_path / "v.csv", np.ones(10))
    assert cli_main(["dtn", str(path), "--apply", str(tmp_path / "v.csv")]) == 2
    assert "10 values" in capsys.readouterr().err


def test_extend_points(tmp_path):
    path = write_config(tmp_path, v0={"profile": "gaussian"})
    np.savetxt(tmp_path / "pts.csv", [[0.0, 2.0], [3.0, 0.5]], delimiter=",", header="x,y", comments="")
    target = tmp_path / "ext.csv"
    assert cli_main(["extend", str(path), "--points", str(tmp_path / "pts.csv"), "--output", str(target)]) == 0
    data = np.loadtxt(target, delimiter=",", skiprows=1)
    assert data.shape == (2, 3) and np.all(np.isfinite(data))


@pytest.mark.parametrize("fmt", ["npy", "csv"])
def test_kernel_dump(tmp_path, fmt):
    path = write_config(tmp_path)
    assert cli_main(["kernel", str(path), "--format", fmt]) == 0
    data = np.loadtxt(tmp_path / "out" / "heave_kernel.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(data[:, 1], np.pi / (2 * data[:, 0] ** 2), rtol=1e-10)
    assert any(p.name.startswith("dtn_matrix") for p in (tmp_path / "out").iterdir())


def test_verify_only(tmp_path, capsys):
    out = tmp_path / "checks.jsonl"
    assert cli_main(["verify", "--quick", "--only", "sigma_norm", "skew_adjointness", "--json-out", str(out)]) == 0
    records = [json.loads(line) for line in out.read_text().splitlines()]
    ran = {r["check_id"] for r in records if r["skipped"] is None}
    assert ran == {"sigma_norm", "skew_adjointness"}
    assert "0 failed" in capsys.readouterr().out


def test_verify_failure_exit_1(monkeypatch):
    from floatheave import verify

    anchor, _ = verify.CHECKS["poisson_mass"]
    monkeypatch.setitem(verify.CHECKS, "poisson_mass", (anchor, lambda ctx: verify.Outcome(1.0)))
    assert cli_main(["verify", "--only", "poisson_mass"]) == 1
