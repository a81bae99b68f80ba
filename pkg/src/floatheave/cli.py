"""Command-line entry point: ``floatheave {simulate,verify,dtn,extend,kernel}``.

Exit codes: 0 success, 1 a verification check failed, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .grids import InvalidParameterError, SurfaceFunction

__all__ = ["cli_main", "main", "write_csv"]

log = logging.getLogger("floatheave")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2

TRAJECTORY_COLUMNS = ("t", "h", "hdot", "energy", "v_l2", "v_half_norm")


class UsageError(Exception):
    """Bad command-line input; reported with exit code 2."""


def write_csv(path: Path, columns, names) -> Path:
    """Write columns with one header line and 17 significant digits per value."""
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, delimiter=",", header=",".join(names), comments="", fmt="%.17g")
    return path


def _read_values(path: Path, expected: int) -> np.ndarray:
    if not path.is_file():
        raise UsageError(f"{path}: file not found")
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#", skiprows=_header_rows(path))
    except ValueError as exc:
        raise UsageError(f"{path}: cannot parse CSV ({exc})") from exc
    values = data[:, -1]
    if values.size != expected:
        raise UsageError(f"{path}: has {values.size} values but the grid has {expected} nodes")
    return values


def _header_rows(path: Path) -> int:
    with path.open() as fh:
        first = fh.readline()
    try:
        [float(tok) for tok in first.strip().split(",") if tok]
    except ValueError:
        return 1
    return 0


def _output_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"output directory {out} is not writable: {exc}") from exc
    return out


def _load_config(path):
    from .config import parse_config

    return parse_config(path)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    from .coupling import simulate

    config = _load_config(args.config)
    out = _output_dir(args.output or config.output_dir)
    started = time.perf_counter()
    traj = simulate(config)
    write_csv(out / "trajectory.csv", traj.columns().T, TRAJECTORY_COLUMNS)
    snaps = []
    for snap in traj.snapshots:
        name = f"snapshot_t{snap.t:.6f}.csv"
        write_csv(out / name, (snap.grid.nodes, snap.v.values, snap.u.values), ("x", "v", "u"))
        snaps.append(name)
    manifest = dict(traj.manifest, snapshots=snaps, total_seconds=time.perf_counter() - started)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=float))
    log.info("wrote %d rows to %s", len(traj.t), out / "trajectory.csv")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_suite, summary_table

    config = _load_config(args.config) if args.config else None
    level = "full" if args.full else "quick"
    stream = open(args.json_out, "w") if args.json_out else sys.stdout
    try:
        reports = run_suite(level, config, only=args.only, stream=stream)
    finally:
        if args.json_out:
            stream.close()
    print(summary_table(reports))
    failed = [r for r in reports if not r.passed and not r.skipped]
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def _operator(config):
    from .config import build_run

    return build_run(config)


def cmd_dtn(args) -> int:
    from .grids import build_surface_grid

    config = _load_config(args.config)
    grid = build_surface_grid(config.L, config.n)
    values = _read_values(Path(args.apply), grid.size)
    run = _operator(config)
    result = run.op.apply(SurfaceFunction(grid, values))
    target = Path(args.output) if args.output else _output_dir(config.output_dir) / "dtn_apply.csv"
    write_csv(target, (grid.nodes, values, result.values), ("x", "v", "lambda_v"))
    log.info("wrote %s", target)
    return EXIT_OK


def cmd_extend(args) -> int:
    from .grids import build_surface_grid
    from .omega import dirichlet_extend_omega

    config = _load_config(args.config)
    grid = build_surface_grid(config.L, config.n)
    path = Path(args.points)
    if not path.is_file():
        raise UsageError(f"{path}: file not found")
    pts = np.loadtxt(path, delimiter=",", ndmin=2, comments="#", skiprows=_header_rows(path))
    if pts.shape[1] != 2:
        raise UsageError(f"{path}: expected two columns x,y")
    values = _read_values(Path(args.values), grid.size) if args.values else _initial_v0(config, grid)
    field = dirichlet_extend_omega(SurfaceFunction(grid, values), pts)
    target = Path(args.output) if args.output else _output_dir(config.output_dir) / "extension.csv"
    write_csv(target, (pts[:, 0], pts[:, 1], field), ("x", "y", "value"))
    log.info("wrote %s", target)
    return EXIT_OK


def _initial_v0(config, grid):
    from .config import profile_values

    return profile_values(grid, config.v0)


def cmd_kernel(args) -> int:
    config = _load_config(args.config)
    run = _operator(config)
    out = _output_dir(args.output or config.output_dir)
    grid = run.kernel.grid
    write_csv(out / "heave_kernel.csv", (grid.nodes, run.kernel.K, run.kernel.I1, run.kernel.I2),
              ("x", "K", "I1", "I2"))
    run.op.dump(out / "dtn_matrix", fmt=args.format)
    log.info("wrote kernel and DtN matrix to %s", out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="floatheave", description="Floating cylinder in heave: DtN operators and coupled runs.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run a coupled simulation")
    p.add_argument("config")
    p.add_argument("--output", help="output directory (default: output_dir from the config)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the verification suite")
    lvl = p.add_mutually_exclusive_group()
    lvl.add_argument("--quick", action="store_true", help="coarse grids, under a minute (default)")
    lvl.add_argument("--full", action="store_true", help="production grids")
    p.add_argument("--config", help="override grid, gravity and seed from a config file")
    p.add_argument("--only", nargs="+", metavar="CHECK", help="run only these check ids")
    p.add_argument("--json-out", help="write JSON lines here instead of standard output")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("dtn", help="apply the DtN matrix to node values")
    p.add_argument("config")
    p.add_argument("--apply", required=True, metavar="V_CSV", help="CSV whose last column holds v at the nodes")
    p.add_argument("--output")
    p.set_defaults(func=cmd_dtn)

    p = sub.add_parser("extend", help="evaluate the harmonic extension at field points")
    p.add_argument("config")
    p.add_argument("--points", required=True, metavar="PTS_CSV", help="CSV with columns x,y")
    p.add_argument("--values", metavar="V_CSV", help="surface values (default: v0 from the config)")
    p.add_argument("--output")
    p.set_defaults(func=cmd_extend)

    p = sub.add_parser("kernel", help="dump the heave kernel and the DtN matrix")
    p.add_argument("config")
    p.add_argument("--output")
    p.add_argument("--format", choices=("npy", "csv"), default="npy")
    p.set_defaults(func=cmd_kernel)
    return parser


def cli_main(argv=None) -> int:
    """Parse ``argv`` and run a subcommand; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"floatheave: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, InvalidParameterError) as exc:
        print(f"floatheave: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main():  # pragma: no cover
    sys.exit(cli_main())


if __name__ == "__main__":  # pragma: no cover
    main()
