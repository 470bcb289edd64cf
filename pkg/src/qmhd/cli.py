"""Command-line entry points: run, sweep, check, inspect.

Exit codes: 0 success, 1 usage, 2 configuration, 3 numerical failure,
4 I/O failure.  All files are written inside the configured output
directory, atomically.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .basis import GalerkinBasis
from .config import RunConfig, canonical_text, parse_config, parse_config_text
from .diagnostics import DiagnosticsWriter
from .errors import ConfigError, QMHDError, SnapshotFormatError, UsageError
from .experiments import (
    Coupling,
    SweepSpec,
    benchmark_state,
    content_hash,
    run_sweep,
    sweep_rows,
)
from .fields import ScalarField, VectorField, divergence, l2_norm
from .grid import TorusGrid
from .snapshots import read_snapshot, write_snapshot
from .solver import cfl_report, initial_state, run_simulation


def _apply_threads(threads: int) -> int:
    env = os.environ.get("QMHD_THREADS")
    if env:
        try:
            threads = max(1, int(env))
        except ValueError:
            raise UsageError(f"QMHD_THREADS must be an integer, got {env!r}")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(threads)
    return threads


def _build_state(config: RunConfig, basis: GalerkinBasis, grid: TorusGrid):
    if config.benchmark:
        return benchmark_state(config.benchmark, grid, basis, config.reg, seed=config.seed)
    rho, _ = read_snapshot(config.rho_path)
    vel, _ = read_snapshot(config.velocity_path)
    mag, t0 = read_snapshot(config.magnetic_path)
    if not isinstance(rho, ScalarField) or not isinstance(vel, VectorField) or not isinstance(mag, VectorField):
        raise SnapshotFormatError("initial data must be one scalar and two vector snapshots")
    return initial_state(rho, vel, mag, basis, config.reg, time=t0)


def _atomic_text(path, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def cmd_run(args) -> int:
    config = parse_config(args.config)
    _apply_threads(config.threads)
    grid = TorusGrid(config.points)
    basis = GalerkinBasis.lowest_modes(grid, config.modes)
    state = _build_state(config, basis, grid)
    if config.t_end < state.time:
        raise UsageError(f"t_end={config.t_end} precedes the initial time {state.time}")

    out = config.output_directory
    os.makedirs(out, exist_ok=True)
    _atomic_text(os.path.join(out, "config_echo.cfg"), canonical_text(config))

    writer = DiagnosticsWriter(os.path.join(out, "diagnostics.csv"), config.phys, config.reg)

    infos = {}

    def snapshot_writer(s, step):
        if config.snapshot_every and step % config.snapshot_every == 0:
            stamp = f"{step:08d}"
            write_snapshot(os.path.join(out, f"rho_{stamp}.qmhd"), s.rho, s.time)
            write_snapshot(os.path.join(out, f"velocity_{stamp}.qmhd"), s.u, s.time)
            write_snapshot(os.path.join(out, f"magnetic_{stamp}.qmhd"), s.magnetic, s.time)

    print(f"qmhd {__version__}: advancing to t={config.t_end} (dt={config.reg.dt})")
    for key, val in cfl_report(state, config.phys, config.reg).items():
        print(f"  cfl {key:28s} {val:.3e}")

    sample_every = max(config.diagnostics_every, 1)
    traj = run_simulation(
        state,
        config.phys,
        config.reg,
        config.t_end,
        sample_every=sample_every,
        snapshot_writer=snapshot_writer,
    )
    for s, info in zip(traj.states, [None] + traj.step_infos[sample_every - 1 :: sample_every]):
        writer.write_row(s, info)
    writer.close()

    final = traj.final_state
    write_snapshot(os.path.join(out, "rho_final.qmhd"), final.rho, final.time)
    write_snapshot(os.path.join(out, "velocity_final.qmhd"), final.u, final.time)
    write_snapshot(os.path.join(out, "magnetic_final.qmhd"), final.magnetic, final.time)
    print(f"finished at t={final.time:.6f}; min rho={final.rho.values.min():.6e}; "
          f"worst contraction ratio={traj.max_contraction_ratio():.3f}")
    print(f"wrote {out}/diagnostics.csv and final snapshots")
    return 0


_SWEEP_KEYS = {
    "parameter": str,
    "values": str,
    "benchmark": str,
    "dim": int,
    "points": int,
    "modes": int,
    "t_end": float,
    "sample_every": int,
    "seed": int,
    "output": str,
    "workers": int,
    "eta_coeff": float,
    "eta_exponent": float,
    "epsilon_coeff": float,
    "epsilon_exponent": float,
}


def parse_sweep_manifest(path) -> tuple[SweepSpec, str, int]:
    """Manifest: a [sweep] section plus optional [physics]/[regularization]
    overrides in the run-config syntax."""
    with open(path) as fh:
        text = fh.read()
    sweep_lines = []
    other_lines = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in ("sweep", "physics", "regularization"):
                raise ConfigError(f"line {lineno}: unknown manifest section [{section}]")
            if section != "sweep":
                other_lines.append(stripped)
            continue
        if section == "sweep":
            sweep_lines.append((lineno, stripped))
        elif section is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        elif section == "regularization" and stripped.split("=", 1)[0].strip() == "t_end":
            raise ConfigError(f"line {lineno}: set the sweep horizon as t_end in [sweep]")
        else:
            other_lines.append(stripped)

    # the horizon lives in [sweep]; keep the base-config validation neutral
    other_lines += ["[regularization]", "t_end = 0"]
    base = parse_config_text("\n".join(other_lines), base_dir=os.path.dirname(os.path.abspath(path)))

    opts: dict[str, object] = {}
    for lineno, line in sweep_lines:
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in _SWEEP_KEYS:
            raise ConfigError(f"line {lineno}: unknown sweep key {key!r}")
        try:
            opts[key] = _SWEEP_KEYS[key](raw)
        except ValueError:
            raise ConfigError(f"line {lineno}: cannot parse {key} value {raw!r}")

    for required in ("parameter", "values", "output"):
        if required not in opts:
            raise ConfigError(f"sweep manifest must set {required}")
    values = tuple(float(v) for v in str(opts["values"]).split(","))
    if opts["parameter"] == "n":
        values = tuple(int(v) for v in values)
    couplings = []
    for target in ("eta", "epsilon"):
        coeff = opts.get(f"{target}_coeff")
        if coeff is not None:
            couplings.append(Coupling(target, float(coeff), float(opts.get(f"{target}_exponent", 2.0))))
    spec = SweepSpec(
        parameter=str(opts["parameter"]),
        values=values,
        benchmark=str(opts.get("benchmark", "density_bump")),
        dim=int(opts.get("dim", 1)),
        points=int(opts.get("points", 128)),
        t_end=float(opts.get("t_end", 0.1)),
        phys=base.phys,
        reg=base.reg,
        n_modes=int(opts.get("modes", 9)),
        couplings=tuple(couplings),
        sample_every=int(opts.get("sample_every", 1)),
        seed=int(opts.get("seed", 0)),
    )
    return spec, str(opts["output"]), int(opts.get("workers", 1))


def cmd_sweep(args) -> int:
    spec, out, workers = parse_sweep_manifest(args.manifest)
    _apply_threads(1)
    os.makedirs(out, exist_ok=True)
    result = run_sweep(spec, workers=workers)
    rows = sweep_rows(result)

    columns = sorted({k for row in rows for k in row})
    csv_path = os.path.join(out, "sweep_results.csv")
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(repr(row.get(c, "")) if isinstance(row.get(c), float) else str(row.get(c, "")) for c in columns))
    _atomic_text(csv_path, "\n".join(lines) + "\n")

    manifest_lines = ["[sweep.result]"]
    manifest_lines.append(f"parameter = {spec.parameter}")
    manifest_lines.append(f"values = {', '.join(str(v) for v in spec.values)}")
    for key, order in sorted(result.convergence_orders.items()):
        manifest_lines.append(f"order_{key} = {order!r}")
    manifest_lines.append(f"file = sweep_results.csv sha256 {content_hash(csv_path)}")
    _atomic_text(os.path.join(out, "sweep_manifest.txt"), "\n".join(manifest_lines) + "\n")

    print(f"sweep over {spec.parameter}: {len(result.rungs)} rungs")
    for rung in result.rungs:
        dist = rung.distance_to_reference.get("sqrt_rho_u", 0.0)
        print(f"  value={rung.value:<12g} min_rho={rung.min_rho:.4e} dist(sqrt_rho_u)={dist:.4e}")
    print(f"wrote {csv_path}")
    return 0


def _print_check(name: str, ok: bool, detail: str) -> bool:
    print(f"{'PASS' if ok else 'FAIL'}  {name:40s} {detail}")
    return ok


def cmd_check(args) -> int:
    config = parse_config(args.config)
    _apply_threads(config.threads)
    from .basis import MassOperator
    from .constitutive import cold_enthalpy, cold_pressure, enthalpy, pressure
    from .diagnostics import bohm_identity_check
    from .fields import (
        curl,
        dealias,
        gradient,
        integrate,
        laplacian,
        project_divergence_free,
    )

    grid = TorusGrid(config.points)
    basis = GalerkinBasis.lowest_modes(grid, config.modes)
    rng = np.random.default_rng(config.seed)

    ok = True
    f = ScalarField(grid, rng.standard_normal(grid.shape))
    back = ScalarField.from_spectrum(grid, f.spectrum)
    err = float(np.max(np.abs(back.values - f.values)) / max(np.max(np.abs(f.values)), 1e-300))
    ok &= _print_check("transform round-trip", err <= 1e-12, f"rel err {err:.2e}")

    g = dealias(f)
    lap_via = divergence(gradient(g))
    lap_direct = laplacian(g)
    err = float(np.max(np.abs(lap_via.values - lap_direct.values)))
    ok &= _print_check("divergence of gradient = laplacian", err <= 1e-9, f"abs err {err:.2e}")

    v = VectorField.from_arrays(grid, [dealias(ScalarField(grid, rng.standard_normal(grid.shape))).values for _ in range(3)])
    err = l2_norm(divergence(curl(v)))
    ok &= _print_check("divergence of curl vanishes", err <= 1e-10, f"L2 {err:.2e}")

    p = project_divergence_free(v)
    err = l2_norm(divergence(p)) / max(l2_norm(p), 1e-300)
    ok &= _print_check("projection kills divergence", err <= 1e-12, f"rel {err:.2e}")

    # extended precision keeps the centered difference clear of power-law
    # evaluation noise; same closed forms as production
    rho_grid = np.geomspace(1e-3, 1e3, 41).astype(np.longdouble)
    h = np.longdouble(1e-6) * rho_grid
    hi, lo = rho_grid + h, rho_grid - h
    dH = (enthalpy(hi, config.phys) - enthalpy(lo, config.phys)) / (hi - lo)
    res = rho_grid * dH - enthalpy(rho_grid, config.phys) - pressure(rho_grid, config.phys)
    scale = np.maximum(np.abs(pressure(rho_grid, config.phys)), 1.0)
    err = float(np.max(np.abs(res) / scale))
    ok &= _print_check("enthalpy identity", err <= 1e-10, f"rel err {err:.2e}")

    dHc = (cold_enthalpy(hi, config.phys) - cold_enthalpy(lo, config.phys)) / (hi - lo)
    resc = rho_grid * dHc - cold_enthalpy(rho_grid, config.phys) - cold_pressure(rho_grid, config.phys)
    scalec = np.maximum.reduce(
        [
            np.abs(rho_grid * dHc),
            np.abs(cold_enthalpy(rho_grid, config.phys)),
            np.abs(cold_pressure(rho_grid, config.phys)),
            np.ones_like(rho_grid),
        ]
    )
    err = float(np.max(np.abs(resc) / scalec))
    ok &= _print_check("cold enthalpy identity", err <= 1e-10, f"rel err {err:.2e}")

    mesh = grid.mesh
    rho = ScalarField(grid, 1.5 + 0.2 * np.cos(mesh[0]))
    rep = bohm_identity_check(rho, kappa=1.0)
    err = max(rep.primary_vs_divergence, rep.primary_vs_hessian)
    ok &= _print_check("quantum force forms agree", err <= 1e-6, f"L2 discrepancy {err:.2e}")

    one = ScalarField(grid, np.ones(grid.shape))
    gram = MassOperator(basis, one).matrix
    err = float(np.max(np.abs(gram - np.eye(basis.n))))
    ok &= _print_check("unit-density Gram is identity", err <= 1e-12, f"max dev {err:.2e}")

    state = benchmark_state(config.benchmark or "density_bump", grid, basis, config.reg, seed=config.seed)
    err = abs(integrate(state.rho) - state.mass)
    ok &= _print_check("initial state valid", err == 0.0 and state.rho.values.min() > 0, f"min rho {state.rho.values.min():.3e}")

    return 0 if ok else 3


def cmd_inspect(args) -> int:
    field, time = read_snapshot(args.snapshot)
    grid = field.grid
    kind = "vector" if isinstance(field, VectorField) else "scalar"
    print(f"snapshot {args.snapshot}")
    print(f"  kind      {kind}")
    print(f"  dim       {grid.dim}")
    print(f"  shape     {grid.shape}")
    print(f"  time      {time!r}")
    if isinstance(field, VectorField):
        for i, c in enumerate(field.components):
            print(
                f"  component {i}: L2 {l2_norm(c)!r} min {float(c.values.min())!r} "
                f"max {float(c.values.max())!r}"
            )
        print(f"  div L2    {l2_norm(divergence(field))!r}")
    else:
        print(f"  L2        {l2_norm(field)!r}")
        print(f"  min/max   {float(field.values.min())!r} {float(field.values.max())!r}")
        print(f"  mean      {float(field.values.mean())!r}")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qmhd", description="Quantum MHD pseudo-spectral solver and diagnostics")
    parser.add_argument("--version", action="version", version=f"qmhd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="advance a configured simulation")
    p_run.add_argument("config")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="execute a parameter-ladder manifest")
    p_sweep.add_argument("manifest")
    p_sweep.set_defaults(func=cmd_sweep)

    p_check = sub.add_parser("check", help="run the invariant battery without a simulation")
    p_check.add_argument("config")
    p_check.set_defaults(func=cmd_check)

    p_inspect = sub.add_parser("inspect", help="print a snapshot header and norms")
    p_inspect.add_argument("snapshot")
    p_inspect.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SnapshotFormatError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except QMHDError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
