"""Command-line entry point: ``rgl <subcommand> [options]``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from rgl import attractor, io
from rgl.basis import SpectralCoeffs, build_basis
from rgl.dynamics import IntegratorConfig, SimState, simulate
from rgl.ground_state import normalized_gradient_flow, parse_seed, seed_gaussian
from rgl.params import ModelParams, Truncation
from rgl.propagator import gaussian_domination, smoothing_probe

log = logging.getLogger("rgl")


class CliError(Exception):
    pass


def _thread_limit():
    """Cap BLAS threads from RGL_THREADS (0 or unset = library default)."""
    raw = os.environ.get("RGL_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise CliError(f"RGL_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise CliError("RGL_THREADS must be >= 0")
    if n == 0:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _load_config(args, required: bool = True) -> io.RunConfig:
    if args.config is None:
        if required:
            raise CliError("--config is required for this subcommand")
        return io.RunConfig(ModelParams(), Truncation(), IntegratorConfig())
    return io.parse_config(args.config)


def _out_dir(args, cfg: io.RunConfig) -> Path:
    out = args.out or cfg.output_dir
    if not out:
        raise CliError("no output directory: pass --out or set output_dir in the config")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# -- subcommands -----------------------------------------------------------------------------


def _initial_state(spec: str, basis) -> SpectralCoeffs:
    kind, _, arg = spec.partition(":")
    if spec == "ground-mode":
        return basis.unit(0)
    if spec == "gaussian":
        return seed_gaussian(basis, 0.5)
    if kind == "file":
        data = io.decode_snapshot(Path(arg).read_bytes())
        if data.values.size != basis.n_modes:
            raise CliError(f"{arg}: {data.values.size} modes, config basis has {basis.n_modes}")
        return SpectralCoeffs(basis, data.values.copy())
    if kind == "random":
        return parse_seed(spec, basis)
    raise CliError(f"unknown --init {spec!r}")


def cmd_simulate(args) -> int:
    start = time.perf_counter()
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    basis = build_basis(cfg.params, cfg.truncation)
    if cfg.integrator.exceeds_recommended(basis, cfg.params):
        log.warning("dt = %g exceeds the recommended limit %g", cfg.integrator.dt,
                    cfg.integrator.recommended_dt(basis, cfg.params))
    psi0 = _initial_state(args.init, basis)
    result = simulate(cfg.params, psi0, cfg.integrator, cfg.t_final)
    ok = not result.aborted
    files = [io.write_timeseries(result.series, out / "timeseries.csv", finalize=ok).name]
    for k, (t, c) in enumerate(zip(result.snapshot_times, result.snapshots)):
        state = SimState(t, SpectralCoeffs(basis, c), cfg.params)
        files.append(io.write_snapshot(out / f"snapshot_{k:06d}.rglf", state, finalize=ok).name)
    io.write_manifest(out, "simulate", {**cfg.resolved(), "init": args.init}, files,
                      time.perf_counter() - start, "ok" if ok else f"aborted: {result.error}")
    if not ok:
        raise CliError(f"simulation aborted: {result.error}")
    log.info("wrote %d files to %s", len(files), out)
    return 0


def cmd_ground_state(args) -> int:
    start = time.perf_counter()
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    basis = build_basis(cfg.params, cfg.truncation)
    seed = parse_seed(args.seed, basis)
    res = normalized_gradient_flow(cfg.params, args.mass, seed, dt_flow=args.dt_flow, tol=args.tol,
                                   max_iter=args.max_iter,
                                   stabilization=None if args.stabilize else 0.0)
    state = SimState(0.0, res.coeffs, cfg.params)
    snap = io.write_snapshot(out / "ground_state.rglf", state, finalize=res.converged)
    e = res.energy
    report = "".join(f"{k}: {v}\n" for k, v in [
        ("converged", res.converged), ("iterations", res.iterations),
        ("mass", args.mass), ("chemical_potential", f"{res.chemical_potential:.17g}"),
        ("E_kin", f"{e.kinetic:.17g}"), ("E_pot", f"{e.potential:.17g}"),
        ("E_nl", f"{e.nonlinear:.17g}"), ("E_rot", f"{e.rotational:.17g}"),
        ("E_total", f"{e.total:.17g}"), ("residual", f"{res.residual:.6e}"),
        ("vortex_count", res.vortex_count), ("seed", args.seed),
    ])
    rep = io.write_exclusive(out / "report.txt", report.encode(), finalize=res.converged)
    io.write_manifest(out, "ground-state", {**cfg.resolved(), "seed": args.seed, "mass": args.mass,
                                            "tol": args.tol}, [snap.name, rep.name],
                      time.perf_counter() - start, "ok" if res.converged else "not converged")
    if not args.quiet:
        sys.stdout.write(report)
    if not res.converged:
        raise CliError(f"flow did not converge in {res.iterations} iterations")
    return 0


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",")]


def cmd_kernel_probe(args) -> int:
    cfg = _load_config(args, required=False)
    p = cfg.params
    rows = ["t,q,r,ratio"]
    for t in args.t:
        for q in args.q:
            for r in args.r:
                if q > r:
                    continue
                probe = smoothing_probe(t, q, r, args.family_size, p)
                rows.append(",".join(f"{v:.17g}" for v in (t, q, r, probe.observed_ratio)))
    dom = gaussian_domination(p)
    report = (f"# gaussian domination: c = {dom.c:.6g}, delta = {dom.delta:.6g}, "
              f"passed = {dom.passed}, max diagonal Re phase = {dom.max_diag_phase:.3e}\n")
    text = report + "\n".join(rows) + "\n"
    if args.out:
        io.write_exclusive(args.out, text.encode())
    if not args.quiet:
        sys.stdout.write(text)
    return 0


def cmd_decay_fit(args) -> int:
    table = io.read_timeseries(args.timeseries)
    rate, r2 = attractor.decay_rate_fit((table["t"], table["mass"]))
    text = f"rate: {rate:.17g}\nr_squared: {r2:.17g}\nsamples: {table['t'].size}\n"
    if args.config:
        cfg = io.parse_config(args.config)
        try:
            text += f"predicted_rate: {attractor.predicted_decay_rate(cfg.params):.17g}\n"
        except ValueError as exc:
            text += f"predicted_rate: none ({exc})\n"
    if args.out:
        io.write_exclusive(args.out, text.encode())
    if not args.quiet:
        sys.stdout.write(text)
    return 0


def _parse_sweep(text: str) -> np.ndarray:
    name, lo, hi, n = text.split(":")
    if name != "Omega":
        raise CliError("only Omega sweeps are supported (--sweep Omega:<lo>:<hi>:<n>)")
    return np.linspace(float(lo), float(hi), int(n))


def cmd_dimension_estimate(args) -> int:
    cfg = _load_config(args)
    omegas = _parse_sweep(args.sweep) if args.sweep else np.array([cfg.params.Omega])
    rows = ["Omega,kappa1,kappa2,ratio,delta,m_hausdorff,m_fractal"]
    for W in omegas:
        est = attractor.dimension_estimate(cfg.params.replace(Omega=float(W)), delta=args.delta,
                                           c_prime=args.c_prime, c_double_prime=args.c_double_prime)
        rows.append(f"{W:.17g},{est.kappa1:.17g},{est.kappa2:.17g},{est.ratio:.17g},"
                    f"{est.delta_used:.17g},{est.m_hausdorff},{est.m_fractal}")
    text = "\n".join(rows) + "\n"
    if args.out:
        io.write_exclusive(args.out, text.encode())
    if not args.quiet:
        sys.stdout.write(text)
    return 0


# -- parser ----------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value parameter file")
    common.add_argument("--out", help="output directory (simulate, ground-state) or file")
    common.add_argument("--quiet", action="store_true", help="only report errors")

    parser = argparse.ArgumentParser(prog="rgl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", parents=[common], help="integrate the dissipative dynamics")
    sp.add_argument("--init", default="ground-mode",
                    help="ground-mode | gaussian | file:<path> | random:<seed>")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("ground-state", parents=[common], help="normalized gradient flow")
    sp.add_argument("--mass", type=float, default=1.0)
    sp.add_argument("--seed", default="gaussian-offset:0.5",
                    help="mode:<nr>,<m> | gaussian-offset:<dx> | random:<seed>")
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--dt-flow", type=float, default=1e-2)
    sp.add_argument("--max-iter", type=int, default=100_000)
    sp.add_argument("--stabilize", action="store_true",
                    help="automatic stabilization shift (allows dt-flow of order 1)")
    sp.set_defaults(func=cmd_ground_state)

    sp = sub.add_parser("kernel-probe", parents=[common], help="L^q -> L^r smoothing probe")
    sp.add_argument("--t", type=_float_list, default=[0.05, 0.1])
    sp.add_argument("--q", type=_float_list, default=[2.0])
    sp.add_argument("--r", type=_float_list, default=[4.0])
    sp.add_argument("--family-size", type=int, default=12)
    sp.set_defaults(func=cmd_kernel_probe)

    sp = sub.add_parser("decay-fit", parents=[common], help="fit the mass decay rate of a time series")
    sp.add_argument("--timeseries", required=True)
    sp.set_defaults(func=cmd_decay_fit)

    sp = sub.add_parser("dimension-estimate", parents=[common], help="attractor dimension bound")
    sp.add_argument("--delta", type=float, default=None)
    sp.add_argument("--sweep", help="Omega:<lo>:<hi>:<n>")
    sp.add_argument("--c-prime", type=float, default=1.0)
    sp.add_argument("--c-double-prime", type=float, default=1.0)
    sp.set_defaults(func=cmd_dimension_estimate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_limit():
            return args.func(args)
    except (CliError, io.ConfigError, io.SnapshotError, FileExistsError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
