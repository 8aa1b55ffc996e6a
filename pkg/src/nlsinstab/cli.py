"""Command-line entry point: ``nlsinstab {solve,spectrum,evolve,instability,sweep,verify}``.

Exit status: 0 success, 2 bad arguments, 3 solver failure, 4 acceptance
violation.  Every command that writes ``--out`` also writes
``<out>.manifest.json`` with parameters, input digests and timings.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import Cache, RunManifest, file_digest, load_config, read_json, write_csv, write_json
from .errors import NLSError, PreconditionError, SubcriticalityError
from .field import Field, Grid, NonlinearitySpec

log = logging.getLogger("nlsinstab")

EXIT_OK, EXIT_ARGS, EXIT_SOLVER, EXIT_ACCEPT = 0, 2, 3, 4

REQUIRED = {
    "solve": ["p", "out"],
    "spectrum": ["wave", "out"],
    "evolve": ["wave", "T", "dt", "out"],
    "instability": ["wave", "spectrum", "delta", "eps0", "out"],
    "sweep": ["wave", "spectrum", "deltas", "eps0", "out"],
    "verify": ["suite"],
}


class _Failure(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _complex(text: str) -> complex:
    return complex(text.replace(" ", ""))


def _deltas(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad delta list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlsinstab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; command-line flags take precedence")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized test vectors")
    common.add_argument("--cache-dir", help="cache root (default: $NLSINSTAB_CACHE, disabled if unset)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("solve", parents=[common], help="standing-wave profile")
    p.add_argument("--p", type=float, help="nonlinearity exponent")
    p.add_argument("--dim", type=int, default=1, help="space dimension N")
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--nodes", type=int, default=0, help="number of radial nodes")
    p.add_argument("--charge", "--vortex", dest="charge", type=int, default=0, help="vortex winding (N=2 only)")
    p.add_argument("--L", type=float, help="half box width for embedding")
    p.add_argument("--n", type=int, help="points per axis for embedding")
    p.add_argument("--r-max", "--rmax", dest="r_max", type=float)
    p.add_argument("--points-per-unit", type=int, default=1000, help="radial mesh density")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--no-polish", action="store_true", help="skip Newton polish on the grid")
    p.add_argument("--out", help="wave JSON")

    p = sub.add_parser("spectrum", parents=[common], help="linearized spectrum")
    p.add_argument("--wave")
    p.add_argument("--mode", choices=["dense", "iterative"], default="dense")
    p.add_argument("--count", type=int, default=6)
    p.add_argument("--shift", type=_complex)
    p.add_argument("--tol", type=float, default=1e-6, help="neutral band |Re lambda| < tol")
    p.add_argument("--out", help="spectrum JSON")

    p = sub.add_parser("evolve", parents=[common], help="nonlinear evolution")
    p.add_argument("--wave")
    p.add_argument("--perturb", help="spectrum JSON (uses chi) or field JSON")
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--T", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--sample", type=float, help="checkpoint cadence (default T/100)")
    p.add_argument("--out", help="trace CSV")

    p = sub.add_parser("instability", parents=[common], help="seeded escape run")
    p.add_argument("--wave")
    p.add_argument("--spectrum")
    p.add_argument("--delta", type=float)
    p.add_argument("--eps0", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--out", help="run JSON")

    p = sub.add_parser("sweep", parents=[common], help="escape time against delta")
    p.add_argument("--wave")
    p.add_argument("--spectrum")
    p.add_argument("--deltas", type=_deltas)
    p.add_argument("--eps0", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--out", help="sweep CSV")

    p = sub.add_parser("verify", parents=[common], help="built-in checks")
    p.add_argument("--suite", choices=["mapping", "soliton", "kernel", "conservation"])
    p.add_argument("--n", type=int)
    p.add_argument("--L", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--out", help="report JSON")
    return parser


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = load_config(args.config)
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config: {exc}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        actions = {a.dest: a for a in sub._actions}
        for key, value in list(cfg.items()):
            act = actions[key]
            if act.nargs == 0:  # store_true flags
                cfg[key] = value.lower() in ("1", "true", "yes", "on")
            elif act.choices is not None and value not in act.choices:
                parser.error(f"config value {key} = {value!r} not in {sorted(act.choices)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    missing = [k for k in REQUIRED[args.command] if getattr(args, k, None) is None]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        parser.error(f"the following arguments are required: {flags}")
    return args


# ---------------------------------------------------------------------------
# helpers


def _load_wave(path):
    from .stationary import StandingWave

    wave = StandingWave.from_dict(read_json(path))
    if wave.embedded is None:
        raise PreconditionError(f"{path}: wave has no grid embedding; rerun solve with --L and --n")
    return wave


def _load_report(path):
    from .spectrum import SpectrumReport

    return SpectrumReport.from_dict(read_json(path))


def _load_perturbation(path, wave) -> Field:
    d = read_json(path)
    if "chi_re" in d:
        from .instability import _perp_with_part

        rep = _load_report(path)
        if rep.chi is None:
            raise PreconditionError(f"{path}: spectrum has no unstable eigenvector")
        return _perp_with_part(rep.chi, wave)[1]
    return Field.from_dict(d)


def _vortex_or_radial(args):
    from .stationary import solve_radial, solve_vortex

    spec = NonlinearitySpec(args.p, args.dim)
    if args.charge:
        return solve_vortex(spec, args.omega, args.charge, r_max=args.r_max, tol=args.tol,
                            points_per_unit=args.points_per_unit)
    return solve_radial(spec, args.omega, nodes=args.nodes, r_max=args.r_max, tol=args.tol,
                        points_per_unit=args.points_per_unit)


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args, man: RunManifest, cache: Cache) -> int:
    from .stationary import StandingWave

    if (args.L is None) != (args.n is None):
        raise PreconditionError("--L and --n must be given together")
    params = {k: getattr(args, k) for k in ("p", "dim", "omega", "nodes", "charge", "L", "n", "r_max", "points_per_unit", "tol", "no_polish")}
    payload = cache.get("wave", params)
    man.cache = {"kind": "wave", "key": cache.key("wave", params) if cache.enabled else None, "hit": payload is not None}
    if payload is None:
        wave = _vortex_or_radial(args)
        if args.L is not None:
            wave = wave.on_grid(Grid(args.dim, args.L, args.n), polish=not args.no_polish)
        payload = wave.to_dict()
        cache.put("wave", params, payload)
    wave = StandingWave.from_dict(payload)
    write_json(args.out, payload)
    man.fixtures = {"amplitude": float(wave.profile[0]) if wave.charge == 0 else float(np.max(wave.profile)),
                    "residual_radial": wave.residual_radial, "residual_grid": wave.residual}
    print(f"solve: {wave.kind_label} p={args.p:g} N={args.dim} omega={args.omega:g} "
          f"max|phi|={np.max(np.abs(wave.profile)):.10g} residual={wave.residual_radial:.2e}"
          + (f" grid_residual={wave.residual:.2e}" if wave.residual is not None else ""))
    return EXIT_OK


def cmd_spectrum(args, man: RunManifest, cache: Cache) -> int:
    from .spectrum import SpectrumReport, assemble, compute_spectrum

    man.add_input(args.wave)
    params = {"wave": file_digest(args.wave), "mode": args.mode, "count": args.count,
              "shift": None if args.shift is None else [args.shift.real, args.shift.imag],
              "tol": args.tol, "seed": args.seed}
    payload = cache.get("spectrum", params)
    man.cache = {"kind": "spectrum", "key": cache.key("spectrum", params) if cache.enabled else None, "hit": payload is not None}
    if payload is None:
        op = assemble(_load_wave(args.wave))
        rep = compute_spectrum(op, mode=args.mode, count=args.count, shift=args.shift, tol=args.tol, seed=args.seed)
        payload = rep.to_dict()
        cache.put("spectrum", params, payload)
    rep = SpectrumReport.from_dict(payload)
    write_json(args.out, payload)
    ls = rep.lambda_star
    man.fixtures = {"lambda_star": None if ls is None else [ls.real, ls.imag]}
    print("spectrum: " + ("no unstable eigenvalue" if ls is None else f"lambda*={ls.real:.10g}{ls.imag:+.10g}i "
                          f"residual={rep.eigen_residual:.2e}"))
    return EXIT_OK


def cmd_evolve(args, man: RunManifest, cache: Cache) -> int:
    from .instability import orbital_distance
    from .propagate import evolve_nls

    man.add_input(args.wave)
    wave = _load_wave(args.wave)
    phi = wave.embedded
    grid = phi.grid
    u0 = phi
    if args.perturb:
        man.add_input(args.perturb)
        u0 = phi + _load_perturbation(args.perturb, wave) * args.delta
    sample = args.sample if args.sample is not None else args.T / 100.0
    omega, pz = wave.omega, phi.z
    rows = {"t": [], "L2(v)": [], "Linf(v)": [], "orbital_distance": []}

    def observe(t, z):
        v = np.exp(-1j * omega * t) * z - pz
        rows["t"].append(t)
        rows["L2(v)"].append(math.sqrt(grid.cell_volume * float(np.sum(np.abs(v) ** 2))))
        rows["Linf(v)"].append(float(np.max(np.abs(v))))
        rows["orbital_distance"].append(orbital_distance(Field.from_complex(grid, z), phi).distance)
        return False

    trace = evolve_nls(u0, args.T, args.dt, wave.spec, checkpoint_every=sample, observer=observe)
    n = len(trace.times)
    write_csv(args.out, {"t": trace.times, "mass": trace.mass, "energy": trace.energy,
                         "L2(v)": rows["L2(v)"][:n], "Linf(v)": rows["Linf(v)"][:n],
                         "orbital_distance": rows["orbital_distance"][:n]})
    man.steps = int(round(trace.last_finite_time / args.dt))
    drift = abs(trace.mass[-1] - trace.mass[0]) / trace.mass[0]
    print(f"evolve: t={trace.last_finite_time:g} steps={man.steps} mass_drift={drift:.2e}")
    if trace.blew_up:
        raise _Failure(EXIT_SOLVER, f"field became non-finite after t={trace.last_finite_time:g}")
    return EXIT_OK


def cmd_instability(args, man: RunManifest, cache: Cache) -> int:
    from .instability import run_instability

    man.add_input(args.wave)
    man.add_input(args.spectrum)
    wave, rep = _load_wave(args.wave), _load_report(args.spectrum)
    res = run_instability(wave, rep, args.delta, args.eps0, dt=args.dt, t_max=args.t_max)
    write_json(args.out, res.to_dict())
    man.steps = int(round(res.times[-1] / res.dt))
    man.fixtures = res.provenance["fixtures"]
    print(f"instability: escaped={res.escaped} T={res.escape_time} fitted_rate={res.fitted_rate} "
          f"td_ok={res.td_ok} witness_ok={res.witness_ok}")
    if rep.lambda_star is not None and not res.escaped:
        raise _Failure(EXIT_ACCEPT, f"no escape by t_max={res.t_max:g} although lambda* is unstable")
    return EXIT_OK


def cmd_sweep(args, man: RunManifest, cache: Cache) -> int:
    from .instability import sweep_delta

    man.add_input(args.wave)
    man.add_input(args.spectrum)
    wave, rep = _load_wave(args.wave), _load_report(args.spectrum)
    sw = sweep_delta(wave, rep, args.deltas, args.eps0, dt=args.dt)
    rows = sw.rows()
    write_csv(args.out, {k: [r[k] for r in rows] for k in ("delta", "escape_time", "fitted_rate", "witness_at_escape")})
    man.steps = sum(int(round(r.times[-1] / r.dt)) for r in sw.runs)
    man.fixtures = {"lambda_star": None if rep.lambda_star is None else [rep.lambda_star.real, rep.lambda_star.imag],
                    "slope": sw.slope, "intercept": sw.intercept, "r2": sw.r2, "target_slope": sw.target_slope,
                    "flags": sw.flags}
    print(f"sweep: slope={sw.slope} target={sw.target_slope} r2={sw.r2} flags={sw.flags}")
    if rep.lambda_star is not None and sw.flags:
        raise _Failure(EXIT_ACCEPT, "; ".join(sw.flags))
    return EXIT_OK


def _closed_form_soliton(p, omega, grid):
    x = grid.coords[0]
    a = ((p + 1) * omega / 2) ** (1 / (p - 1))
    return a / np.cosh((p - 1) * math.sqrt(omega) * x / 2) ** (2 / (p - 1))


def cmd_verify(args, man: RunManifest, cache: Cache) -> int:
    from .propagate import evolve_nls
    from .spectrum import LinearizedOperator, assemble, kernel_check, verify_spectral_mapping
    from .stationary import solve_radial, stationary_residual

    suite = args.suite
    out: dict = {"suite": suite}
    if suite == "mapping":
        p, n, L = args.p or 7.0, args.n or 32, args.L or 8.0
        grid = Grid(1, L, n)
        phi = Field(grid, _closed_form_soliton(p, 1.0, grid), np.zeros(grid.shape))
        op = LinearizedOperator.from_field(phi, 1.0, NonlinearitySpec(p, 1))
        out.update(p=p, n=n, L=L, defect=verify_spectral_mapping(op), threshold=1e-8)
        ok = out["defect"] < 1e-8
    elif suite == "soliton":
        p, omega = args.p or 3.0, 1.0
        t0 = time.perf_counter()
        wave = solve_radial(NonlinearitySpec(p, 1), omega)
        elapsed = time.perf_counter() - t0
        exact = ((p + 1) * omega / 2) ** (1 / (p - 1)) / np.cosh((p - 1) * wave.r / 2) ** (2 / (p - 1))
        out.update(p=p, max_error=float(np.max(np.abs(wave.profile - exact))), residual=wave.residual_radial,
                   seconds=elapsed)
        ok = out["max_error"] < 1e-6 and out["residual"] < 1e-8
    elif suite == "kernel":
        p, n, L = args.p or 3.0, args.n or 512, args.L or 40.0
        wave = solve_radial(NonlinearitySpec(p, 1), 1.0).on_grid(Grid(1, L, n))
        ker = kernel_check(assemble(wave))
        out.update(p=p, n=n, L=L, residuals=ker)
        ok = ker["gauge"] < 1e-6 and ker["translation_0"] < 1e-4
    else:  # conservation
        p, n, L = args.p or 3.0, args.n or 512, args.L or 40.0
        spec = NonlinearitySpec(p, 1)
        wave = solve_radial(spec, 1.0).on_grid(Grid(1, L, n))
        rng = np.random.default_rng(args.seed)
        bump = np.exp(-wave.embedded.grid.coords[0] ** 2) * (rng.standard_normal() + 1j * rng.standard_normal())
        u0 = Field.from_complex(wave.embedded.grid, wave.embedded.z + 0.05 * bump)
        tr = evolve_nls(u0, 1.0, 1e-3, spec, checkpoint_every=1.0)
        drift = abs(tr.mass[-1] - tr.mass[0]) / tr.mass[0]
        out.update(p=p, n=n, L=L, steps=1000, mass_drift=float(drift),
                   stationary_residual=stationary_residual(wave.embedded, 1.0, spec))
        ok = drift < 1e-12
    out["pass"] = bool(ok)
    if args.out:
        write_json(args.out, out)
    print(f"verify {suite}: {'PASS' if ok else 'FAIL'} " + ", ".join(
        f"{k}={v}" for k, v in out.items() if k not in ("suite", "pass")))
    return EXIT_OK if ok else EXIT_ACCEPT


COMMANDS = {
    "solve": cmd_solve,
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "instability": cmd_instability,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def dispatch(argv=None) -> int:
    """Run one subcommand; returns the process exit status."""
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_ARGS
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    params = {k: (v if not isinstance(v, complex) else [v.real, v.imag])
              for k, v in sorted(vars(args).items()) if k not in ("verbose", "cache_dir")}
    man = RunManifest(command=args.command, parameters=params)
    if args.config:
        man.add_input(args.config)
    cache = Cache(args.cache_dir)
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        code = COMMANDS[args.command](args, man, cache)
    except _Failure as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = exc.code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except SubcriticalityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except NLSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    man.wall_clock = time.perf_counter() - t0
    out = getattr(args, "out", None)
    if out and Path(out).exists():
        man.write(out)
    return code


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
