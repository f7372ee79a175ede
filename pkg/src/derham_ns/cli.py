"""Command line entry point: ``derham-ns {solve|radial|selfsim|norms|verify}``."""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import cases, radial, solver, spaces, verify
from . import exterior as ext
from .errors import DerhamError, FieldFileError, NoBracket
from .io import FieldFile, RunConfig, load_config, write_csv, write_manifest
from .nonlinearity import NonlinearitySpec, builtin
from .potentials import HeatParams, Trajectory

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MAXITER = 2
EXIT_BLOWUP = 3
EXIT_VERIFY = 4


class UsageError(DerhamError):
    pass


def _need(value, what: str):
    if value is None:
        raise UsageError(f"config is missing {what}")
    return value


# ---------------------------------------------------------------------------
# config -> problem

def build_nonlinearity(cfg: RunConfig) -> NonlinearitySpec:
    p = cfg.problem
    nl = _need(p.nonlinearity, "problem.nonlinearity")
    if nl.tensor_file:
        doc = json.loads(Path(nl.tensor_file).read_text())
        spec = NonlinearitySpec.from_dict(doc)
        if (spec.n, spec.q) != (p.n, p.q):
            raise UsageError(f"tensor file is for (n, q) = {(spec.n, spec.q)}, problem has {(p.n, p.q)}")
        return spec
    name = _need(nl.name, "problem.nonlinearity.name or tensor_file")
    if name == "zero":
        return NonlinearitySpec.zero(p.n, p.q)
    if p.q != 1:
        raise UsageError(f"built-in {name!r} acts on 1-forms, problem has q = {p.q}")
    return builtin(name, p.n, nl.b)


def _radial_fn(kind: str, amplitude: float, width: float | None = None):
    if kind == "power":
        return radial.power_profile(amplitude)
    return radial.gaussian_profile(amplitude, width or 1.0)


def build_initial(cfg: RunConfig) -> ext.GridForm:
    p, g = cfg.problem, _need(cfg.grid, "grid")
    n, q, N, L = p.n, p.q, g.N, g.L
    data = _need(p.data, "problem.data")
    u0 = data.u0
    if u0.kind == "zero":
        return ext.GridForm.zeros(n, q, N, L)
    if u0.kind == "gaussian":
        return cases.gaussian(n, q, N, L, u0.sigma, u0.amplitude, u0.component)
    if q != 1:
        raise UsageError(f"initial data {u0.kind!r} is a 1-form, problem has q = {q}")
    if u0.kind == "taylor_green":
        return cases.taylor_green_u(n, N, L)
    if u0.kind == "burgers_cole_hopf":
        return cases.cole_hopf_u(n, N, L, 0.0, p.mu, u0.c)
    if u0.kind == "radial":
        R = math.sqrt(n) * L * 1.01
        prof = radial.RadialProfile.from_function(n, R, 16 * N, _radial_fn(u0.profile, u0.amplitude))
        return radial.lift_radial(prof, N, L)
    if u0.kind == "random_solenoidal":
        return cases.random_solenoidal(n, N, L, u0.seed, u0.amplitude, u0.envelope)
    if u0.kind == "file":
        ff = FieldFile.read(u0.path)
        if (ff.n, ff.q, ff.N) != (n, q, N) or not math.isclose(ff.L, L):
            raise UsageError(f"field file {u0.path} does not match the problem grid")
        return ext.GridForm(n, q, N, L, ff.data[u0.slice].copy())
    raise UsageError(f"unknown initial data kind {u0.kind!r}")


def build_forcing(cfg: RunConfig, heat: HeatParams) -> Trajectory | None:
    p, g = cfg.problem, cfg.grid
    f = p.data.f if p.data else None
    if f is None or f.kind == "zero":
        return None
    ff = FieldFile.read(f.path)
    if (ff.n, ff.q, ff.N, ff.nt) != (p.n, p.q, g.N, p.nt):
        raise UsageError(f"forcing file {f.path} does not match the problem grid and time grid")
    return Trajectory(p.n, p.q, g.N, g.L, heat, ff.data)


def build_problem(cfg: RunConfig) -> solver.ProblemSpec:
    p = cfg.problem
    g = _need(cfg.grid, "grid")
    nc = _need(cfg.norms, "norms")
    heat = HeatParams(p.mu, p.T, p.nt)
    norms = spaces.NormParams(nc.s, nc.lam, nc.delta, nc.lam_prime, nc.k or 0)
    sc = cfg.solver
    return solver.ProblemSpec(
        p.n, p.q, p.a, heat, build_nonlinearity(cfg), g.N, g.L, build_initial(cfg),
        f=build_forcing(cfg, heat), norms=norms, tol=sc.tol, max_iter=sc.max_iter, theta=sc.theta,
        blowup_threshold=sc.blowup_threshold, metric=sc.metric, periodic=g.periodic)


def _out_dir(cfg: RunConfig, override: str | None) -> Path:
    out = Path(override or cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands

def _reference_errors(cfg: RunConfig, spec: solver.ProblemSpec, res: solver.SolveResult) -> dict:
    kind = cfg.problem.data.u0.kind if cfg.problem.data else None
    nl = spec.nonlinearity
    out = {}
    if spec.f is not None:
        return out
    T, mu = spec.heat.T, spec.heat.mu
    if kind == "taylor_green" and nl.name == "ps" and spec.a == 1:
        exact = cases.taylor_green_u(spec.n, spec.N, spec.L, T, mu)
        out["reference_error_u"] = float(np.max(np.abs(res.u.data[-1] - exact.data)))
        if nl.b == 1.0 and res.p is not None and spec.n == 2:
            p = res.p.data[-1, 0]
            out["reference_error_p"] = float(np.max(np.abs(
                p - p.mean() - cases.taylor_green_p(spec.n, spec.N, spec.L, T, mu))))
    if kind == "burgers_cole_hopf" and nl.name == "ps" and spec.a == 0:
        exact = cases.cole_hopf_u(spec.n, spec.N, spec.L, T, mu, cfg.problem.data.u0.c)
        out["reference_error_u"] = float(np.max(np.abs(res.u.data[-1] - exact.data)))
    return out


def cmd_solve(cfg: RunConfig, out: Path) -> int:
    t0 = time.perf_counter()
    spec = build_problem(cfg)
    t_build = time.perf_counter() - t0
    res = solver.picard_solve(spec)
    stride = cfg.output.snapshot_stride
    idx = list(range(0, spec.heat.nt, stride))
    times = spec.heat.times
    if res.status is not solver.Status.BLOWUP:
        FieldFile(spec.n, spec.q, spec.N, spec.L, float(times[idx[-1]]), res.u.data[idx]).write(out / "u.drns")
        if res.p is not None:
            FieldFile(spec.n, spec.q - 1, spec.N, spec.L, float(times[idx[-1]]), res.p.data[idx]).write(out / "p.drns")
    cols = ["section", "index", "t", "residual", "change", "theta", "norm", "div_ratio",
            "energy", "dissipation", "energy_residual", "sup", "weighted_sup"]
    rows = []
    for h in res.history:
        rows.append(["iter", h["iter"], None, h["residual"], h["change"], h["theta"], h["norm"],
                     h["div_ratio"], None, None, None, h["sup"], None])
    d = res.diagnostics
    for i, t in enumerate(times):
        rows.append(["slice", i, t, None, None, None, None, None,
                     *(d[k][i] if k in d else None for k in ("energy", "dissipation", "energy_residual",
                                                              "sup", "weighted_sup"))])
    write_csv(out / "diagnostics.csv", cols, rows)
    extra = {"iterations": res.iterations, "final_change": res.final_change, "t_star": res.t_star,
             "norms": res.norms, "snapshot_indices": idx}
    extra.update(_reference_errors(cfg, spec, res))
    write_manifest(out / "manifest.json", cfg, "solve", res.status.value,
                   {"build": t_build, "solve": res.elapsed, "total": time.perf_counter() - t0}, extra)
    print(f"status {res.status.value} after {res.iterations} iterations, change {res.final_change:.3e}"
          + (f", t* = {res.t_star:.6g}" if res.t_star is not None else ""))
    return {solver.Status.CONVERGED: EXIT_OK, solver.Status.MAX_ITER: EXIT_MAXITER,
            solver.Status.BLOWUP: EXIT_BLOWUP}[res.status]


def cmd_radial(cfg: RunConfig, out: Path) -> int:
    t0 = time.perf_counter()
    p = cfg.problem
    rc = _need(cfg.radial, "radial")
    nr, R = _need(rc.nr, "radial.nr"), _need(rc.R, "radial.R")
    dt = rc.dt or radial.max_stable_dt(p.n, R / nr, nr)
    prof = _need(rc.profile, "radial.profile")
    sweep, snaps = [], []
    for A in prof.amplitudes:
        v0 = radial.RadialProfile.from_function(p.n, R, nr, _radial_fn(prof.kind, A, prof.width))
        if abs(v0.values[-1]) >= 1e-10:
            print(f"warning: initial data at R is {v0.values[-1]:.2e}; enlarge R", file=sys.stderr)
        run = radial.radial_evolve(v0, p.T, dt, snapshot_every=rc.snapshot_every)
        sweep.append([A, run.status, run.t_star, run.max_v[-1]])
        for s in run.snapshots:
            snaps.extend([A, s.t, r, v] for r, v in zip(s.r, s.values))
        print(f"A = {A:g}: {run.status}" + (f" at t* = {run.t_star:.6g}" if run.t_star is not None else ""))
    write_csv(out / "radial_sweep.csv", ["amplitude", "status", "t_star", "max_v"], sweep)
    write_csv(out / "radial_profiles.csv", ["amplitude", "t", "r", "v"], snaps)
    blew = any(row[1] == "BlowUp" for row in sweep)
    write_manifest(out / "manifest.json", cfg, "radial", "BlowUp" if blew else "Completed",
                   {"total": time.perf_counter() - t0},
                   {"sweep": [{"amplitude": a, "status": s, "t_star": t} for a, s, t, _ in sweep]})
    return EXIT_BLOWUP if blew else EXIT_OK


def cmd_selfsim(cfg: RunConfig, out: Path) -> int:
    t0 = time.perf_counter()
    p = cfg.problem
    rc = _need(cfg.radial, "radial")
    gamma, y_max = _need(rc.gamma, "radial.gamma"), _need(rc.y_max, "radial.y_max")
    coeff = 2.0 if rc.coeff_2kw else 1.0
    status = "ok"
    try:
        if gamma == 0 or rc.kappa is not None:
            prof = radial.selfsim_integrate(gamma, rc.kappa or 1.0, y_max, p.n, coeff,
                                            y_eval=np.linspace(radial.Y0, y_max, 201))
        else:
            prof = radial.selfsim_shoot(gamma, p.n, y_max, coeff)
    except NoBracket as exc:
        print(f"shooting failed: {exc}", file=sys.stderr)
        write_manifest(out / "manifest.json", cfg, "selfsim", "NoBracket", {"total": time.perf_counter() - t0})
        return EXIT_MAXITER
    write_csv(out / "selfsim.csv", ["gamma", "kappa", "c", "residual", "matched", "y_match"],
              [[prof.gamma, prof.kappa, prof.c, prof.residual, prof.matched, prof.y_match]])
    write_csv(out / "profile.csv", ["y", "w", "dw"], zip(prof.y, prof.w, prof.dw))
    write_manifest(out / "manifest.json", cfg, "selfsim", status, {"total": time.perf_counter() - t0},
                   {"gamma": prof.gamma, "kappa": prof.kappa, "c": prof.c, "residual": prof.residual,
                    "matched": prof.matched, "flag": prof.flag})
    print(f"gamma {prof.gamma:g}  kappa {prof.kappa:.10g}  c {prof.c:.8g}  residual {prof.residual:.2e}")
    return EXIT_OK


def cmd_norms(cfg: RunConfig, out: Path, field_path: str | None) -> int:
    t0 = time.perf_counter()
    if not field_path:
        raise UsageError("norms needs --field <file.drns>")
    ff = FieldFile.read(field_path)
    nc = _need(cfg.norms, "norms")
    periodic = cfg.grid.periodic if cfg.grid else False
    params = spaces.NormParams(nc.s, nc.lam, nc.delta, nc.lam_prime, nc.k or 0)
    rows = []
    for i in range(ff.nt):
        u = ext.GridForm(ff.n, ff.q, ff.N, ff.L, ff.data[i])
        rep = spaces.hoelder_norm(u, params, check_decay=not periodic)
        rows += [["slice", i, k, v] for k, v in rep.to_dict().items()]
        rows.append(["slice_lp2", i, "L2", spaces.lp_norm(u, 2.0)])
    if ff.nt >= 2:
        heat = HeatParams(cfg.problem.mu, ff.T if ff.T > 0 else 1.0, ff.nt)
        traj = Trajectory(ff.n, ff.q, ff.N, ff.L, heat, ff.data)
        if ff.nt >= 2 * params.s + 2:
            rows += [["aniso", "", k, v] for k, v in
                     spaces.aniso_norm(traj, params, check_decay=not periodic).to_dict().items()]
            if params.lam_prime is not None:
                rows += [["F", "", k, v] for k, v in
                         spaces.f_norm(traj, params, check_decay=not periodic).to_dict().items()]
    write_csv(out / "norms.csv", ["scope", "slice", "term", "value"], rows)
    write_manifest(out / "manifest.json", cfg, "norms", "ok", {"total": time.perf_counter() - t0},
                   {"field": str(field_path)})
    return EXIT_OK


def cmd_verify(out: Path | None) -> int:
    checks = verify.run_suite()
    print(verify.format_table(checks))
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "verify.csv", ["check", "value", "tol", "passed", "seconds"],
                  [[c.name, c.value, c.tol, c.passed, c.seconds] for c in checks])
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


# ---------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="derham-ns", description=__doc__)
    ap.add_argument("command", choices=["solve", "radial", "selfsim", "norms", "verify"])
    ap.add_argument("--config", help="run configuration (JSON)")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--field", help="field file for the norms command")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command == "verify":
            return cmd_verify(Path(args.out) if args.out else None)
        if not args.config:
            raise UsageError(f"{args.command} needs --config")
        cfg = load_config(args.config)
        out = _out_dir(cfg, args.out)
        if args.command == "solve":
            return cmd_solve(cfg, out)
        if args.command == "radial":
            return cmd_radial(cfg, out)
        if args.command == "selfsim":
            return cmd_selfsim(cfg, out)
        return cmd_norms(cfg, out, args.field)
    except (DerhamError, FieldFileError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
