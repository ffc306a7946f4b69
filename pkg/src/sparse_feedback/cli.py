"""Command-line front end: synthesize | realize | track | simulate | verify.

Exit codes
----------
0  success
2  usage error (argparse)
3  config or artifact parse error
4  program infeasible
5  solver stopped without meeting tolerances
6  realization failed (X_0 is not the identity)
7  tracking assumption or rank condition violated
8  singular tracking condition (det(I-(A+BK)), det(I-F) or DC gain)
9  property check failed (verify)
10 simulation diverged
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys as _sys
import time
from pathlib import Path

import numpy as np

from . import io, l1lp
from .l1lp import InfeasibleError, SolverError
from .model import AssumptionError, Compensator, SolutionPair, SynthesisSpec, Variant
from .realization import (RealizationError, closed_loop, gain_pattern, realize,
                          similarity_residual, verify_nilpotent)
from .simulate import (DivergenceError, audit_constraints, check_equivalence, default_steps,
                       run_closed_loop, run_tracking, trajectory_identities)
from .synthesis import build_program, feasibility_report, objective_value, synthesize
from .tracking import (DCGainSingularError, RankConditionError, ReferenceSignal,
                       SingularConditionError, assemble_tracking, feedforward_gains, steady_state)

EXIT_OK = 0
EXIT_PARSE = 3
EXIT_INFEASIBLE = 4
EXIT_SOLVER = 5
EXIT_REALIZE = 6
EXIT_RANK = 7
EXIT_SINGULAR = 8
EXIT_PROPERTY = 9
EXIT_DIVERGED = 10

OUT_ENV = "SPARSE_FEEDBACK_OUT"

log = logging.getLogger("sparse_feedback")


class CommandError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _default_out(name: str) -> Path:
    return Path(os.environ.get(OUT_ENV, "out")) / name


def _update_manifest(out: Path, command: str, section: dict) -> None:
    path = out / "manifest.json"
    manifest = {}
    if path.exists():
        try:
            manifest = json.loads(path.read_text())
        except ValueError:
            manifest = {}
    manifest[command] = section
    io.write_json(path, manifest)


def _load_solution_dir(path: Path):
    """Read the system record and the (X, U) pair stored in a solution directory."""
    if not path.is_dir():
        raise CommandError(EXIT_PARSE, f"{path} is not a directory")
    try:
        X = io.load_matrix(path / "X.csv")
        U = io.load_matrix(path / "U.csv")
        pair = SolutionPair(X=X, U=U)
    except (OSError, ValueError) as exc:
        raise CommandError(EXIT_PARSE, f"cannot read solution in {path}: {exc}") from exc
    cfg = None
    if (path / "system.json").exists():
        try:
            cfg = io.load_config(path / "system.json")
        except io.ConfigError as exc:
            raise CommandError(EXIT_PARSE, str(exc)) from exc
        if cfg.system.n != pair.n or cfg.system.m != pair.m or cfg.spec.N != pair.N:
            raise CommandError(EXIT_PARSE, f"{path}: X/U do not match system.json dimensions")
    return cfg, pair


def _load_gains(path: Path) -> Compensator | None:
    names = ("K", "H", "G", "F")
    if not all((path / f"{k}.csv").exists() for k in names):
        return None
    try:
        return Compensator(**{k: io.load_matrix(path / f"{k}.csv") for k in names})
    except (OSError, ValueError) as exc:
        raise CommandError(EXIT_PARSE, f"cannot read gains in {path}: {exc}") from exc


def _realize_into(path: Path, pair: SolutionPair) -> tuple[Compensator, object]:
    try:
        data = realize(pair)
    except RealizationError as exc:
        raise CommandError(EXIT_REALIZE, str(exc)) from exc
    comp = data.gains
    for name in ("K", "H", "G", "F"):
        io.save_matrix(path / f"{name}.csv", getattr(comp, name))
    io.save_matrix(path / "gain_pattern.csv", gain_pattern(comp))
    return comp, data


def _spec_with_overrides(spec: SynthesisSpec, args) -> SynthesisSpec:
    variant = getattr(args, "variant", None) or spec.variant
    norm = getattr(args, "norm", None) or spec.norm
    return SynthesisSpec(N=spec.N, s=spec.s, variant=variant, norm=norm)


def cmd_synthesize(args) -> int:
    t0 = time.perf_counter()
    try:
        cfg = io.load_config(args.config)
    except io.ConfigError as exc:
        raise CommandError(EXIT_PARSE, str(exc)) from exc
    spec = _spec_with_overrides(cfg.spec, args)
    cfg = io.Config(system=cfg.system, spec=spec, x0=cfg.x0, reference=cfg.reference,
                    source=cfg.source)
    out = Path(args.out) if args.out else _default_out(Path(args.config).stem)
    if args.dump_lp:
        with open(args.dump_lp, "w") as fh:
            l1lp.dump_program(build_program(cfg.system, spec), fh)
    try:
        pair, sol = synthesize(cfg.system, spec, tol_feas=args.tol_feas, tol_gap=args.tol_gap,
                               max_iter=args.max_iter, full_output=True)
    except InfeasibleError as exc:
        raise CommandError(EXIT_INFEASIBLE, str(exc)) from exc
    except SolverError as exc:
        raise CommandError(EXIT_SOLVER, str(exc)) from exc
    out.mkdir(parents=True, exist_ok=True)
    io.save_matrix(out / "X.csv", pair.X)
    io.save_matrix(out / "U.csv", pair.U)
    io.write_json(out / "system.json", io.system_record(cfg))
    rep = feasibility_report(pair, cfg.system, spec)
    section = {
        "input": str(args.config), "variant": spec.variant.value, "norm": spec.norm.value,
        "tolerances": {"tol_feas": args.tol_feas, "tol_gap": args.tol_gap, "max_iter": args.max_iter},
        "objective": pair.objective, "dual_objective": sol.dual_objective,
        "iterations": sol.iterations,
        "residuals": {"dynamics": rep.dynamics, "initial": rep.initial,
                      "output_violation": rep.output_violation},
        "dims": {"n": cfg.system.n, "m": cfg.system.m, "p": cfg.system.p, "N": spec.N},
        "artifacts": ["X.csv", "U.csv", "system.json"] + ([str(args.dump_lp)] if args.dump_lp else []),
        "wall_clock_s": time.perf_counter() - t0,
    }
    _update_manifest(out, "synthesize", section)
    print(f"objective {pair.objective:.10g}")
    print(f"residuals dynamics={rep.dynamics:.3g} initial={rep.initial:.3g} "
          f"output={rep.output_violation:.3g}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_realize(args) -> int:
    t0 = time.perf_counter()
    path = Path(args.solution)
    cfg, pair = _load_solution_dir(path)
    comp, data = _realize_into(path, pair)
    section = {"realization_residual": data.residual,
               "artifacts": ["K.csv", "H.csv", "G.csv", "F.csv", "gain_pattern.csv"]}
    print(f"realization residual {data.residual:.3g}")
    if cfg is not None:
        sim = similarity_residual(closed_loop(cfg.system, comp), data.Psi, pair.n, pair.N)
        section["similarity_residual"] = sim
        print(f"similarity residual |Acl Psi - Psi (P kron I)| = {sim:.3g}")
    section["wall_clock_s"] = time.perf_counter() - t0
    _update_manifest(path, "realize", section)
    return EXIT_OK


def cmd_track(args) -> int:
    t0 = time.perf_counter()
    try:
        cfg = io.load_config(args.config)
    except io.ConfigError as exc:
        raise CommandError(EXIT_PARSE, str(exc)) from exc
    path = Path(args.solution)
    _, pair = _load_solution_dir(path)
    comp = _load_gains(path)
    if comp is None:
        comp, _ = _realize_into(path, pair)
    sys = cfg.system
    try:
        ff = feedforward_gains(sys, comp, pair.X_t(1) if pair.N > 1 else None)
    except (AssumptionError, RankConditionError) as exc:
        raise CommandError(EXIT_RANK, str(exc)) from exc
    except (SingularConditionError, DCGainSingularError) as exc:
        raise CommandError(EXIT_SINGULAR, str(exc)) from exc
    io.save_matrix(path / "M.csv", ff.M)
    io.save_matrix(path / "L.csv", ff.L)
    if args.ref is not None:
        r_plus = np.array(args.ref, dtype=float)
    elif cfg.reference is not None:
        r_plus = cfg.reference.r_plus
    else:
        r_plus = np.ones(sys.m)
    tcomp = assemble_tracking(comp, ff.M, ff.L)
    ss = steady_state(sys, tcomp, r_plus)
    section = {
        "input": str(args.config),
        "determinants": {"I-(A+BK)": ff.det_closed, "I-F": ff.det_comp, "I-X1": ff.det_x1},
        "M": ff.M, "L": ff.L,
        "steady_state": {"r_plus": r_plus, "x_inf": ss.x_inf, "z_inf": ss.z_inf, "y_inf": ss.y_inf},
        "artifacts": ["M.csv", "L.csv"],
        "wall_clock_s": time.perf_counter() - t0,
    }
    _update_manifest(path, "track", section)
    print(f"det(I-(A+BK)) = {ff.det_closed:.6g}   det(I-F) = {ff.det_comp:.6g}")
    print("M =", np.array2string(ff.M, precision=6))
    print("L^T =", np.array2string(ff.L.T, precision=6))
    print("steady state y_inf =", np.array2string(ss.y_inf, precision=10),
          " max|z_inf| =", f"{np.abs(ss.z_inf).max(initial=0.0):.3g}")
    return EXIT_OK


def _system_from(path: Path, config: str | None):
    if config is not None:
        try:
            return io.load_config(config)
        except io.ConfigError as exc:
            raise CommandError(EXIT_PARSE, str(exc)) from exc
    if not (path / "system.json").exists():
        raise CommandError(EXIT_PARSE, f"{path} has no system.json; pass --config")
    cfg, _ = _load_solution_dir(path)
    return cfg


def cmd_simulate(args) -> int:
    path = Path(args.solution)
    cfg = _system_from(path, args.config)
    sys = cfg.system
    comp = _load_gains(path)
    if comp is None:
        _, pair = _load_solution_dir(path)
        comp, _ = _realize_into(path, pair)
    if args.x0 is not None:
        x0 = np.array(args.x0, dtype=float)
    elif cfg.x0 is not None:
        x0 = cfg.x0
    else:
        x0 = np.zeros(sys.n)
    if x0.size != sys.n:
        raise CommandError(EXIT_PARSE, f"--x0 needs {sys.n} values")
    steps = args.steps or default_steps(cfg.spec.N)
    try:
        if args.ref is not None:
            try:
                tcomp = assemble_tracking(comp, io.load_matrix(path / "M.csv"),
                                          io.load_matrix(path / "L.csv"))
            except OSError as exc:
                raise CommandError(EXIT_PARSE, "tracking simulation needs M.csv and L.csv "
                                               "(run 'track' first)") from exc
            traj = run_tracking(sys, tcomp, x0, ReferenceSignal(args.ref), steps)
        else:
            traj = run_closed_loop(sys, comp, x0, steps)
    except DivergenceError as exc:
        raise CommandError(EXIT_DIVERGED, str(exc)) from exc
    out = Path(args.out) if args.out else path / "trajectory.csv"
    traj.to_csv(out)
    N = cfg.spec.N
    audit = audit_constraints(traj, cfg.spec.s)
    print(f"wrote {out} ({steps + 1} rows)")
    print("constraint overshoot per output:", np.array2string(audit, precision=3))
    if traj.r is None and steps >= N:
        print(f"|x(N)|_inf = {np.abs(traj.x[N]).max():.3g}")
    if traj.r is not None:
        print(f"final |e|_inf = {np.abs(traj.error[-1]).max():.3g}")
    return EXIT_OK


def cmd_verify(args) -> int:
    path = Path(args.solution)
    cfg, pair = _load_solution_dir(path)
    if cfg is None:
        raise CommandError(EXIT_PARSE, f"{path} has no system.json")
    sys, spec = cfg.system, cfg.spec
    comp = _load_gains(path)
    try:
        data = realize(pair)
    except RealizationError as exc:
        raise CommandError(EXIT_REALIZE, str(exc)) from exc
    if comp is None:
        comp = data.gains
    results = []

    def record(name, value, tol, ok=None):
        ok = value <= tol if ok is None else ok
        results.append((name, ok, value, tol))

    rep = feasibility_report(pair, sys, spec)
    record("constraints: dynamics residual", rep.dynamics, args.tol)
    record("constraints: X_0 = I", rep.initial, args.tol)
    record("constraints: output bounds", rep.output_violation, args.tol)
    aug = closed_loop(sys, comp)
    record("similarity Acl Psi = Psi (P kron I)", similarity_residual(aug, data.Psi, pair.n, pair.N),
           args.tol)
    nil = verify_nilpotent(aug, pair.N, Psi=data.Psi, similarity_tol=args.tol)
    record("nilpotent closed loop", nil.similarity_residual, args.tol, nil.passed)
    ident = trajectory_identities(sys, pair, comp)
    record("trajectory identities", ident.worst, args.tol)
    eq = check_equivalence(sys, spec, pair, comp, input_tol=args.tol)
    worst_in = max(c.input_residual for c in eq.checks)
    record("closed-loop inputs reproduce U", worst_in, args.tol)
    if any(c.value_match is not None for c in eq.checks):
        worst_rel = max(abs(c.closed_cost - c.open_cost) / max(1.0, abs(c.open_cost))
                        if c.open_cost is not None else np.inf for c in eq.checks)
        record("open/closed-loop l1 values agree", worst_rel, 1e-6)
    if spec.bounded and spec.variant is Variant.SPARSE:
        worst = 0.0
        for i in range(sys.n):
            traj = run_closed_loop(sys, comp, np.eye(sys.n)[i], pair.N)
            worst = max(worst, float(audit_constraints(traj, spec.s, steps=pair.N).max()))
        record("basis trajectories within output bounds", worst, args.tol)
    deadbeat = 0.0
    for i in range(sys.n):
        traj = run_closed_loop(sys, comp, np.eye(sys.n)[i], pair.N)
        deadbeat = max(deadbeat, float(np.abs(traj.x[pair.N]).max()))
    record("deadbeat x(N) = 0", deadbeat, 1e-6)
    if (path / "M.csv").exists() and (path / "L.csv").exists():
        tcomp = assemble_tracking(comp, io.load_matrix(path / "M.csv"), io.load_matrix(path / "L.csv"))
        r_plus = cfg.reference.r_plus if cfg.reference is not None else np.ones(sys.m)
        ss = steady_state(sys, tcomp, r_plus)
        record("steady state y_inf = r_plus", float(np.abs(ss.y_inf - r_plus).max()), 1e-8)
        record("steady state z_inf = 0", float(np.abs(ss.z_inf).max(initial=0.0)), 1e-8)

    failed = 0
    for name, ok, value, tol in results:
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {value:.3g} (tol {tol:g})")
    print(f"objective {objective_value(pair, spec):.10g} ({spec.variant.value}, {spec.norm.value})")
    return EXIT_OK if failed == 0 else EXIT_PROPERTY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparse-feedback",
                                     description="Sparse dynamic feedback controller synthesis.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="solve the sparse matrix program for (X, U)")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--variant", choices=[v.value for v in Variant])
    p.add_argument("--norm", choices=["sum", "max_row"])
    p.add_argument("--tol-feas", type=float, default=1e-8)
    p.add_argument("--tol-gap", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--dump-lp", metavar="FILE", help="write the lifted program as text")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("realize", help="compute compensator gains from X.csv/U.csv")
    p.add_argument("solution")
    p.set_defaults(func=cmd_realize)

    p = sub.add_parser("track", help="feedforward gains M, L for step tracking")
    p.add_argument("config")
    p.add_argument("solution")
    p.add_argument("--ref", type=float, nargs="+", help="r_plus used for the steady-state report")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("simulate", help="write a closed-loop trajectory CSV")
    p.add_argument("solution")
    p.add_argument("--config")
    p.add_argument("--x0", type=float, nargs="+")
    p.add_argument("--ref", type=float, nargs="+")
    p.add_argument("--steps", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="check closed-loop properties of a solution directory")
    p.add_argument("solution")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return exc.code


if __name__ == "__main__":
    _sys.exit(main())
