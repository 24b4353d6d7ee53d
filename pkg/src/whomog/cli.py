"""Command-line entry point: ``whomog {cell,macro,micro,sweep,check}``.

Exit codes: 0 success, 2 validation failure, 3 numerical failure,
4 non-monotone convergence (sweep only).
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .cell import CellProblem, assemble_effective_tensor, solve_cell_problems
from .config import RunConfig, parse_config, serialize_config
from .errors import (
    CertificateFailure,
    ConsistencyError,
    DomainMismatch,
    EvaluationError,
    GeometryError,
    MeshGenerationFailure,
    NonMonotoneConvergence,
    ParseError,
    SingularSystem,
    SolverDivergence,
    StabilityWarning,
    TopologyError,
    ValidationError,
)
from .geometry import Y1, Y2, UnitCellGeometry, build_cell_mesh, build_epsilon_tiling, unit_square_mesh
from .macro import MACRO_COLUMNS, AveragedReactions, CellQuadrature, build_macro_system, initial_state
from .macro import run as macro_run
from .micro import MICRO_COLUMNS, build_wentzell_system, initial_micro_state, micro_run
from .models import (
    check_lipschitz,
    constant_diffusion,
    constant_initial_data,
    exchange,
    linear_decay,
    logistic_truncated,
    no_reaction,
    periodic_diffusion,
    smooth_initial_data,
)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_NONMONOTONE = 0, 2, 3, 4

_VALIDATION = (ParseError, ValidationError, GeometryError, TopologyError, MeshGenerationFailure, DomainMismatch)
_NUMERICAL = (SolverDivergence, SingularSystem, CertificateFailure, EvaluationError, ConsistencyError)


# --------------------------------------------------------------------------
# config -> model objects


def geometry_from(cfg: RunConfig) -> UnitCellGeometry:
    return UnitCellGeometry(center=(cfg["geometry.center_x"], cfg["geometry.center_y"]),
                            radius=cfg["geometry.radius"], clearance=cfg["geometry.clearance"])


def diffusion_from(cfg: RunConfig):
    args = (cfg["model.d1"], cfg["model.d2"], cfg["model.dg1"], cfg["model.dg2"])
    if cfg["model.diffusion"] == "periodic":
        return periodic_diffusion(*args, amplitude=cfg["model.diffusion_amplitude"])
    return constant_diffusion(*args)


def reactions_from(cfg: RunConfig):
    kind = cfg["model.reaction"]
    if kind == "none":
        spec = no_reaction()
    elif kind == "linear":
        spec = linear_decay(cfg["model.rate1"], cfg["model.rate2"])
    elif kind == "exchange":
        spec = exchange(cfg["model.kappa"], cfg["model.kappa_amplitude"])
    else:
        spec = logistic_truncated(cfg["model.rate"], cfg["model.kappa"], cfg["model.kappa_amplitude"])
    if cfg["model.lipschitz"] >= 0:
        spec = spec.with_lipschitz(cfg["model.lipschitz"])
    return spec


def initial_from(cfg: RunConfig):
    if cfg["model.initial"] == "constant":
        return constant_initial_data(cfg["model.c1"], cfg["model.c2"])
    return smooth_initial_data()


def load_config(args) -> RunConfig:
    text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
    cfg = parse_config(text, command=args.command)
    for item in args.set or []:
        if "=" not in item:
            raise ParseError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        cfg.set(k.strip(), v.strip())
    if getattr(args, "epsilon", None):
        cfg.set("micro.epsilon", args.epsilon)
    if args.out:
        cfg.set("output.dir", args.out)
    return cfg


def _say(msg):
    print(msg, flush=True)


# --------------------------------------------------------------------------
# commands


def cmd_cell(cfg: RunConfig):
    out = Path(cfg["output.dir"])
    cell = build_cell_mesh(geometry_from(cfg), cfg["cell.h"])
    problem = CellProblem.build(cell, diffusion_from(cfg))
    sol = solve_cell_problems(problem, rtol=cfg["cell.rtol"])
    tensor = assemble_effective_tensor(sol)
    rows = [{"i": i, "l": l, "value": tensor.entries[i, l]} for i in range(2) for l in range(2)]
    io.write_csv(rows, out / "effective_tensor.csv", ("i", "l", "value"))
    io.write_mesh(cell, out / "cell.mesh")
    io.write_mesh(problem.mesh, out / "cell_y1.mesh")
    for i in range(2):
        io.write_field(sol.w[i], out / f"corrector_w{i + 1}.field", name=f"w{i + 1}")
    _say(f"D_hat = [[{tensor.entries[0, 0]:.10g}, {tensor.entries[0, 1]:.3g}], "
         f"[{tensor.entries[1, 0]:.3g}, {tensor.entries[1, 1]:.10g}]]")
    _say(f"certificate: {json.dumps(tensor.certificate)}; residuals {sol.residual_norm.tolist()}")
    return EXIT_OK


def cmd_macro(cfg: RunConfig):
    out = Path(cfg["output.dir"])
    cell = build_cell_mesh(geometry_from(cfg), cfg["macro.cell_h"])
    diffusion = diffusion_from(cfg)
    tensor = assemble_effective_tensor(solve_cell_problems(CellProblem.build(cell, diffusion)))
    quad = CellQuadrature.from_cell(cell)
    mesh = unit_square_mesh(round(1 / cfg["macro.h"]))
    system = build_macro_system(mesh, tensor, AveragedReactions(reactions_from(cfg), quad))
    T = cfg["macro.T"]
    times = cfg.output_times(T)
    run = macro_run(system, initial_state(initial_from(cfg), quad, mesh), cfg["macro.dt"], T, times)
    for t, st in zip(run.times, run.states):
        io.write_field(st.u1, out / f"macro_u1_{io.time_tag(t)}.field", name="u1", t=t)
        io.write_field(st.u2, out / f"macro_u2_{io.time_tag(t)}.field", name="u2", t=t)
    io.write_mesh(mesh, out / "macro.mesh")
    io.write_csv(run.diagnostics, out / "diagnostics.csv", MACRO_COLUMNS)
    d0, d1 = run.diagnostics[0], run.diagnostics[-1]
    _say(f"macro: {len(run.diagnostics) - 1} steps, mass1 {d0['mass1']:.12g} -> {d1['mass1']:.12g}, "
         f"mass2 {d0['mass2']:.12g} -> {d1['mass2']:.12g}")
    return EXIT_OK


def cmd_micro(cfg: RunConfig):
    out = Path(cfg["output.dir"])
    cell = build_cell_mesh(geometry_from(cfg), cfg["micro.cell_h"])
    tiling = build_epsilon_tiling(cell, cfg["micro.epsilon"])
    system = build_wentzell_system(tiling, diffusion_from(cfg))
    T = cfg["micro.T"]
    run = micro_run(system, reactions_from(cfg), initial_micro_state(system, initial_from(cfg)),
                    cfg["micro.dt"], T, cfg.output_times(T), theta=cfg["micro.theta"])
    for t, st in zip(run.times, run.states):
        io.write_field(st.u1, out / f"micro_u1_{io.time_tag(t)}.field", name="u1", t=t)
        io.write_field(st.u2, out / f"micro_u2_{io.time_tag(t)}.field", name="u2", t=t)
    io.write_mesh(tiling.meshes[Y1], out / "micro_y1.mesh")
    io.write_mesh(tiling.meshes[Y2], out / "micro_y2.mesh")
    io.write_csv(run.diagnostics, out / "micro_diagnostics.csv", MICRO_COLUMNS)
    _say(f"micro eps=1/{tiling.n}: {tiling.meshes[Y1].n_vertices}+{tiling.meshes[Y2].n_vertices} nodes, "
         f"||u1||_L2(H) = {run.hje_l2[0]:.6g}, ||u2||_L2(H) = {run.hje_l2[1]:.6g}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig):
    from .twoscale import REPORT_COLUMNS, SweepSettings, convergence_sweep, shift_check

    out = Path(cfg["output.dir"])
    settings = SweepSettings(
        epsilons=tuple(cfg["sweep.epsilons"]), cell_h=cfg["sweep.cell_h"],
        macro_n=round(1 / cfg["sweep.macro_h"]), dt=cfg["sweep.dt"], T=cfg["sweep.T"],
        snapshots=cfg["sweep.snapshots"], ratio=cfg["sweep.ratio"],
    )
    cell = build_cell_mesh(geometry_from(cfg), settings.cell_h)
    report = convergence_sweep(
        settings, cell, reactions_from(cfg), diffusion_from(cfg), initial_from(cfg),
        progress=lambda r: _say("eps=%-8g " % r["epsilon"] + " ".join(f"{k}={r[k]:.4e}" for k in REPORT_COLUMNS[1:])),
        workers=io.env_threads(),
    )
    io.write_csv(report.rows, out / "convergence_report.csv", REPORT_COLUMNS)
    io.write_dat(report.rows, out / "convergence_report.dat", REPORT_COLUMNS)
    orders = report.observed_orders()
    _say("observed orders: " + ", ".join(f"{k}={np.round(v, 2).tolist()}" for k, v in orders.items()))
    if report.e2_exponent != 2.0:
        _say(f"e2_bulk measured in L^{report.e2_exponent}")
    C, worst, ok = shift_check(report)
    _say(f"shift diagnostic: C={C:.4g} calibrated at eps={max(report.shift):g}, "
         f"worst ratio at eps={min(report.shift):g} is {worst:.4g} ({'ok' if ok else 'violated'})")
    bad = report.monotone_failures(settings.ratio)
    if bad:
        for c, e, r in bad:
            _say(f"non-monotone: {c} at eps={e:g}, ratio {r:.3f}; refine the cell mesh, macro mesh or dt")
        return EXIT_NONMONOTONE
    return EXIT_OK


def run_checks(cfg: RunConfig, mesh_files=()):
    """All module-level invariant checks; returns a list of (name, ok, detail)."""
    from .fem import trace_inequality_check
    from .micro import default_trace_constant
    from .twoscale import (
        nonlinear_compatibility_defect,
        norm_identity_defect,
        trace_commutation_defect,
        unfold_gradient_identity_check,
    )

    results = []

    def record(name, ok, detail):
        results.append((name, bool(ok), detail))

    for path in mesh_files:
        try:
            m = io.read_mesh(path)
            record(f"mesh file {path}", True, f"{m.n_vertices} vertices")
        except (TopologyError, ParseError) as exc:
            record(f"mesh file {path}", False, f"{type(exc).__name__}: {exc}")

    rng = np.random.default_rng(cfg["run.seed"])
    geom = geometry_from(cfg)
    cell = build_cell_mesh(geom, cfg["cell.h"])
    cell.validate()
    record("cell mesh", True, f"{cell.n_vertices} vertices, h={cell.h:.3g}")
    a1, a2 = cell.area(Y1), cell.area(Y2)
    record("cell areas sum to one", abs(a1 + a2 - 1) < 1e-12, f"|Y1|+|Y2|-1 = {a1 + a2 - 1:.2e}")

    diffusion = diffusion_from(cfg)
    try:
        diffusion.check()
        record("diffusion symmetric and coercive", True, f"c0={diffusion.c0}")
    except EvaluationError as exc:
        record("diffusion symmetric and coercive", False, str(exc))
    try:
        t = assemble_effective_tensor(solve_cell_problems(CellProblem.build(cell, diffusion)))
        record("effective tensor certificate", True, json.dumps(t.certificate))
    except CertificateFailure as exc:
        record("effective tensor certificate", False, str(exc))

    spec = reactions_from(cfg)
    observed, ok = check_lipschitz(spec, rng=cfg["run.seed"])
    record("reaction Lipschitz bound", ok, f"declared {spec.lipschitz_bound:.4g}, observed {observed:.4g}")

    n_fields = cfg["check.fields"]
    theta = cfg["micro.theta"]
    for eps in cfg["sweep.epsilons"]:
        tiling = build_epsilon_tiling(cell, eps)
        worst_n, worst_g, worst_s, worst_c = 0.0, 0.0, 0.0, 0.0
        for _ in range(n_fields):
            u1 = rng.standard_normal(tiling.meshes[Y1].n_vertices)
            worst_n = max(worst_n, norm_identity_defect(u1, tiling, "Y1"))
            worst_g = max(worst_g, unfold_gradient_identity_check(u1, tiling, "Y1"))
            worst_s = max(worst_s, norm_identity_defect(u1[tiling.surfaces[Y1].node_ids], tiling, "Gamma1"))
            worst_c = max(worst_c, trace_commutation_defect(u1, tiling))
        record(f"unfolding norm identity eps=1/{tiling.n}", worst_n <= 1e-10, f"max rel defect {worst_n:.2e}")
        record(f"unfolding surface identity eps=1/{tiling.n}", worst_s <= 1e-10, f"max rel defect {worst_s:.2e}")
        record(f"unfolding gradient identity eps=1/{tiling.n}", worst_g <= 1e-12, f"max defect {worst_g:.2e}")
        record(f"trace commutation eps=1/{tiling.n}", worst_c == 0.0, f"max defect {worst_c:.2e}")
        u1 = rng.standard_normal(tiling.meshes[Y1].n_vertices)
        u2 = rng.standard_normal(tiling.meshes[Y2].n_vertices)
        d = nonlinear_compatibility_defect(spec, u1, u2, tiling, t=0.3)
        record(f"nonlinear compatibility eps=1/{tiling.n}", d <= 1e-12, f"max defect {d:.2e}")

        system = build_wentzell_system(tiling, diffusion)
        C = default_trace_constant(tiling, theta)
        fields = [np.ones_like(u1)] + [rng.standard_normal(len(u1)) for _ in range(5)]
        x = tiling.meshes[Y1].vertices
        fields.append(np.sin(2 * np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1]))
        ratios = [trace_inequality_check(f, system.sides[Y1].norms, theta, C).ratio for f in fields]
        record(f"trace inequality eps=1/{tiling.n}", max(ratios) <= 1.0,
               f"C(theta={theta:g})={C:.4g}, max ratio {max(ratios):.3f}")
    return results


def cmd_check(cfg: RunConfig, mesh_files=()):
    results = run_checks(cfg, mesh_files)
    for name, ok, detail in results:
        _say(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    failed = [r for r in results if not r[1]]
    _say(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_VALIDATION


COMMANDS = {"cell": cmd_cell, "macro": cmd_macro, "micro": cmd_micro, "sweep": cmd_sweep}


def build_parser():
    p = argparse.ArgumentParser(prog="whomog", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("cell", "solve the cell problems and print D-hat"),
                           ("macro", "run the homogenized limit system"),
                           ("micro", "run the epsilon-problem"),
                           ("sweep", "epsilon-sweep against the limit system"),
                           ("check", "run all invariant checks")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", "-c", help="configuration file")
        sp.add_argument("--set", "-s", action="append", metavar="KEY=VALUE", help="override a config key")
        sp.add_argument("--out", "-o", help="output directory (output.dir)")
        sp.add_argument("--print-config", action="store_true", help="print the effective configuration and exit")
        if name == "micro":
            sp.add_argument("--epsilon", help="period, e.g. 1/8")
        if name == "check":
            sp.add_argument("--mesh", action="append", default=[], help="also validate a meshfmt file")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.print_config:
            sys.stdout.write(serialize_config(cfg))
            return EXIT_OK
        with warnings.catch_warnings():
            warnings.simplefilter("always", StabilityWarning)
            if args.command == "check":
                return cmd_check(cfg, args.mesh)
            return COMMANDS[args.command](cfg)
    except _VALIDATION as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NonMonotoneConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONMONOTONE
    except _NUMERICAL as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
