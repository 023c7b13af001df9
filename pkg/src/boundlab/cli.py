"""Batch entry point: experiment configuration, orchestration, reports.

Reports are produced with a fixed field order and floats at 17 significant
digits, so one (config, seed) pair maps to one byte sequence; nothing
time- or machine-dependent is embedded.  Exit codes: 0 all asserted checks
pass, 1 a check or solve failed, 2 usage error, 3 output not writable.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction

from . import __version__
from .exponents import check_identities, derive_context
from .linear_solver import (
    MANUFACTURED_CASES,
    NonconvergenceError,
    manufactured_convergence,
    regularity_ratio_suite,
)
from .mesh import boundary_vertex_set, build_cube_mesh, dump_mesh, face_areas, mesh_integrity, signed_volumes
from .nonlinear import SolverDivergence, StagnationError, make_power_nonlinearity, solve_ground_state
from .norms import norm_report
from .verify_chain import (
    build_corpus,
    energy_bound_check,
    gn_ratio_suite,
    h1_trace_bound,
    main_estimate_ratio,
    norm_equivalence_report,
    run_universal_suite,
)

__all__ = ["ExperimentConfig", "UsageError", "run", "write_report", "main"]

_COMMANDS = ("exponents", "mesh-info", "solve-linear", "solve-nonlinear", "verify", "sweep")
_SUITES = ("universal", "gn", "regularity", "chain", "energy", "equivalence")


class UsageError(ValueError):
    pass


@dataclass(eq=False)
class ExperimentConfig:
    command: str
    N: int = 3
    p_list: tuple = (Fraction(2),)
    q_override: Fraction = None
    n_list: tuple = (8,)
    samples: int = 100
    seed: int = None
    tol: float = 1e-8
    output: str = None
    fmt: str = "json"
    case: str = "exp-x1"
    suite: str = "chain"
    b0: float = 1.0
    dump: str = None

    def validate(self):
        if self.command not in _COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.command == "verify" and self.suite not in _SUITES:
            raise UsageError(f"unknown suite {self.suite!r}")
        if any(n < 1 for n in self.n_list):
            raise UsageError("mesh levels must be >= 1")
        if self.tol <= 0:
            raise UsageError("tolerance must be positive")
        if self.samples < 1:
            raise UsageError("sample count must be >= 1")
        randomized = self.command in ("verify", "sweep", "solve-nonlinear")
        if randomized and self.seed is None:
            raise UsageError(f"--seed is mandatory for {self.command}")
        if self.fmt not in ("json", "csv"):
            raise UsageError(f"unknown report format {self.fmt!r}")
        if self.command == "solve-linear" and self.case not in MANUFACTURED_CASES:
            raise UsageError(
                f"unknown case {self.case!r}; available: {sorted(MANUFACTURED_CASES)}"
            )

    def as_dict(self):
        return {
            "command": self.command,
            "N": self.N,
            "p_list": [str(p) for p in self.p_list],
            "q_override": None if self.q_override is None else str(self.q_override),
            "n_list": list(self.n_list),
            "samples": self.samples,
            "seed": self.seed,
            "tol": self.tol,
            "suite": self.suite,
            "case": self.case,
            "b0": self.b0,
        }


# -- deterministic serialization -------------------------------------------------


def _fmt_float(x):
    return format(x, ".17g")


def _json_text(obj):
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, Fraction):
        return json.dumps(str(obj))
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = ", ".join(f"{json.dumps(str(k))}: {_json_text(v)}" for k, v in obj.items())
        return "{" + items + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json_text(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv_cell(value):
    if isinstance(value, float):
        return _fmt_float(value)
    if value is None:
        return ""
    return str(value)


def write_report(records, fmt, path, header=None):
    """Write records as JSON or CSV with a stable field order.

    Records must be non-empty dicts sharing one key set; the config/version
    header is embedded (as a document field in JSON, as a comment line in CSV).
    """
    if not records:
        raise ValueError("refusing to write an empty report")
    fields = list(records[0].keys())
    for r in records:
        if list(r.keys()) != fields:
            raise ValueError("records do not share one field set")
    if fmt == "json":
        doc = {"header": header or {}, "records": records}
        text = _json_text(doc) + "\n"
    elif fmt == "csv":
        lines = []
        if header:
            lines.append("# " + _json_text(header))
        lines.append(",".join(fields))
        for r in records:
            lines.append(",".join(_csv_cell(r[k]) for k in fields))
        text = "\n".join(lines) + "\n"
    else:
        raise UsageError(f"unknown report format {fmt!r}")
    with open(path, "w", newline="") as out:
        out.write(text)


def _emit(config, records, status_records=()):
    if config.output:
        header = {"version": __version__, "config": config.as_dict()}
        write_report(records, config.fmt, config.output, header=header)


# -- command implementations -------------------------------------------------------


def _cmd_exponents(config):
    records = []
    status = 0
    for p in config.p_list:
        ctx = derive_context(config.N, p, config.q_override)
        checks = check_identities(ctx)
        ok = all(c.passed for c in checks)
        status = status or (0 if ok else 1)
        print(f"N={ctx.N}  p={ctx.p}  q={ctx.q}")
        print(
            f"  two_star={ctx.two_star}  two_low_star={ctx.two_low_star}  "
            f"m={ctx.m}  sigma={ctx.sigma}"
        )
        print(f"  A={ctx.A}  A_hat1={ctx.A_hat1}  A_hat2={ctx.A_hat2}")
        print(f"  identities: {'pass' if ok else 'FAIL'}")
        if not ok:
            for c in checks:
                if not c.passed:
                    print(f"    {c.name}: {c.detail}", file=sys.stderr)
        rec = {
            "N": ctx.N,
            "p": ctx.p,
            "q": ctx.q,
            "m": ctx.m,
            "sigma": ctx.sigma,
            "A": ctx.A,
            "A_hat1": ctx.A_hat1,
            "A_hat2": ctx.A_hat2,
            "identities": "pass" if ok else "fail",
        }
        records.append(rec)
    _emit(config, records)
    return status


def _cmd_mesh_info(config):
    n = config.n_list[0]
    mesh = build_cube_mesh(n)
    report = mesh_integrity(mesh)
    volume = float(signed_volumes(mesh.vertices, mesh.tets).sum())
    area = float(face_areas(mesh).sum())
    print(f"n={n}: {mesh.num_vertices} vertices, {mesh.num_tets} tets, "
          f"{mesh.num_boundary_faces} boundary faces")
    print(f"  volume={volume!r}  boundary area={area!r}")
    print(f"  boundary vertices: {len(boundary_vertex_set(mesh))}")
    print(f"  integrity: {report.detail}")
    if config.dump:
        dump_mesh(mesh, config.dump)
        print(f"  dump written to {config.dump}")
    records = [
        {
            "n": n,
            "vertices": mesh.num_vertices,
            "tets": mesh.num_tets,
            "boundary_faces": mesh.num_boundary_faces,
            "volume": volume,
            "area": area,
            "integrity": report.detail,
        }
    ]
    _emit(config, records)
    return 0 if report.ok else 1


def _cmd_solve_linear(config):
    table = manufactured_convergence(config.case, config.n_list, tol=config.tol)
    records = []
    h1_orders = [None] + table.h1_orders
    l2_orders = [None] + table.l2_orders
    print(f"case {config.case}:")
    for row, oh, ol in zip(table.rows, h1_orders, l2_orders):
        print(
            f"  n={row['n']:3d}  h1_error={row['h1_error']:.6e}  "
            f"l2_error={row['l2_error']:.6e}"
            + (f"  orders=({oh:.2f}, {ol:.2f})" if oh is not None else "")
        )
        records.append(
            {
                "case": config.case,
                "n": row["n"],
                "vertices": row["vertices"],
                "h1_error": row["h1_error"],
                "l2_error": row["l2_error"],
                "h1_error_rel": row["h1_error_rel"],
                "h1_order": oh,
                "l2_order": ol,
            }
        )
    _emit(config, records)
    return 0


def _cmd_solve_nonlinear(config):
    p = config.p_list[0]
    n = config.n_list[0]
    mesh = build_cube_mesh(n)
    nl = make_power_nonlinearity(float(p))
    outcome = solve_ground_state(mesh, nl, config.tol, config.seed)
    ctx = derive_context(config.N, p, config.q_override)
    report = norm_report(outcome.solution, ctx)
    print(
        f"ground state p={p} n={n}: residual={outcome.weak_residual:.3e} "
        f"multiplier={outcome.multiplier:.6f} positive={outcome.positive}"
    )
    print(f"  h1={report.h1!r}  linf={report.linf!r}")
    rec = {
        "p": float(p),
        "n": n,
        "multiplier": outcome.multiplier,
        "weak_residual": outcome.weak_residual,
        "outer_iterations": outcome.outer_iterations,
        "newton_iterations": outcome.newton_iterations,
        "positive": outcome.positive,
    }
    rec.update(report.as_dict())
    rec["values"] = outcome.solution.values.tolist()
    _emit(config, [rec])
    return 0


def _solve_family(config, p, n_list):
    nl = make_power_nonlinearity(float(p))
    outcomes = []
    for n in n_list:
        mesh = build_cube_mesh(n)
        outcomes.append(solve_ground_state(mesh, nl, config.tol, config.seed))
    return nl, outcomes


def _cmd_verify(config):
    ctx = derive_context(config.N, config.p_list[0], config.q_override)
    records = []
    status = 0
    suite = config.suite

    # the randomized suites mix computed solutions into their corpora
    outcomes = []
    nl = None
    if suite in ("gn", "chain", "energy", "equivalence"):
        nl, outcomes = _solve_family(config, config.p_list[0], config.n_list)
    solutions_by_n = {o.solution.mesh.n: [o.solution] for o in outcomes}

    if suite in ("universal", "chain"):
        for n in config.n_list:
            mesh = build_cube_mesh(n)
            report = run_universal_suite(
                mesh, ctx, config.b0, config.samples, config.seed,
                solutions=solutions_by_n.get(n, ()),
            )
            bad = report.violations
            if bad:
                status = 1
                first = bad[0]
                print(
                    f"FAIL: step {first.step} violated at n={n}: "
                    f"left={first.left!r} right={first.right!r}",
                    file=sys.stderr,
                )
            records.extend(report.summary_rows())
            print(
                f"universal n={n}: {len(report.records)} records, "
                f"{len(bad)} violations, branches={report.branch_counts()}"
            )

    if suite in ("gn", "chain"):
        corpora = []
        for n in config.n_list:
            mesh = build_cube_mesh(n)
            corpora.append(
                build_corpus(mesh, config.samples, config.seed,
                             solutions=solutions_by_n.get(n, ()))
            )
        gn = gn_ratio_suite(corpora, ctx)
        for row in gn.rows:
            records.append(
                {
                    "step": "gn_interpolation",
                    "n": row["n"],
                    "p": float(ctx.p),
                    "q": float(ctx.q),
                    "max_ratio_or_margin": row["max_ratio"],
                    "verdict": gn.verdict,
                    "branch": "both" if row["branch_sup_gt1"] and row["branch_sup_le1"] else "one",
                }
            )
        print(f"gn suite: verdict={gn.verdict} maxima="
              f"{[(r['n'], r['max_ratio']) for r in gn.rows]}")

    if suite == "regularity":
        report = regularity_ratio_suite(
            ctx, config.n_list, config.samples, config.seed
        )
        records.extend(report.csv_rows())
        print(f"regularity suite: per-n maxima {report.maxima}")

    if suite in ("chain", "energy", "equivalence"):
        if suite in ("chain",):
            for outcome in outcomes:
                rec = main_estimate_ratio(outcome, ctx)
                records.append(
                    {
                        "step": rec.step,
                        "n": rec.n,
                        "p": float(ctx.p),
                        "q": float(ctx.q),
                        "max_ratio_or_margin": rec.data["rho"],
                        "verdict": rec.verdict,
                        "branch": rec.branch,
                    }
                )
                trace = h1_trace_bound(outcome, nl)
                if trace.verdict == "fail":
                    status = 1
                    print(f"FAIL: h1_trace_bound at n={trace.n}", file=sys.stderr)
                records.append(
                    {
                        "step": trace.step,
                        "n": trace.n,
                        "p": float(ctx.p),
                        "q": float(ctx.q),
                        "max_ratio_or_margin": trace.right - trace.left,
                        "verdict": trace.verdict,
                        "branch": trace.branch,
                    }
                )
        if suite in ("chain", "equivalence"):
            eq = norm_equivalence_report(outcomes)
            records.append(
                {
                    "step": "norm_equivalence",
                    "n": max(config.n_list),
                    "p": float(ctx.p),
                    "q": float(ctx.q),
                    "max_ratio_or_margin": eq.column_max["linf"],
                    "verdict": "co-bounded" if eq.co_bounded else "unbounded",
                    "branch": "co-vanishing" if eq.co_vanishing else "non-vanishing",
                }
            )
            print(f"equivalence: co_bounded={eq.co_bounded} co_vanishing={eq.co_vanishing}")
        if suite in ("chain", "energy"):
            en = energy_bound_check(outcomes, nl)
            if not en.consistent:
                status = 1
                print("FAIL: energy bound inconsistent", file=sys.stderr)
            for row in en.rows:
                records.append(
                    {
                        "step": "energy_bound",
                        "n": row["n"],
                        "p": float(ctx.p),
                        "q": float(ctx.q),
                        "max_ratio_or_margin": row["J"] - row["lower_bound"],
                        "verdict": row["bound_verdict"],
                        "branch": "",
                    }
                )
            print(f"energy: bounded_energy={en.bounded_energy} bounded_h1={en.bounded_h1}")

    if not records:
        raise UsageError(f"suite {suite!r} produced no records for this configuration")
    _emit(config, records)
    return status


def _cmd_sweep(config):
    records = []
    status = 0
    overall_c0 = 0.0
    for p in config.p_list:
        ctx = derive_context(config.N, p, config.q_override)
        nl = make_power_nonlinearity(float(p))
        c0_running = 0.0
        for n in config.n_list:
            mesh = build_cube_mesh(n)
            outcome = solve_ground_state(mesh, nl, config.tol, config.seed)
            rec = main_estimate_ratio(outcome, ctx)
            trace = h1_trace_bound(outcome, nl)
            if trace.verdict == "fail" or rec.verdict != "finite":
                status = 1
                print(f"FAIL: p={p} n={n}", file=sys.stderr)
            c0_running = max(c0_running, rec.data["rho"])
            overall_c0 = max(overall_c0, c0_running)
            records.append(
                {
                    "p": float(p),
                    "n": n,
                    "A": float(ctx.A),
                    "rho": rec.data["rho"],
                    "rho_hat": rec.data["rho_hat"],
                    "h1": rec.data["h1"],
                    "linf": rec.left,
                    "weak_residual": outcome.weak_residual,
                    "trace_bound": trace.verdict,
                    "fitted_C0": c0_running,
                }
            )
            print(
                f"p={p} n={n}: rho={rec.data['rho']:.6f} "
                f"rho_hat={rec.data['rho_hat']:.6f} fitted_C0={c0_running:.6f}"
            )
    print(f"sweep fitted C0 over all cells: {overall_c0:.6f}")
    _emit(config, records)
    return status


# -- argument parsing ---------------------------------------------------------------


def _fraction_list(text):
    try:
        return tuple(Fraction(part) for part in text.split(","))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"bad rational list {text!r}: {exc}")


def _int_list(text):
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}: {exc}")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="boundlab",
        description="Finite-element laboratory for boundary-flux problems "
        "on the unit cube and their sup-norm estimates.",
    )
    parser.add_argument("--config", help="JSON config file; flags override its entries")
    sub = parser.add_subparsers(dest="command")

    def add_common(sp):
        sp.add_argument("--N", type=int, default=None, help="space dimension (exponents only)")
        sp.add_argument("--p", dest="p_list", type=_fraction_list, default=None,
                        help="comma-separated rational powers, e.g. 2 or 3/2,2")
        sp.add_argument("--q", dest="q_override", type=Fraction, default=None)
        sp.add_argument("--n", dest="n_list", type=_int_list, default=None,
                        help="comma-separated mesh levels, e.g. 4,8,16")
        sp.add_argument("--samples", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--B0", dest="b0", type=float, default=None)
        sp.add_argument("--output", default=None, help="report file path")
        sp.add_argument("--format", dest="fmt", choices=("json", "csv"), default=None)

    for name in _COMMANDS:
        sp = sub.add_parser(name)
        add_common(sp)
        if name == "solve-linear":
            sp.add_argument("--case", default=None, choices=sorted(MANUFACTURED_CASES))
        if name == "verify":
            sp.add_argument("--suite", default=None, choices=_SUITES)
        if name == "mesh-info":
            sp.add_argument("--dump", default=None, help="write plain-text mesh dump here")
    return parser


def parse_config(argv):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        raise UsageError("a command is required")

    settings = {}
    if args.config:
        try:
            with open(args.config) as fh:
                file_conf = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file: {exc}")
        for key, value in file_conf.items():
            if key == "p_list":
                value = tuple(Fraction(str(v)) for v in value)
            elif key == "q_override" and value is not None:
                value = Fraction(str(value))
            elif key == "n_list":
                value = tuple(int(v) for v in value)
            settings[key] = value

    for key in (
        "N", "p_list", "q_override", "n_list", "samples", "seed",
        "tol", "output", "fmt", "case", "suite", "b0", "dump",
    ):
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value

    config = ExperimentConfig(command=args.command, **settings)
    config.validate()
    return config


def run(config):
    """Dispatch a validated config; returns the process exit status."""
    handler = {
        "exponents": _cmd_exponents,
        "mesh-info": _cmd_mesh_info,
        "solve-linear": _cmd_solve_linear,
        "solve-nonlinear": _cmd_solve_nonlinear,
        "verify": _cmd_verify,
        "sweep": _cmd_sweep,
    }[config.command]
    return handler(config)


def main(argv=None):
    try:
        config = parse_config(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except (NonconvergenceError, StagnationError, SolverDivergence) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
