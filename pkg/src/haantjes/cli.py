"""Command-line entry points: check, torsion, simulate.

Exit codes: 0 = overall PASS, 1 = FAIL, 2 = manifest or usage error,
3 = internal error.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from . import __version__
from . import certify as cf
from . import hydro as hy
from .concomitants import haantjes_torsion, nijenhuis_torsion, rel_scale, yano_ako_bracket
from .errors import CFLViolation, HaantjesError, PreconditionViolated, SchemaError
from .fields import Valence
from .manifest import load_manifest
from .pipeline import CHECK_IDS, run_pipeline
from .report import dec

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


def build_parser():
    p = argparse.ArgumentParser(
        prog="haantjes",
        description="Certify recursion-operator bundles and simulate their flows.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="run the certification pipeline")
    c.add_argument("manifest", help="manifest path or packaged scenario name")
    c.add_argument("--points", type=int, default=None, help="sample points (default 50)")
    c.add_argument("--seed", type=int, default=None, help="sample sequence seed (default 42)")
    c.add_argument("--tol", type=float, default=None, help="pass threshold (default 1e-8)")
    c.add_argument(
        "--only",
        default=None,
        help=f"comma-separated check ids among: {', '.join(CHECK_IDS)}",
    )
    c.add_argument("--report", default=None, help="write the JSON report here")
    c.add_argument("--plot", default=None, help="render a residual figure to this file")
    c.add_argument(
        "--timing",
        action="store_true",
        help="embed wall-clock seconds in the report (breaks byte reproducibility)",
    )

    t = sub.add_parser("torsion", help="print concomitant component tables")
    t.add_argument("manifest")
    t.add_argument("--field", required=True, help="field name from the manifest")
    t.add_argument(
        "--kind", required=True, choices=["nijenhuis", "haantjes", "yano-ako"]
    )
    t.add_argument("--at", default=None, help="evaluation point, comma separated")
    t.add_argument("--enforce-pre", action="store_true",
                   help="require symmetry/associativity preconditions (yano-ako)")
    t.add_argument("--tol", type=float, default=1e-8)

    s = sub.add_parser("simulate", help="integrate a hydrodynamic flow")
    s.add_argument("manifest")
    s.add_argument("--flow", type=int, default=None, help="1-based operator index")
    s.add_argument("--pair", type=int, nargs=2, default=None, metavar=("J", "L"),
                   help="flow-commutation study for operators J and L")
    s.add_argument("--grid", type=int, default=None)
    s.add_argument("--dt", type=float, default=None)
    s.add_argument("--steps", type=int, default=None)
    s.add_argument("--length", type=float, default=None)
    s.add_argument("--amplitude", type=float, default=None)
    s.add_argument("--out", default=None, help="CSV output path (default: stdout)")
    s.add_argument("--plot", default=None, help="render a figure to this file")
    return p


def cmd_check(args):
    manifest = load_manifest(args.manifest)
    only = [x.strip() for x in args.only.split(",")] if args.only else None
    t0 = time.perf_counter()
    report = run_pipeline(
        manifest, only=only, points=args.points, seed=args.seed, tol=args.tol
    )
    elapsed = time.perf_counter() - t0
    if args.timing:
        report.wall_seconds = elapsed
    for line in report.summary_lines():
        print(line)
    print(f"({elapsed:.2f}s)", file=sys.stderr)
    if args.report:
        report.write(args.report)
        print(f"report written to {args.report}", file=sys.stderr)
    if args.plot:
        from .plotting import plot_report

        plot_report(report, args.plot)
        print(f"figure written to {args.plot}", file=sys.stderr)
    return EXIT_PASS if report.overall == "PASS" else EXIT_FAIL


def _parse_point(text, chart):
    if text is None:
        return chart.base
    p = np.array([float(x) for x in text.split(",")])
    chart.require_interior(p)
    return p


def cmd_torsion(args):
    manifest = load_manifest(args.manifest)
    if args.field == "identity":
        from .fields import identity_field

        field = identity_field(manifest.chart)
    elif args.field in manifest.fields:
        field = manifest.fields[args.field]
    else:
        raise SchemaError(f"unknown field {args.field!r}")
    p = _parse_point(args.at, manifest.chart)
    n = manifest.chart.dim
    if args.kind in ("nijenhuis", "haantjes"):
        if field.valence != Valence.OP:
            raise SchemaError(f"{args.kind} needs a (1,1) field, got {field.valence}")
        T = nijenhuis_torsion(field, p) if args.kind == "nijenhuis" else haantjes_torsion(field, p)
        scale = rel_scale(field.value_at(p))
        print(f"{args.kind} components of {args.field} at {list(p)}:")
        nonzero = False
        for l in range(n):
            for m in range(l + 1, n):
                for j in range(n):
                    if abs(T[j, l, m]) > 1e-14 * scale:
                        print(f"  T^{j + 1}_{l + 1}{m + 1} = {dec(T[j, l, m])}")
                        nonzero = True
        if not nonzero:
            print("  all components vanish (within 1e-14 of scale)")
        return EXIT_PASS
    if field.valence != Valence.BILINEAR:
        raise SchemaError(f"yano-ako needs a (1,2) field, got {field.valence}")
    val = yano_ako_bracket(field, p, enforce_pre=args.enforce_pre, tol=args.tol)
    print(f"yano-ako bracket of {args.field} at {list(p)}:")
    print(f"  symmetry precondition residual:      {dec(val.symmetry_residual)}")
    print(f"  associativity precondition residual: {dec(val.associativity_residual)}")
    peak = float(np.max(np.abs(val.components)))
    print(f"  max |[C,C]| component:               {dec(peak)}")
    idx = np.unravel_index(np.argmax(np.abs(val.components)), val.components.shape)
    if peak > 0:
        pretty = "".join(str(i + 1) for i in idx[1:])
        print(f"  worst component: [C,C]^{idx[0] + 1}_{pretty} = {dec(val.components[idx])}")
    if val.warned:
        print("  warning: preconditions hold only approximately", file=sys.stderr)
    return EXIT_PASS


def _sim_params(manifest, args):
    tab = manifest.simulate
    return {
        "grid": args.grid if args.grid is not None else int(tab.get("grid", 256)),
        "dt": args.dt if args.dt is not None else float(tab.get("dt", 1e-3)),
        "steps": args.steps if args.steps is not None else int(tab.get("steps", 1000)),
        "length": args.length if args.length is not None else float(tab.get("length", 1.0)),
        "amplitude": (
            args.amplitude if args.amplitude is not None else float(tab.get("amplitude", 0.05))
        ),
        "flow": args.flow if args.flow is not None else int(tab.get("flow", 1)),
    }


def _write_csv(path, header, rows):
    out = open(path, "w", newline="", encoding="utf-8") if path else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(header)
        for row in rows:
            w.writerow([x if isinstance(x, str) else dec(x) for x in row])
    finally:
        if path:
            out.close()


def _operator(candidate, index):
    if not 1 <= index <= len(candidate.K_list):
        raise SchemaError(f"flow index {index} out of range 1..{len(candidate.K_list)}")
    return candidate.K_list[index - 1]


def cmd_simulate(args):
    manifest = load_manifest(args.manifest)
    if manifest.candidate is None:
        raise SchemaError("manifest has no candidate section to simulate")
    cand = manifest.candidate
    prm = _sim_params(manifest, args)
    chart = manifest.chart
    if args.pair:
        Ka = _operator(cand, args.pair[0])
        Kb = _operator(cand, args.pair[1])
        dts = [prm["dt"], prm["dt"] / 2.0, prm["dt"] / 4.0]
        grids = [prm["grid"], prm["grid"] * 2, prm["grid"] * 4]
        ds, orders = hy.flow_commutation_order_study(
            chart, Ka, Kb, dts, grids, prm["length"], prm["amplitude"]
        )
        rows = []
        for i, (dt, grid, d) in enumerate(zip(dts, grids, ds)):
            rows.append([dt, grid, d, orders[i - 1] if i else ""])
        _write_csv(args.out, ["dt", "grid", "discrepancy", "observed_order"], rows)
        if args.plot:
            from .plotting import plot_pair_study

            plot_pair_study(dts, ds, args.plot)
            print(f"figure written to {args.plot}", file=sys.stderr)
        return EXIT_PASS
    K = _operator(cand, prm["flow"])
    state = hy.make_initial_state(
        chart, grid=prm["grid"], length=prm["length"], amplitude=prm["amplitude"]
    )
    store = max(1, prm["steps"] // 20)
    final, history = hy.integrate_flow(state, K, prm["dt"], prm["steps"], store_every=store)
    full = len(cand.K_list) == chart.dim
    drift = None
    integrals = times = None
    if full:
        square = cf.PotentialSquare(cand)
        times, integrals, drift = hy.conservation_series(history, square, state.dx)
    exact_err = None
    is_identity = bool(
        np.max(np.abs(K.value_at(chart.base) - np.eye(chart.dim))) < 1e-14
    )
    if is_identity and state.profile is not None:
        exact_err = []
        for t, u in history:
            exact = state.profile((state.x + t) % state.length)
            exact_err.append(float(np.sqrt(state.dx * np.sum((u - exact) ** 2))))
        exact_err = np.asarray(exact_err)
    header = ["t"]
    n = chart.dim
    rows = []
    if integrals is not None:
        header += [f"integral_A{m + 1}" for m in range(n)]
        header += [f"drift_A{m + 1}" for m in range(n)]
    if exact_err is not None:
        header.append("exact_error")
    for i, (t, _) in enumerate(history):
        row = [t]
        if integrals is not None:
            row += list(integrals[i])
            row += list(np.abs(integrals[i] - integrals[0]) / (1.0 + np.abs(integrals[0])))
        if exact_err is not None:
            row.append(exact_err[i])
        rows.append(row)
    _write_csv(args.out, header, rows)
    if args.plot and integrals is not None:
        from .plotting import plot_flow_series

        plot_flow_series(times, integrals, drift, args.plot, exact_err=exact_err)
        print(f"figure written to {args.plot}", file=sys.stderr)
    return EXIT_PASS


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            return cmd_check(args)
        if args.command == "torsion":
            return cmd_torsion(args)
        return cmd_simulate(args)
    except PreconditionViolated as exc:
        print(f"error: {exc} (worst index {exc.worst_index}, residual {exc.residual})",
              file=sys.stderr)
        return EXIT_FAIL
    except (SchemaError, CFLViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HaantjesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # pragma: no cover - internal faults
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
