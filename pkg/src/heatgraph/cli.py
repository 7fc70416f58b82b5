"""Command-line entry point ``heatgraph``.

Exit status is 0 on success, 1 for invalid input and 2 when the requested
configuration cannot be identified (too few observations or a rank
deficient operator).
"""

from __future__ import annotations

import argparse
import json
import sys

from . import experiments as ex
from .mesh import generate_plate_with_cavity, write_mesh
from .sampling import IdentifiabilityError, greedy_sensor_selection


DEFAULT_K = (24, 32, 40, 48)
DEFAULT_T = (8, 10, 16)


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _write(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def cmd_run(args):
    scenario = ex.load_scenario(args.scenario)
    outcome = ex.run_scenario(scenario)
    if args.format == "json":
        _write(json.dumps(outcome.to_dict(), indent=2) + "\n", args.out)
    else:
        _write(ex.report_to_csv(outcome.report), args.out)


def cmd_sweep(args):
    scenario = ex.load_scenario(args.scenario)
    report = ex.rmse_sweep(scenario, args.k, args.t, workers=args.workers)
    fmt = args.format or ("json" if str(args.out).endswith(".json") else "csv")
    if args.out is None:
        text = ex.report_to_csv(report) if fmt == "csv" else json.dumps(report.to_dict(), indent=2) + "\n"
        sys.stdout.write(text)
    else:
        ex.emit_report(report, fmt, args.out)


def cmd_mesh_gen(args):
    if len(args.cavity or []) not in (0, 4):
        raise ValueError("--cavity needs four numbers x0,y0,x1,y1")
    mesh = generate_plate_with_cavity(args.width, args.height, args.nx, args.ny, args.cavity or None)
    write_mesh(mesh, args.out)
    print(f"{mesh.n_vertices} vertices, {mesh.n_triangles} triangles -> {args.out}", file=sys.stderr)


def cmd_select(args):
    scenario = ex.load_scenario(args.scenario)
    spectrum = ex.load_spectrum(scenario.graph)
    sel = greedy_sensor_selection(spectrum, scenario.grid, args.k, args.objective)
    _write(sel.to_json() + "\n", args.out)


class _Parser(argparse.ArgumentParser):
    # usage errors are validation errors: exit 1, keep 2 for identifiability
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="heatgraph", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="normalized RMSE over K and T")
    p.add_argument("--scenario", required=True)
    p.add_argument("--k", type=_int_list, default=list(DEFAULT_K), help="default %(default)s")
    p.add_argument("--t", type=_int_list, default=list(DEFAULT_T), help="default %(default)s")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("mesh", help="mesh utilities")
    msub = p.add_subparsers(dest="mesh_command", required=True)
    g = msub.add_parser("gen", help="generate a plate-with-cavity mesh")
    g.add_argument("--nx", type=int, required=True)
    g.add_argument("--ny", type=int, required=True)
    g.add_argument("--width", type=float, default=2.0)
    g.add_argument("--height", type=float, default=1.0)
    g.add_argument("--cavity", type=_float_list)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_mesh_gen)

    p = sub.add_parser("select", help="greedy sensor selection for a scenario's graph and time grid")
    p.add_argument("--scenario", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument(
        "--objective", choices=("min_condition", "max_min_singular"), default="max_min_singular"
    )
    p.add_argument("--out")
    p.set_defaults(func=cmd_select)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except IdentifiabilityError as exc:
        print(f"heatgraph: not identifiable: {exc}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"heatgraph: missing field {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError, OSError) as exc:
        print(f"heatgraph: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
