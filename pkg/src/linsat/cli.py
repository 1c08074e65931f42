"""Command-line driver: transform, analyze, solve, estimate, gadget synth.

Every subcommand prints one JSON document to stdout.  Exit codes:
0 success, 1 usage error, 2 guard/limit exceeded, 3 input error.
"""

from __future__ import annotations

import argparse
import random
import sys

from . import codes, dqi, serialize, solvers
from .errors import GuardExceeded, LinsatError, ModelError, ProblemFormatError
from .gadgets import synthesize_gadget
from .gf import FieldOrder
from .instance import to_unweighted
from .serialize import dumps_canonical, load_problem, save_problem
from .transform import TransformOptions, full_pipeline
from .gadgets import repair_duplicates
from .transform import equalize_set_sizes

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_GUARD = 2
EXIT_INPUT = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _emit(data):
    sys.stdout.write(dumps_canonical(data))


def _unweighted_instance(problem_file, options: TransformOptions, allow_unweight: bool):
    """Resolve a problem file to (unweighted instance, optional pipeline result)."""
    if problem_file.kind == "constraint":
        result = full_pipeline(problem_file.problem, options)
        return result.unweighted, result
    inst = problem_file.problem
    if inst.is_unweighted():
        return inst, None
    if not allow_unweight:
        raise ModelError(
            "instance is weighted; rerun with --unweight to duplicate constraints "
            "(weights divided by their GCD, duplicates repaired)"
        )
    unw, _ = to_unweighted(inst)
    unw, _ = repair_duplicates(unw)
    unw, _ = equalize_set_sizes(unw, pad=False)
    return unw, None


def cmd_transform(args) -> int:
    pf = load_problem(args.input)
    if pf.kind != "constraint":
        raise ModelError("transform expects a constraint-kind problem file")
    options = TransformOptions(
        degree_threshold=args.degree_threshold,
        penalty_weight=args.penalty_weight,
        equalize=not args.no_equalize,
        pad_sets=not args.no_pad,
        round_to=args.round_to,
        dep_cap=args.dep_cap,
    )
    result = full_pipeline(pf.problem, options)
    if args.out:
        save_problem(args.out, result.unweighted, {"name": "transformed", "source": args.input})
    if args.out_weighted:
        save_problem(
            args.out_weighted, result.weighted, {"name": "transformed_weighted", "source": args.input}
        )
    serialize.validate(result.diagnostics, "transform_report")
    _emit(result.diagnostics)
    return EXIT_OK


def cmd_analyze(args) -> int:
    pf = load_problem(args.input)
    transformed = False
    if pf.kind == "constraint":
        inst = full_pipeline(pf.problem, TransformOptions(dep_cap=args.dep_cap)).unweighted
        transformed = True
    else:
        inst = pf.problem
    report = codes.analyze(
        inst,
        dmin_cap=args.dmin_cap,
        dep_cap=args.dep_cap,
        enumerate_weights=args.weights,
    )
    data = {
        "length": report.length,
        "dim": report.dim,
        "variables": report.num_vars,
        "d_min": {
            "value": report.d_min.value,
            "cap": report.d_min.cap,
            "method": report.d_min.method,
        },
        "dependencies": {
            "cap": report.dependencies.cap,
            "sets": [
                {"indices": list(s.indices), "pattern": s.pattern}
                for s in report.dependencies.sets
            ],
            "patterns": report.dependencies.patterns(),
        },
        "weights": {str(k): v for k, v in report.weights.items()} if report.weights else None,
        "transformed": transformed,
    }
    serialize.validate(data, "analysis_report")
    _emit(data)
    return EXIT_OK


def cmd_solve(args) -> int:
    pf = load_problem(args.input)
    seed = args.seed if args.seed is not None else random.SystemRandom().randrange(2**32)
    result_pipeline = None
    if pf.kind == "constraint":
        result_pipeline = full_pipeline(pf.problem, TransformOptions())
        inst = result_pipeline.weighted
    else:
        inst = pf.problem
    if args.solver == "brute":
        res = solvers.brute_force(inst)
    elif args.solver == "anneal":
        res = solvers.simulated_annealing(inst, seed=seed, restarts=args.restarts)
    else:
        res = solvers.prange_solve(inst, seed=seed, restarts=args.restarts)
    data = res.to_dict()
    if args.seed is None and args.solver != "brute":
        data["seed"] = seed  # logged so the run can be replayed
    if result_pipeline is not None:
        cert = result_pipeline.certificate
        decoded = cert.decode(res.assignment)
        data["model_assignment"] = {str(k): v for k, v in sorted(decoded.items())}
        data["model_objective"] = str(cert.source_value(res.weight))
    serialize.validate(data, "solve_result")
    _emit(data)
    return EXIT_OK


def cmd_estimate(args) -> int:
    pf = load_problem(args.input)
    inst, _ = _unweighted_instance(pf, TransformOptions(), args.unweight)
    decoder = None
    if args.decoder:
        view = codes.CodeView.from_instance(inst)
        decoder = __import__("linsat.decoders", fromlist=["get_decoder"]).get_decoder(
            args.decoder, view, seed=args.seed
        )
    est = dqi.estimate(
        inst,
        degree=args.l,
        decoder=decoder,
        samples=args.samples,
        seed=args.seed,
    )
    data = est.to_dict()
    serialize.validate(data, "estimate_report")
    _emit(data)
    return EXIT_OK


def cmd_gadget(args) -> int:
    if args.action != "synth":
        raise _UsageError("supported gadget action: synth")
    g = synthesize_gadget(
        args.table,
        FieldOrder(args.q),
        max_constraints=args.max_constraints,
        kind="approximate" if args.approximate else "exact",
        aux_count=args.aux,
    )
    if g is None:
        _emit({"found": False})
        return EXIT_OK
    data = serialize.gadget_to_json(g)
    serialize.validate(data, "gadget")
    data["found"] = True
    _emit(data)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="linsat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="compile a constraint model to Max-LINSAT")
    p.add_argument("input")
    p.add_argument("--out", help="write the unweighted instance to this path")
    p.add_argument("--out-weighted", help="write the weighted instance to this path")
    p.add_argument("--degree-threshold", type=int, default=4)
    p.add_argument("--penalty-weight", type=int, default=None)
    p.add_argument("--round-to", type=int, default=None)
    p.add_argument("--no-equalize", action="store_true")
    p.add_argument("--no-pad", action="store_true")
    p.add_argument("--dep-cap", type=int, default=4)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("analyze", help="dual-code analysis of an instance")
    p.add_argument("input")
    p.add_argument("--dmin-cap", type=int, default=6)
    p.add_argument("--dep-cap", type=int, default=6)
    p.add_argument("--weights", action="store_true", help="include the weight enumerator")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("solve", help="run a classical solver")
    p.add_argument("input")
    p.add_argument("--solver", choices=("brute", "anneal", "prange"), required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--restarts", type=int, default=32)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("estimate", help="DQI performance estimate")
    p.add_argument("input")
    p.add_argument("--l", type=int, default=None)
    p.add_argument("--decoder", choices=("lookup", "nearest", "isd"), default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--unweight", action="store_true", help="convert a weighted instance by duplication"
    )
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("gadget", help="gadget tools")
    p.add_argument("action", choices=("synth",))
    p.add_argument("--table", required=True, help="truth table bits, e.g. 0001 for AND")
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--max-constraints", type=int, default=4)
    p.add_argument("--approximate", action="store_true")
    p.add_argument("--aux", type=int, default=0)
    p.set_defaults(func=cmd_gadget)
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except GuardExceeded as e:
        print(f"guard exceeded: {e}", file=sys.stderr)
        return EXIT_GUARD
    except (ProblemFormatError, FileNotFoundError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (ModelError, LinsatError, ValueError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
