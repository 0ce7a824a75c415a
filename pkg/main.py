"""
Microlocal Workbench - Main Module
Command-line front end: every subcommand reads JSON inputs, runs one exact
computation and prints a JSON result

Exit codes: 0 success, 1 mathematical violation found, 2 input error.
"""

import argparse
import logging
import os
import sys
from itertools import product
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from microlocal.equivariant import check_kernel, hom_equivariant, validate_equivariant
from microlocal.errors import ParseError, WorkbenchError
from microlocal.fiber_product import full_faithfulness_check, lift_morphism
from microlocal.melded_systems import hom_melded, validate_melded, variation_report
from microlocal.quiver_core import hom_basis, validate_quiver, vanishing_cycles
from microlocal.serialization import (
    FORMATS,
    convert,
    decode_descent,
    decode_equivariant,
    decode_fiber_morphism,
    decode_kernel,
    decode_loop,
    decode_melded,
    decode_prestack,
    decode_quiver,
    decode_samples,
    decode_site,
    decode_stack_morphism,
    decode_triple,
    dumps,
    encode_components,
    encode_local_system_quiver,
    encode_matrix,
    encode_site_local_system,
    encode_space,
    load_json,
)
from microlocal.stack_site import check_prestack, check_weak_iso, glue, stalk
from microlocal.suites import (
    DEFAULT_RUN_CONFIG,
    SUITES,
    RunConfig,
    delta_batch,
    delta_frame,
    replay,
    run_suite,
    summary_frame,
)
from microlocal.symplectic_maslov import maslov_holonomy, negative_frame, triple_form

logger = logging.getLogger("microlocal")

Result = Tuple[Dict[str, Any], int]

DELTA_BATCH_SIZE = 20


def progress(message: str) -> None:
    print(message, file=sys.stderr)


def _require_files(args: argparse.Namespace, count: int, most: Optional[int] = None) -> List[str]:
    most = count if most is None else most
    if not count <= len(args.files) <= most:
        expected = str(count) if most == count else f"{count} to {most}"
        raise ParseError(f"{args.command} {args.action}", f"expected {expected} input file(s), got {len(args.files)}")
    return args.files


def _kernel_option(args: argparse.Namespace):
    if not args.kernel:
        return None
    return decode_kernel(load_json(args.kernel))


# ---------------------------------------------------------------------------
# maslov
# ---------------------------------------------------------------------------

def maslov_triple(args: argparse.Namespace) -> Result:
    (path,) = _require_files(args, 1)
    progress(f"Loading triple: {path}")
    t = decode_triple(load_json(path))
    report = triple_form(t)
    return {
        "profile": list(t.profile),
        "complex_rank": report.complex_rank,
        "signature": list(report.real_signature.as_tuple()),
        "q_matrix": encode_matrix(report.q_matrix),
        "negative_frame": encode_matrix(negative_frame(report)),
    }, 0


def maslov_holonomy_command(args: argparse.Namespace) -> Result:
    (path,) = _require_files(args, 1)
    progress(f"Loading loop: {path}")
    loop = decode_loop(load_json(path))
    return {"holonomy": maslov_holonomy(loop), "samples": len(loop.samples)}, 0


# ---------------------------------------------------------------------------
# quiver / equiv / delta
# ---------------------------------------------------------------------------

def quiver_hom(args: argparse.Namespace) -> Result:
    first, second = _require_files(args, 2)
    q, q2 = decode_quiver(load_json(first)), decode_quiver(load_json(second))
    validate_quiver(q)
    validate_quiver(q2)
    progress("Solving Hom equations...")
    return encode_space(hom_basis(q, q2)), 0


def quiver_vc(args: argparse.Namespace) -> Result:
    (path,) = _require_files(args, 1)
    q = decode_quiver(load_json(path))
    validate_quiver(q)
    return encode_local_system_quiver(vanishing_cycles(q)), 0


def _equivariant(path: str, args: argparse.Namespace):
    return decode_equivariant(load_json(path), _kernel_option(args))


def equiv_check(args: argparse.Namespace) -> Result:
    path, *kernel_path = _require_files(args, 1, 2)
    kernel = decode_kernel(load_json(kernel_path[0])) if kernel_path else _kernel_option(args)
    e = decode_equivariant(load_json(path), kernel)
    checked = check_kernel(e.kernel, [e.quiver])
    validate_equivariant(e)
    return {"valid": True, "kernel": e.kernel.name, "kernel_samples": checked}, 0


def equiv_hom(args: argparse.Namespace) -> Result:
    first, second = _require_files(args, 2)
    progress("Solving equivariant Hom equations...")
    return encode_space(hom_equivariant(_equivariant(first, args), _equivariant(second, args))), 0


def delta_lift(args: argparse.Namespace) -> Result:
    (path,) = _require_files(args, 1)
    if not args.x or not args.y:
        raise ParseError("delta lift", "--x and --y are required")
    x, y = _equivariant(args.x, args), _equivariant(args.y, args)
    sigma = lift_morphism(decode_fiber_morphism(load_json(path)), x, y)
    return {"morphism": encode_components(sigma)}, 0


def delta_check(args: argparse.Namespace) -> Result:
    """Every ordered pair of the given objects, or the seeded pairs of the delta-ff suite"""
    if args.files:
        objects = [(Path(p).name, _equivariant(p, args)) for p in args.files]
        rows = [{"pair": f"{a} -> {b}", **full_faithfulness_check(x, y).to_dict()}
                for (a, x), (b, y) in product(objects, repeat=2)]
    else:
        config = RunConfig(seed=args.seed, cases=args.cases)
        progress(f"Checking {config.cases or DELTA_BATCH_SIZE} seeded pairs (seed {config.seed})...")
        rows = delta_batch(config, DELTA_BATCH_SIZE)
    progress(delta_frame(rows).to_string(index=False))
    equal = all(row["equal"] for row in rows)
    return {"rows": rows, "equal": equal}, 0 if equal else 1


# ---------------------------------------------------------------------------
# melded
# ---------------------------------------------------------------------------

def melded_check(args: argparse.Namespace) -> Result:
    (path,) = _require_files(args, 1)
    validate_melded(decode_melded(load_json(path)))
    return {"valid": True}, 0


def melded_hom(args: argparse.Namespace) -> Result:
    first, second = _require_files(args, 2)
    x, y = decode_melded(load_json(first)), decode_melded(load_json(second))
    validate_melded(x)
    validate_melded(y)
    return encode_space(hom_melded(x, y)), 0


def melded_variation(args: argparse.Namespace) -> Result:
    (path,) = _require_files(args, 1)
    if not args.generator:
        raise ParseError("melded variation", "--generator is required")
    m = decode_melded(load_json(path))
    validate_melded(m)
    return variation_report(m, args.generator).to_dict(), 0


# ---------------------------------------------------------------------------
# stack
# ---------------------------------------------------------------------------

def _site_and_prestack(args: argparse.Namespace):
    site_path, prestack_path = _require_files(args, 2)
    site = decode_site(load_json(site_path))
    doc = load_json(prestack_path)
    p = decode_prestack(site, doc)
    samples = decode_samples(site, doc.get("samples", {}), "prestack.samples")
    return site, p, samples


def stack_check(args: argparse.Namespace) -> Result:
    _, p, samples = _site_and_prestack(args)
    progress(f"Checking prestack {p.name}...")
    report = check_prestack(p, samples)
    return report.to_dict(), 0 if report.ok else 1


def stack_glue(args: argparse.Namespace) -> Result:
    (path,) = _require_files(args, 1)
    progress(f"Loading descent datum: {path}")
    glued = glue(decode_descent(load_json(path)))
    return {"object": encode_site_local_system(glued.obj),
            "sigmas": [encode_components(s) for s in glued.sigmas]}, 0


def stack_stalk(args: argparse.Namespace) -> Result:
    site, p, samples = _site_and_prestack(args)
    if args.point not in site.points:
        raise ParseError("--point", f"unknown point {args.point!r}")
    u = site.minimal_open(args.point)
    category = stalk(p, args.point)
    objects = [p.restrict(u, v, a) for v, items in samples.items() if site.leq(u, v) for a in items]
    return {"point": args.point, "open": u, "category": category.name,
            "objects": [encode_site_local_system(a) for a in objects]}, 0


def stack_weakiso(args: argparse.Namespace) -> Result:
    (path,) = _require_files(args, 1)
    theta, samples, targets = decode_stack_morphism(load_json(path))
    verdict = check_weak_iso(theta, samples, targets)
    return verdict.to_dict(), 0 if verdict.weak_isomorphism else 1


# ---------------------------------------------------------------------------
# suite / convert
# ---------------------------------------------------------------------------

def _run_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        seed=args.seed, cases=args.cases, max_n=args.max_n, max_dim=args.max_dim,
        max_generators=args.max_generators, json_out=args.json_out,
    )


def suite_command(args: argparse.Namespace) -> Result:
    if args.action == "replay":
        (path,) = _require_files(args, 1)
        result = replay(load_json(path))
        return result.to_dict(), 0 if result.passed else 1
    config = _run_config(args)
    names = list(SUITES) if args.action == "all" else [args.action] + list(args.files)
    reports = []
    for name in names:
        progress(f"Running suite {name}...")
        reports.append(run_suite(config, name))
    progress("\n" + "=" * 60)
    progress(summary_frame(reports).to_string(index=False))
    progress("=" * 60)
    doc = reports[0].to_dict() if len(reports) == 1 else {"reports": [r.to_dict() for r in reports]}
    if config.json_out:
        Path(config.json_out).write_text(dumps(doc) + "\n", encoding="utf-8")
        progress(f"Report written to {config.json_out}")
    return doc, 0 if all(r.ok for r in reports) else 1


def convert_command(args: argparse.Namespace) -> Result:
    path = args.action
    if not args.format:
        raise ParseError("convert", f"--format is required; known: {', '.join(FORMATS)}")
    doc = convert(load_json(path), args.format)
    if args.out:
        Path(args.out).write_text(dumps(doc) + "\n", encoding="utf-8")
    return doc, 0


# Subcommand registry: actions map to handlers
SUBCOMMANDS: Dict[str, Dict[str, Any]] = {
    "maslov": {
        "help": "Lagrangian triples and Maslov holonomy",
        "actions": {"triple": maslov_triple, "holonomy": maslov_holonomy_command},
    },
    "quiver": {
        "help": "Quiver Hom spaces and vanishing cycles",
        "actions": {"hom": quiver_hom, "vc": quiver_vc},
    },
    "equiv": {
        "help": "Equivariant quivers",
        "actions": {"check": equiv_check, "hom": equiv_hom},
    },
    "delta": {
        "help": "The embedding into the fiber product",
        "actions": {"lift": delta_lift, "check": delta_check},
    },
    "melded": {
        "help": "Melded objects",
        "actions": {"check": melded_check, "hom": melded_hom, "variation": melded_variation},
    },
    "stack": {
        "help": "Prestacks on finite sites",
        "actions": {"check": stack_check, "glue": stack_glue, "stalk": stack_stalk, "weakiso": stack_weakiso},
    },
    "suite": {
        "help": "Batch property suites (a suite name, 'all' or 'replay')",
        "actions": None,
    },
    "convert": {
        "help": "Normalize a JSON input file",
        "actions": None,
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="microlocal", description="Exact-arithmetic microlocal workbench")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, config in SUBCOMMANDS.items():
        sub = commands.add_parser(name, help=config["help"])
        if config["actions"]:
            sub.add_argument("action", choices=sorted(config["actions"]))
        elif name == "suite":
            sub.add_argument("action", help=f"one of: {', '.join(SUITES)}, all, replay")
        else:
            sub.add_argument("action", metavar="file")
        sub.add_argument("files", nargs="*")
        if name in ("equiv", "delta"):
            sub.add_argument("--kernel", help="kernel file overriding the one in the object files")
        if name == "delta":
            sub.add_argument("--x")
            sub.add_argument("--y")
            sub.add_argument("--seed", type=int, default=DEFAULT_RUN_CONFIG.seed)
            sub.add_argument("--cases", type=int, default=None)
        if name == "melded":
            sub.add_argument("--generator")
        if name == "stack":
            sub.add_argument("--point")
        if name == "suite":
            sub.add_argument("--seed", type=int, default=DEFAULT_RUN_CONFIG.seed)
            sub.add_argument("--cases", type=int, default=DEFAULT_RUN_CONFIG.cases)
            sub.add_argument("--max-n", type=int, default=DEFAULT_RUN_CONFIG.max_n)
            sub.add_argument("--max-dim", type=int, default=DEFAULT_RUN_CONFIG.max_dim)
            sub.add_argument("--max-generators", type=int, default=DEFAULT_RUN_CONFIG.max_generators)
            sub.add_argument("--json-out")
        if name == "convert":
            sub.add_argument("--format", choices=sorted(FORMATS))
            sub.add_argument("--out")
    return parser


def _handler(args: argparse.Namespace) -> Callable[[argparse.Namespace], Result]:
    if args.command == "suite":
        return suite_command
    if args.command == "convert":
        return convert_command
    return SUBCOMMANDS[args.command]["actions"][args.action]


def configure_logging(verbose: bool) -> None:
    level = "DEBUG" if verbose else os.environ.get("MICROLOCAL_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def run(argv: Optional[List[str]] = None) -> Result:
    """Parse arguments and run one subcommand; failures become error documents"""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return _handler(args)(args)
    except WorkbenchError as exc:
        logger.info("%s failed: %s", args.command, exc.message)
        return exc.to_dict(), 1 if exc.kind == "violation" else 2


def main(argv: Optional[List[str]] = None) -> int:
    """CLI entry point"""
    doc, code = run(argv)
    print(dumps(doc))
    return code


if __name__ == "__main__":
    sys.exit(main())
