import argparse
import os
import sys
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Optional

# Ensure project `src` directory is on sys.path for imports like `graph.*`
src_dir = str(Path(__file__).resolve().parents[1])
if src_dir not in sys.path:
    sys.path.insert(0, src_dir)
from pydantic import ValidationError

from app.config import CliConfig
from app.logging_setup import configure_logging
from app.selftest import SelftestPlan, run_selftest
from graph.eval_graph import EvalReport, evaluate_with_store
from qcm.errors import QcmError
from tools.expr_parser import parse
from tools.rng import GENERATOR_NAME

EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2


def _version() -> str:
    try:
        return version("qcm-arith")
    except PackageNotFoundError:
        return "0.1.0"


# (names, add_argument options) shared by eval, trace and estimate
COMMON_FLAGS: list[tuple[tuple[str, ...], dict]] = [
    (("--mode",), dict(choices=["exact", "sampled"], default="exact", help="exact decode, or also estimate from finite shots")),
    (("--shots",), dict(type=int, help="shots per qubit ensemble in sampled mode (default 100000)")),
    (("--seed",), dict(type=int, help=f"seed of the {GENERATOR_NAME} generator; drawn and echoed when omitted")),
    (("--level",), dict(type=float, default=0.95, help="confidence level of the interval (default 0.95)")),
    (("--renorm",), dict(choices=["on", "off"], default="on", help="renormalize between expression nodes")),
    (("--trace",), dict(dest="trace_path", metavar="PATH", help="write the gate events as JSON lines to PATH")),
    (("--json",), dict(action="store_true", help="print the report as one JSON object")),
    (("--den-floor",), dict(type=float, default=1e-9, help="smallest denominator a real4 may decode with")),
    (("-v", "--verbose"), dict(action="count", default=0, help="diagnostics on stderr; repeat for gate events")),
]

SELFTEST_FLAGS: list[tuple[tuple[str, ...], dict]] = [
    (("--seed",), dict(type=int, help="seed of the suite")),
    (("--workers",), dict(type=int, help="processes the pair checks are split across (default: CPU count)")),
    (("-v", "--verbose"), dict(action="count", default=0, help="per-criterion timings on stderr")),
]


def _flag_summary(title: str, flags: list[tuple[tuple[str, ...], dict]]) -> str:
    lines = [f"{title}:"]
    lines += [f"  {', '.join(names):<16} {options['help']}" for names, options in flags]
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    for names, options in COMMON_FLAGS:
        common.add_argument(*names, **options)

    parser = argparse.ArgumentParser(
        prog="qcm-arith",
        description="Real-number arithmetic on simulated qubit-ensemble storage.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="\n\n".join(
            [
                _flag_summary("options of eval, trace and estimate", COMMON_FLAGS),
                _flag_summary("options of selftest", SELFTEST_FLAGS),
                f"Sampling uses numpy's {GENERATOR_NAME}; qubit i of a real4 is sampled with seed\n"
                "child i of SeedSequence(seed).spawn(4).",
            ]
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("eval", "evaluate an expression through the circuits"),
        ("trace", "evaluate and write the gate trace (needs --trace PATH)"),
        ("estimate", "evaluate and estimate the result from sampled shots"),
    ):
        sub = commands.add_parser(name, parents=[common], help=text)
        sub.add_argument("expr", help='arithmetic expression, e.g. "(2+3)*4"')
    selftest = commands.add_parser("selftest", help="run the acceptance suite")
    for names, options in SELFTEST_FLAGS:
        selftest.add_argument(*names, **options)
    return parser


def config_from_args(args: argparse.Namespace) -> CliConfig:
    fields = {
        "command": args.command,
        "verbosity": args.verbose,
        "seed": args.seed,
    }
    if args.command == "selftest":
        fields["workers"] = args.workers
    else:
        fields.update(
            expr=args.expr,
            mode=args.mode,
            shots=args.shots,
            level=args.level,
            renorm=args.renorm == "on",
            output="json" if args.json else "human",
            trace_path=args.trace_path,
            den_floor=args.den_floor,
        )
    return CliConfig(**fields)


def format_human(report: EvalReport) -> str:
    lines = [
        f"expr            {report.expr}",
        f"exact           {report.exact_value!r}",
        f"circuit         {report.circuit_value!r}",
        f"abs_err         {report.abs_err:.3e}",
        f"rel_err         {report.rel_err:.3e}",
        f"physical_gates  {report.physical_gates}",
        f"clones          {report.clones}",
        f"renorms         {report.renorms}",
        f"min |den|       {report.min_den_magnitude:.3e}",
    ]
    if report.estimate is not None:
        e = report.estimate
        lines.append(
            f"estimate        {e.point!r} [{e.ci_low!r}, {e.ci_high!r}] "
            f"({e.level:.0%} {e.method}, {e.shots} shots, seed {e.seed})"
        )
    return "\n".join(lines)


def run_expression(config: CliConfig) -> int:
    ast = parse(config.expr)
    report, store = evaluate_with_store(
        ast,
        mode=config.mode,
        shots=config.shots,
        seed=config.seed,
        renorm=config.renorm,
        settings=config.settings(),
        level=config.level,
    )
    if config.trace_path is not None:
        store.export_trace(config.trace_path)
    if config.seed_generated:
        print(f"seed: {config.seed}", file=sys.stderr)
    print(report.to_json() if config.output == "json" else format_human(report))
    return EXIT_OK


def run_selftest_command(config: CliConfig) -> int:
    options = {"workers": config.workers or os.cpu_count() or 1}
    if config.seed is not None:
        options["seed"] = config.seed
    started = time.perf_counter()
    results = run_selftest(SelftestPlan(**options))
    print(f"selftest took {time.perf_counter() - started:.1f}s on {options['workers']} worker(s)", file=sys.stderr)
    for result in results:
        print(result.line())
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_ERROR if failed else EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 0 for --help/--version and 2 for usage errors
        return int(e.code or 0)

    try:
        config = config_from_args(args)
    except ValidationError as e:
        for error in e.errors():
            print(f"usage error: {error['msg']}", file=sys.stderr)
        return EXIT_USAGE

    configure_logging(config.verbosity)
    try:
        if config.command == "selftest":
            return run_selftest_command(config)
        return run_expression(config)
    except QcmError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
