"""Command-line front end.

Exit codes: 0 success, 1 parse error (or failed verification), 2 shape
error, 3 tensor environment disagrees with the shape environment.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import interp
from .egraph import EGraph, SaturationLimits, SaturationReport, saturate
from .extract import CostModel, default_cost_model, extract
from .ir import Expr, ShapeError, infer_shape
from .rewrites import RULE_SET_NAMES, all_rules, rule_sets
from .syntax import ParseError, parse, parse_shape_env, pretty_print

EXIT_OK, EXIT_PARSE, EXIT_SHAPE, EXIT_ENV = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        self.code = code
        super().__init__(message)


@dataclass
class RunConfig:
    program: Path
    shapes: Path
    tensors: Path | None = None
    rules: tuple[str, ...] = ("systolic",)
    array_rows: int = 16
    array_cols: int = 16
    block_size: int = 16
    limits: SaturationLimits = field(default_factory=SaturationLimits)
    cost_overrides: dict[str, float] = field(default_factory=dict)
    seed: int = 0
    trials: int = 20

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    def cost_model(self) -> CostModel:
        return default_cost_model().with_overrides(self.cost_overrides)


def _read_program(path: Path) -> Expr:
    try:
        return parse(Path(path).read_text())
    except ParseError as err:
        raise CliError(f"{path}:{err}", EXIT_PARSE) from None


def _read_shapes(path: Path) -> dict[str, tuple[int, ...]]:
    try:
        return parse_shape_env(Path(path).read_text())
    except ParseError as err:
        raise CliError(f"{path}:{err}", EXIT_PARSE) from None


def _check(e: Expr, shapes):
    try:
        return infer_shape(e, shapes)
    except ShapeError as err:
        raise CliError(f"shape error at {err}", EXIT_SHAPE) from None


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_check(program: Path, shapes: Path) -> str:
    return str(_check(_read_program(program), _read_shapes(shapes)))


def cmd_eval(program: Path, shapes: Path, tensors: Path) -> str:
    e = _read_program(program)
    shape_env = _read_shapes(shapes)
    _check(e, shape_env)
    try:
        env = interp.load_tensor_env(tensors)
    except (OSError, interp.TensorFormatError) as err:
        raise CliError(f"cannot read tensors: {err}", EXIT_ENV) from None
    for name, dims in shape_env.items():
        if name not in env:
            raise CliError(f"tensor {name!r} missing from {tensors}", EXIT_ENV)
        if env[name].shape != tuple(dims):
            raise CliError(f"tensor {name!r} has shape {env[name].shape}, expected {tuple(dims)}", EXIT_ENV)
    return interp.format_tensor(interp.evaluate(e, env))


def rewrite(e: Expr, shape_env, config: RunConfig) -> tuple[Expr, SaturationReport, float]:
    g = EGraph(shape_env)
    root = g.add_expr(e)
    sets = rule_sets(config.rules, config.array_rows, config.array_cols, config.block_size)
    report = saturate(g, all_rules(sets), config.limits)
    result = extract(g, root, config.cost_model())
    return result.expr, report, result.cost


def cmd_rewrite(config: RunConfig) -> tuple[str, str]:
    e = _read_program(config.program)
    shape_env = _read_shapes(config.shapes)
    _check(e, shape_env)
    out, report, cost = rewrite(e, shape_env, config)
    return pretty_print(out), f"{report} cost={cost:g}"


@dataclass
class VerifyReport:
    passed: bool
    trials: int
    max_discrepancy: float
    failures: list[int]

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        line = f"{status}: {self.trials} trials, max discrepancy {self.max_discrepancy:.3e}"
        if self.failures:
            line += f", failing trials {self.failures}"
        return line


def verify(a: Expr, b: Expr, shape_env, seed: int = 0, trials: int = 20) -> VerifyReport:
    """Compare two programs on seeded random inputs (trial i uses seed + i)."""
    sa, sb = infer_shape(a, shape_env), infer_shape(b, shape_env)
    if sa.dims != sb.dims:
        raise CliError(f"programs have different shapes: {sa} vs {sb}", EXIT_SHAPE)
    worst, failures = 0.0, []
    for i in range(trials):
        env = interp.random_env(shape_env, np.random.default_rng(seed + i))
        x, y = interp.evaluate(a, env), interp.evaluate(b, env)
        worst = max(worst, interp.discrepancy(x, y))
        if not interp.allclose(x, y):
            failures.append(i)
    return VerifyReport(not failures, trials, worst, failures)


def cmd_verify(program_a: Path, program_b: Path, shapes: Path, seed: int = 0, trials: int = 20) -> VerifyReport:
    a, b = _read_program(program_a), _read_program(program_b)
    shape_env = _read_shapes(shapes)
    _check(a, shape_env)
    _check(b, shape_env)
    return verify(a, b, shape_env, seed, trials)


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------


def _cost_override(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected HEAD=VALUE, got {text!r}")
    return key.strip(), float(value)


def _rule_names(text: str) -> tuple[str, ...]:
    names = tuple(n.strip() for n in text.split(",") if n.strip())
    for n in names:
        if n not in RULE_SET_NAMES:
            raise argparse.ArgumentTypeError(f"unknown rule set {n!r}; choose from {', '.join(RULE_SET_NAMES)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="apsat", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="print the access-pattern shape of a program")
    c.add_argument("program", type=Path)
    c.add_argument("shapes", type=Path)

    e = sub.add_parser("eval", help="evaluate a program on tensors from an env file")
    e.add_argument("program", type=Path)
    e.add_argument("shapes", type=Path)
    e.add_argument("tensors", type=Path)

    r = sub.add_parser("rewrite", help="saturate with rule sets and extract the cheapest program")
    r.add_argument("program", type=Path)
    r.add_argument("shapes", type=Path)
    r.add_argument("--rules", type=_rule_names, default=("systolic",),
                   help="comma-separated subset of " + ",".join(RULE_SET_NAMES))
    r.add_argument("--array-rows", type=int, default=16)
    r.add_argument("--array-cols", type=int, default=16)
    r.add_argument("--block-size", type=int, default=16)
    r.add_argument("--max-iterations", type=int, default=SaturationLimits.max_iterations)
    r.add_argument("--max-nodes", type=int, default=SaturationLimits.max_nodes)
    r.add_argument("--timeout", type=float, default=SaturationLimits.timeout)
    r.add_argument("--cost-model", choices=["default"], default="default")
    r.add_argument("--cost", type=_cost_override, action="append", default=[],
                   metavar="HEAD=VALUE", help="override one cost (heads, or dotProd/reduceSum/reduceMax factors)")
    r.add_argument("--verify-trials", type=int, default=0,
                   help="also check the result against the input on this many random trials")
    r.add_argument("--seed", type=int, default=0)

    v = sub.add_parser("verify", help="check two programs agree on random inputs")
    v.add_argument("program_a", type=Path)
    v.add_argument("program_b", type=Path)
    v.add_argument("shapes", type=Path)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--trials", type=int, default=20)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            print(cmd_check(args.program, args.shapes))
        elif args.command == "eval":
            sys.stdout.write(cmd_eval(args.program, args.shapes, args.tensors))
        elif args.command == "rewrite":
            config = RunConfig(
                args.program, args.shapes, rules=args.rules,
                array_rows=args.array_rows, array_cols=args.array_cols, block_size=args.block_size,
                limits=SaturationLimits(args.max_iterations, args.max_nodes, args.timeout),
                cost_overrides=dict(args.cost), seed=args.seed, trials=max(args.verify_trials, 1),
            )
            text, report = cmd_rewrite(config)
            print(text)
            print(report, file=sys.stderr)
            if args.verify_trials:
                result = verify(_read_program(args.program), parse(text), _read_shapes(args.shapes),
                                args.seed, args.verify_trials)
                print(result, file=sys.stderr)
                if not result.passed:
                    return EXIT_PARSE
        elif args.command == "verify":
            if args.trials < 1:
                raise CliError("--trials must be >= 1", EXIT_PARSE)
            result = cmd_verify(args.program_a, args.program_b, args.shapes, args.seed, args.trials)
            print(result)
            return EXIT_OK if result.passed else EXIT_PARSE
    except CliError as err:
        print(f"apsat: {err}", file=sys.stderr)
        return err.code
    except (OSError, ValueError) as err:
        print(f"apsat: {err}", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
