"""Run the three accelerator-mapping case studies and print a summary table.

    python3 scripts/run_case_studies.py [--trials 20] [--show]

For each case: saturate with the named rule sets, extract, count the
interesting constructs in the result, and check it against the input
program on random tensors.
"""
import argparse
import time
from dataclasses import dataclass

from apsat import kernels
from apsat.cli import RunConfig, rewrite, verify
from apsat.ir import count_heads
from apsat.syntax import pretty_print_indented


@dataclass
class Case:
    name: str
    program: str
    shapes: str
    rules: tuple
    rows: int
    cols: int
    block: int = 16


CASES = [
    Case("matmul 16^3 -> 16x16 array", "matmul.ap", "matmul16.shapes", ("systolic",), 16, 16),
    Case("conv2d C=2 K=3 O=8 H=W=6 -> im2col + 18x8 array", "conv2d_c2_k3_s1.ap",
         "conv2d_n1_c2_h6_o8.shapes", ("im2col", "systolic", "cleanup"), 18, 8),
    Case("matmul 32^3 -> blocked 16x16 arrays", "matmul.ap", "matmul32.shapes",
         ("blocking", "systolic", "cleanup"), 16, 16),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--show", action="store_true", help="print each extracted program")
    args = ap.parse_args()

    header = f"{'case':48} {'iters':>5} {'nodes':>6} {'stop':>10} {'arrays':>6} {'reduceSum':>9} {'cost':>8} {'time':>6}  verify"
    print(header)
    print("-" * len(header))
    for case in CASES:
        e, env = kernels.load_program(case.program), kernels.load_shapes(case.shapes)
        config = RunConfig(case.program, case.shapes, rules=case.rules,
                           array_rows=case.rows, array_cols=case.cols, block_size=case.block)
        start = time.monotonic()
        out, report, cost = rewrite(e, env, config)
        elapsed = time.monotonic() - start
        check = verify(e, out, env, args.seed, args.trials)
        print(f"{case.name:48} {report.iterations:5d} {report.nodes:6d} {report.stop_reason:>10} "
              f"{count_heads(out, 'systolicArray'):6d} {count_heads(out, 'compute', 'reduceSum'):9d} "
              f"{cost:8g} {elapsed:5.2f}s  {check}")
        if args.show:
            print(pretty_print_indented(out))
            print()


if __name__ == "__main__":
    main()
