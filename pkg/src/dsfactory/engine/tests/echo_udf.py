#!/usr/bin/env python3
"""
Subprocess UDF used by the engine tests.

Returns len(sample) as `n_bytes`. `--declare-dim D` also declares an
`embed` fvec(D) output filled with zeros, `--crash-after N` exits with an
error before answering batch N+1, and `--count-file` appends the number of
rows of every batch to a file.
"""

import os
import sys
import argparse

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "..", "..")))

from dsfactory.engine.plugin import serve  # noqa: E402


def main():
    parser = argparse.ArgumentParser(description="Echo sample lengths")
    parser.add_argument("--declare-dim", type=int, default=0)
    parser.add_argument("--crash-after", type=int, default=-1)
    parser.add_argument("--count-file")
    args = parser.parse_args()

    outputs = [("n_bytes", "int64")]
    if args.declare_dim:
        outputs.append(("embed", f"fvec:{args.declare_dim}"))
    batches = []

    def run(rows):
        if 0 <= args.crash_after <= len(batches):
            sys.stderr.write("echo_udf: simulated failure\n")
            sys.stderr.flush()
            sys.exit(3)
        batches.append(len(rows))
        if args.count_file:
            with open(args.count_file, "a", encoding="ascii") as f:
                f.write(f"{len(rows)}\n")
        values = [[len(row["sample"]) if row["sample"] is not None else None for row in rows]]
        if args.declare_dim:
            values.append([[0.0] * args.declare_dim for _ in rows])
        return values

    return serve(outputs, run)


if __name__ == "__main__":
    sys.exit(main())
