"""Compare the analyzer with the reference replayer on many random programs.

    python3 scripts/oracle_sweep.py --count 5000 --seed 1
"""

import argparse
import random
import sys
from collections import Counter
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from qir_sentinel.parser import parse_module  # noqa: E402
from qir_sentinel.semantics import explore_function  # noqa: E402
from tests.support.oracle import replay  # noqa: E402
from tests.support.programs import random_program  # noqa: E402


def labels(ledger):
    return ([str(q) for q in ledger.qubits],
            [(str(a), [str(m) for m in row]) for a, row in ledger.arrays])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-ops", type=int, default=30)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    kinds, bad = Counter(), 0
    for i in range(args.count):
        p = random_program(rng, rng.randint(1, args.max_ops))
        res = explore_function(parse_module(p.text), "main")
        o = replay(p.ops)
        got = Counter(d.kind.value for d in res.diagnostics)
        kinds.update(got)
        if labels(res.final_states[0].ledger) != o.snapshot() or got != Counter(k for k, _ in o.diags):
            bad += 1
            print(f"mismatch in program {i}:\n{p.text}", file=sys.stderr)
    print(f"{args.count} programs, {bad} mismatches")
    for kind, n in sorted(kinds.items()):
        print(f"  {kind:<28} {n}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
