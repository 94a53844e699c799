"""Throw random and mutated bytes at the parser; any non-parse exception is a crash."""

import argparse
import random
import sys
import traceback
from pathlib import Path

from qir_sentinel.cli import analyze_source
from qir_sentinel.parser import ParseErrors, parse_module


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--corpus", default="fixtures")
    args = ap.parse_args()
    rng = random.Random(args.seed)
    seeds = [p.read_bytes() for p in sorted(Path(args.corpus).glob("*.ll"))] or [b""]
    accepted = crashes = 0
    for i in range(args.count):
        if i % 2 or not seeds[0]:
            data = bytes(rng.getrandbits(8) for _ in range(rng.randint(0, 128)))
        else:
            buf = bytearray(rng.choice(seeds))
            for _ in range(rng.randint(1, 6)):
                buf[rng.randrange(len(buf))] = rng.getrandbits(8)
            data = bytes(buf)
        text = data.decode("latin-1")
        try:
            parse_module(text)
            accepted += 1
            analyze_source(text, "fuzz.ll")
        except ParseErrors:
            pass
        except Exception:
            crashes += 1
            print(f"crash on input {i}: {data!r}", file=sys.stderr)
            traceback.print_exc()
    print(f"{args.count} inputs, {accepted} parsed, {crashes} crashes")
    return 1 if crashes else 0


if __name__ == "__main__":
    sys.exit(main())
