"""Check the shipped fixture corpus against its expectations file."""

import sys

from qir_sentinel.cli import run

if __name__ == "__main__":
    sys.exit(run(["corpus", *(sys.argv[1:] or ["fixtures"])]))
