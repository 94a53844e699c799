"""Write fixtures/expectations.json from the analyzer's current output.

The result must be audited by hand before committing; `git diff` on the
expectations file is the review surface.
"""

import argparse
import json
from pathlib import Path

from qir_sentinel.cli import analyze_source, observed_pairs


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("directory", nargs="?", default="fixtures")
    ap.add_argument("--out", help="default: DIR/expectations.json")
    args = ap.parse_args()
    d = Path(args.directory)
    table = {}
    for f in sorted(d.glob("*.ll")):
        report = analyze_source(f.read_text(encoding="utf-8"), str(f))
        table[f.name] = [list(p) for p in observed_pairs(report)]
    out = Path(args.out) if args.out else d / "expectations.json"
    body = ",\n".join(f"  {json.dumps(k)}: {json.dumps(v)}" for k, v in table.items())
    out.write_text("{\n" + body + "\n}\n", encoding="utf-8")
    print(f"wrote {len(table)} entries to {out}")


if __name__ == "__main__":
    main()
