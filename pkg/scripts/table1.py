"""Table of mean +- std final gaps over the (k, d) grid, via the CLI's run command.

    python scripts/table1.py --jobs 4
"""

import argparse
import sys
from pathlib import Path

from rembo.cli import main as cli

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "table1.cfg"))
    ap.add_argument("--jobs", default="1")
    ap.add_argument("--output")
    args = ap.parse_args()
    argv = ["run", "--config", args.config, "--jobs", args.jobs]
    if args.output:
        argv += ["--output", args.output]
    sys.exit(cli(argv))
