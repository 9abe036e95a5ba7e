"""CLI: run one wire invocation, or install the fixture corpus."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .fixtures import install_corpus
from .wire import run_tool_stdio


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="toolshim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a tool: wire input on stdin, wire output on stdout")
    p.add_argument("manifest", help="path to the tool's manifest JSON")

    p = sub.add_parser("install-fixtures", help="install the fixture tool corpus")
    p.add_argument("target", help="toolset directory to install into")
    p.add_argument("--pairs", type=int, default=3, help="near-duplicate pairs to include")
    p.add_argument("--fillers", type=int, default=12, help="distinct filler tools to include")
    p.add_argument("--no-core", action="store_true", help="skip add/stats/silent_scale/slow_echo")

    args = parser.parse_args(argv)
    if args.command == "run":
        return run_tool_stdio(Path(args.manifest))
    count = install_corpus(
        Path(args.target), core=not args.no_core, pairs=args.pairs, fillers=args.fillers
    )
    print(f"installed {count} fixture tools into {args.target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
