#!/usr/bin/env python3
"""End-to-end demo: generate a labeled corpus, then run stats, filter,
classify, and the combined report into ./demo_out (or a given directory).

Usage: python scripts/run_demo.py [outdir]
"""

from __future__ import annotations

import sys
from pathlib import Path

from pdnskit.cli import main as cli_main


def run(argv) -> None:
    code = cli_main([str(a) for a in argv])
    if code != 0:
        raise SystemExit(f"step failed with exit code {code}: {argv}")


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_out")
    corpus_dir = out / "corpus"
    run(["gen", "--demo", "--out", corpus_dir])
    corpus = corpus_dir / "corpus.ndjson"
    labels = corpus_dir / "corpus.labels.csv"
    run(["stats", corpus, "--out", out / "stats"])
    run(["filter", corpus, "--out", out / "filter", "--watchlist", "builtin"])
    run(["classify", corpus, "--out", out / "classify", "--labels", labels])
    run([
        "report",
        "--stats", out / "stats",
        "--filter", out / "filter",
        "--classify", out / "classify",
        "--out", out / "report.txt",
    ])
    print(f"\ndemo artifacts in {out}/ ; summary at {out / 'report.txt'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
