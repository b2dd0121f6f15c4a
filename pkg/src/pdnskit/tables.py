"""Small deterministic CSV/JSON emit helpers shared by stats and reports."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

__all__ = ["write_csv", "write_json", "fmt_share", "read_domain_list"]


def fmt_share(x: float) -> str:
    """Fixed-precision share formatting so emitted tables are byte-stable."""
    return f"{x:.6f}"


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def write_json(path: str | Path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")


def read_domain_list(path: str | Path) -> frozenset[str]:
    """Load a one-domain-per-line file; `#` comments and blanks ignored.

    Domains are normalized to lowercase without the trailing dot.
    """
    out = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            out.add(text.lower().rstrip("."))
    return frozenset(out)
