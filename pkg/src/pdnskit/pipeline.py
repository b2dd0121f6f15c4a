"""Step-wise reduction of a pDNS stream to candidate tunnel SLDs.

Stages: (0) record-type prefilter, (1) known-domain removal, (2) minimum
level, (4) special-use removal, then the grouping stage (3) that keeps
SLDs with enough distinct hostnames. The per-entry stages commute, so the
grouping stage runs last; reported stage ids keep the conventional 0-4
numbering. Optional post-filters prune the candidate list further.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Optional

from pdnskit.model import PdnsEntry, PublicSuffixList, RRType, sld_name
from pdnskit.tables import fmt_share, read_domain_list, write_csv, write_json

__all__ = [
    "ConfigError",
    "KnownLists",
    "PostFilterConfig",
    "FilterConfig",
    "StageCount",
    "CandidateRow",
    "CandidateReport",
    "SPECIAL_USE_RULES",
    "prefilter_rrtype",
    "filter_known_domains",
    "filter_min_level",
    "filter_special_use",
    "filter_min_subdomains",
    "run_pipeline",
]

SPECIAL_USE_RULES = ("arpa", "mail-auth-name", "mail-auth-rdata")

_MAIL_AUTH_LABELS = frozenset({"_dmarc", "_domainkey", "_spf"})
_MAIL_AUTH_RDATA_PREFIXES = ("v=spf1", "v=dkim1", "v=dmarc1")

SAMPLE_FQDNS = 10


class ConfigError(ValueError):
    """A filter/generator configuration is invalid."""


def _shipped(name: str) -> frozenset[str]:
    ref = resources.files("pdnskit.data").joinpath(name)
    with resources.as_file(ref) as path:
        return read_domain_list(path)


@dataclass(frozen=True)
class KnownLists:
    """Known-domain sets: CDNs and tunnel domains are dropped at stage 1;
    watchlist domains are never dropped, only annotated."""

    cdn: frozenset[str] = frozenset()
    known_tunnels: frozenset[str] = frozenset()
    watchlist: frozenset[str] = frozenset()

    def __post_init__(self):
        overlap = (self.cdn & self.known_tunnels) | (self.cdn & self.watchlist) | (
            self.known_tunnels & self.watchlist
        )
        if overlap:
            raise ConfigError(f"known lists overlap: {sorted(overlap)[:5]}")

    @classmethod
    def default(cls, include_watchlist: bool = False) -> "KnownLists":
        """Shipped defaults: the provider tunnel domains, an empty CDN
        list, and optionally the example IOC watchlist."""
        return cls(
            cdn=frozenset(),
            known_tunnels=_shipped("known_tunnel_domains.txt"),
            watchlist=_shipped("watchlist_example.txt") if include_watchlist else frozenset(),
        )

    @classmethod
    def from_files(
        cls,
        cdn: Optional[str | Path] = None,
        known_tunnels: Optional[str | Path] = None,
        watchlist: Optional[str | Path] = None,
    ) -> "KnownLists":
        return cls(
            cdn=read_domain_list(cdn) if cdn else frozenset(),
            known_tunnels=(
                read_domain_list(known_tunnels)
                if known_tunnels
                else _shipped("known_tunnel_domains.txt")
            ),
            watchlist=read_domain_list(watchlist) if watchlist else frozenset(),
        )


@dataclass(frozen=True)
class PostFilterConfig:
    drop_daily_seen: bool = False
    drop_single_entry: bool = False
    drop_alexa_top: bool = False
    alexa_domains: frozenset[str] = frozenset()
    # Days the input is supposed to cover; None derives it from the data.
    observation_days: Optional[int] = None


@dataclass(frozen=True)
class FilterConfig:
    prefilter_types: frozenset[RRType] = frozenset(
        (RRType.parse("NULL"), RRType.parse("TXT"))
    )
    known: KnownLists = field(default_factory=KnownLists.default)
    min_level: int = 4
    min_distinct_fqdns: int = 2
    special_use_rules: frozenset[str] = frozenset(SPECIAL_USE_RULES)
    post_filters: PostFilterConfig = field(default_factory=PostFilterConfig)
    psl: Optional[PublicSuffixList] = None

    def __post_init__(self):
        if self.min_level < 1:
            raise ConfigError("min_level must be >= 1")
        if self.min_distinct_fqdns < 1:
            raise ConfigError("min_distinct_fqdns must be >= 1")
        if not self.prefilter_types:
            raise ConfigError("prefilter_types must not be empty")
        unknown = set(self.special_use_rules) - set(SPECIAL_USE_RULES)
        if unknown:
            raise ConfigError(f"unknown special-use rules: {sorted(unknown)}")
        if self.post_filters.drop_alexa_top and not self.post_filters.alexa_domains:
            raise ConfigError("drop_alexa_top requires an alexa domain list")


# ----------------------------------------------------------------------
# Per-entry stages (stateless, order-independent)


def prefilter_rrtype(
    stream: Iterable[PdnsEntry], types: frozenset[RRType]
) -> Iterator[PdnsEntry]:
    """Stage 0: keep entries whose record type is in `types`."""
    for entry in stream:
        if entry.rrtype in types:
            yield entry


def filter_known_domains(
    stream: Iterable[PdnsEntry],
    lists: KnownLists,
    dropped_tunnels: Optional[Counter] = None,
    dropped_cdn: Optional[Counter] = None,
    psl: Optional[PublicSuffixList] = None,
) -> Iterator[PdnsEntry]:
    """Stage 1: drop entries under known CDN or known tunnel SLDs.

    Dropped known-tunnel volume is itself a result (it measures how much
    of the traffic is already-attributed tunnel activity), so callers can
    pass counters to keep per-SLD tallies.
    """
    cdn, tunnels = lists.cdn, lists.known_tunnels
    for entry in stream:
        sld = sld_name(entry, psl)
        if sld in tunnels:
            if dropped_tunnels is not None:
                dropped_tunnels[sld] += 1
            continue
        if sld in cdn:
            if dropped_cdn is not None:
                dropped_cdn[sld] += 1
            continue
        yield entry


def filter_min_level(
    stream: Iterable[PdnsEntry], min_level: int
) -> Iterator[PdnsEntry]:
    """Stage 2: keep hostnames with at least `min_level` labels."""
    for entry in stream:
        if len(entry.rrname.labels) >= min_level:
            yield entry


def _special_use_match(entry: PdnsEntry, rules: frozenset[str]) -> bool:
    labels = entry.rrname.labels
    if "arpa" in rules and labels[-1] == "arpa":
        return True
    if "mail-auth-name" in rules:
        for label in labels:
            if label in _MAIL_AUTH_LABELS or label.endswith("_domainkey"):
                return True
    if "mail-auth-rdata" in rules and entry.rrtype == "TXT":
        for value in entry.rdata:
            if value[:8].lower().startswith(_MAIL_AUTH_RDATA_PREFIXES):
                return True
    return False


def filter_special_use(
    stream: Iterable[PdnsEntry], rules: frozenset[str] = frozenset(SPECIAL_USE_RULES)
) -> Iterator[PdnsEntry]:
    """Stage 4: drop infrastructure and mail-authentication entries
    (reverse-DNS `.arpa` names; DMARC/DKIM/SPF names and TXT payloads)."""
    for entry in stream:
        if not _special_use_match(entry, rules):
            yield entry


@dataclass
class SldGroup:
    """Accumulated view of all surviving entries under one SLD."""

    sld: str
    entry_count: int = 0
    fqdns: set = field(default_factory=set)
    days: set = field(default_factory=set)
    rrtype_mix: Counter = field(default_factory=Counter)
    bailiwicks: Counter = field(default_factory=Counter)
    samples: list = field(default_factory=list)

    def add(self, entry: PdnsEntry) -> None:
        self.entry_count += 1
        name = entry.rrname.name
        if name not in self.fqdns:
            self.fqdns.add(name)
            if len(self.samples) < SAMPLE_FQDNS:
                self.samples.append(name)
        self.days.add(entry.time_seen.date())
        self.rrtype_mix[str(entry.rrtype)] += 1
        if entry.bailiwick is not None:
            self.bailiwicks[entry.bailiwick.name] += 1


def filter_min_subdomains(
    stream: Iterable[PdnsEntry],
    min_distinct: int = 2,
    psl: Optional[PublicSuffixList] = None,
) -> dict[str, SldGroup]:
    """Stage 3 (grouping): keep SLDs with at least `min_distinct` distinct
    hostnames; returns the surviving groups keyed by SLD."""
    groups: dict[str, SldGroup] = {}
    for entry in stream:
        sld = sld_name(entry, psl)
        group = groups.get(sld)
        if group is None:
            group = groups[sld] = SldGroup(sld=sld)
        group.add(entry)
    return {sld: g for sld, g in groups.items() if len(g.fqdns) >= min_distinct}


# ----------------------------------------------------------------------
# Full pipeline with accounting


@dataclass(frozen=True)
class StageCount:
    stage_id: str  # conventional numbering: "0".."4", or "post:*"
    name: str
    entries_in: int
    entries_out: int
    slds_out: int


@dataclass(frozen=True)
class CandidateRow:
    sld: str
    fqdn_count: int
    entry_count: int
    days_seen: int
    rrtype_mix: dict[str, int]
    dominant_bailiwick: str
    samples: tuple[str, ...]
    watchlist: bool = False


@dataclass(frozen=True)
class WatchlistHit:
    sld: str
    entry_count: int
    fqdn_count: int
    days_seen: int
    rrtype_mix: dict[str, int]


@dataclass
class CandidateReport:
    stage_counts: list[StageCount]
    candidates: list[CandidateRow]
    dropped_known_tunnels: list[tuple[str, int]]
    dropped_cdn: list[tuple[str, int]]
    post_filtered: list[tuple[CandidateRow, str]]
    watchlist_hits: list[WatchlistHit]
    input_entries: int
    observation_days: int
    survivor_entries: Optional[list[PdnsEntry]] = None

    def candidate_slds(self) -> list[str]:
        return [row.sld for row in self.candidates]

    def to_json_dict(self) -> dict:
        return {
            "input_entries": self.input_entries,
            "observation_days": self.observation_days,
            "stages": [
                {
                    "stage_id": s.stage_id,
                    "name": s.name,
                    "entries_in": s.entries_in,
                    "entries_out": s.entries_out,
                    "slds_out": s.slds_out,
                }
                for s in self.stage_counts
            ],
            "candidates": [
                {
                    "sld": c.sld,
                    "fqdn_count": c.fqdn_count,
                    "entry_count": c.entry_count,
                    "days_seen": c.days_seen,
                    "rrtype_mix": dict(sorted(c.rrtype_mix.items())),
                    "dominant_bailiwick": c.dominant_bailiwick,
                    "samples": list(c.samples),
                    "watchlist": c.watchlist,
                }
                for c in self.candidates
            ],
            "dropped_known_tunnels": [
                {"sld": sld, "entry_count": n} for sld, n in self.dropped_known_tunnels
            ],
            "dropped_cdn": [
                {"sld": sld, "entry_count": n} for sld, n in self.dropped_cdn
            ],
            "post_filtered": [
                {"sld": c.sld, "entry_count": c.entry_count, "reason": reason}
                for c, reason in self.post_filtered
            ],
            "watchlist_hits": [
                {
                    "sld": h.sld,
                    "entry_count": h.entry_count,
                    "fqdn_count": h.fqdn_count,
                    "days_seen": h.days_seen,
                    "rrtype_mix": dict(sorted(h.rrtype_mix.items())),
                }
                for h in self.watchlist_hits
            ],
        }

    def to_text(self) -> str:
        lines = []
        lines.append(f"pipeline report: {self.input_entries} entries in, "
                     f"{len(self.candidates)} candidate SLDs, "
                     f"{self.observation_days} observation day(s)")
        lines.append("")
        lines.append(f"{'stage':<24} {'entries_in':>10} {'entries_out':>12} {'slds_out':>9}")
        for s in self.stage_counts:
            label = f"{s.stage_id}:{s.name}"
            lines.append(f"{label:<24} {s.entries_in:>10} {s.entries_out:>12} {s.slds_out:>9}")
        if self.dropped_known_tunnels:
            lines.append("")
            lines.append("known tunnel domains dropped at stage 1:")
            for sld, n in self.dropped_known_tunnels:
                lines.append(f"  {sld:<30} {n:>10}")
        if self.dropped_cdn:
            lines.append("")
            lines.append("known CDN domains dropped at stage 1:")
            for sld, n in self.dropped_cdn:
                lines.append(f"  {sld:<30} {n:>10}")
        lines.append("")
        if self.candidates:
            lines.append("candidate SLDs (for analyst review):")
            lines.append("  sld                            fqdns   entries  days  types                bailiwick")
            for c in self.candidates:
                mix = ",".join(f"{t}:{n}" for t, n in sorted(c.rrtype_mix.items()))
                mark = " [watchlist]" if c.watchlist else ""
                lines.append(
                    f"  {c.sld:<30} {c.fqdn_count:>6} {c.entry_count:>9} {c.days_seen:>5}  "
                    f"{mix:<20} {c.dominant_bailiwick}{mark}"
                )
        else:
            lines.append("no candidate SLDs survived the pipeline")
        if self.post_filtered:
            lines.append("")
            lines.append("removed by post-filters:")
            for c, reason in self.post_filtered:
                lines.append(f"  {c.sld:<30} {c.entry_count:>9}  ({reason})")
        if self.watchlist_hits:
            lines.append("")
            lines.append("watchlist domains observed anywhere in the input:")
            for h in self.watchlist_hits:
                mix = ",".join(f"{t}:{n}" for t, n in sorted(h.rrtype_mix.items()))
                lines.append(
                    f"  {h.sld:<30} {h.entry_count:>9} entries, {h.fqdn_count} fqdns, "
                    f"{h.days_seen} day(s), {mix}"
                )
        lines.append("")
        return "\n".join(lines)

    def write(self, outdir: str | Path) -> list[Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = []
        json_path = outdir / "candidates.json"
        write_json(json_path, self.to_json_dict())
        paths.append(json_path)
        text_path = outdir / "candidates.txt"
        text_path.write_text(self.to_text(), encoding="utf-8")
        paths.append(text_path)
        csv_path = outdir / "stage_counts.csv"
        write_csv(
            csv_path,
            ("stage_id", "name", "entries_in", "entries_out", "slds_out"),
            [
                (s.stage_id, s.name, s.entries_in, s.entries_out, s.slds_out)
                for s in self.stage_counts
            ],
        )
        paths.append(csv_path)
        return paths


def _group_row(group: SldGroup, watchlist: bool) -> CandidateRow:
    dominant = ""
    if group.bailiwicks:
        dominant = max(group.bailiwicks.items(), key=lambda kv: (kv[1], kv[0]))[0]
    return CandidateRow(
        sld=group.sld,
        fqdn_count=len(group.fqdns),
        entry_count=group.entry_count,
        days_seen=len(group.days),
        rrtype_mix=dict(group.rrtype_mix),
        dominant_bailiwick=dominant,
        samples=tuple(group.samples),
        watchlist=watchlist,
    )


def run_pipeline(
    stream: Iterable[PdnsEntry],
    config: FilterConfig,
    keep_entries: bool = False,
) -> CandidateReport:
    """Run all stages over the stream in one pass with full accounting.

    Per-entry stages are applied in the order 0, 1, 2, 4 (their outcome is
    order-independent); the grouping stage 3 runs last so distinct-FQDN
    counts reflect only tunnel-plausible entries. `keep_entries` retains
    the surviving entries on the report for testing and re-analysis.
    """
    types = config.prefilter_types
    lists = config.known
    watch = lists.watchlist
    min_level = config.min_level
    rules = config.special_use_rules
    psl = config.psl

    n_read = 0
    all_days = set()
    watch_groups: dict[str, SldGroup] = {}
    out0 = out1 = out2 = out4 = 0
    slds0: set[str] = set()
    slds1: set[str] = set()
    slds2: set[str] = set()
    slds4: set[str] = set()
    dropped_tunnels: Counter = Counter()
    dropped_cdn: Counter = Counter()
    groups: dict[str, SldGroup] = {}
    survivors: list[PdnsEntry] = [] if keep_entries else None

    for entry in stream:
        n_read += 1
        all_days.add(entry.time_seen.date())
        sld = sld_name(entry, psl)
        if watch and sld in watch:
            wg = watch_groups.get(sld)
            if wg is None:
                wg = watch_groups[sld] = SldGroup(sld=sld)
            wg.add(entry)
        # stage 0: record-type prefilter
        if entry.rrtype not in types:
            continue
        out0 += 1
        slds0.add(sld)
        # stage 1: known domains
        if sld in lists.known_tunnels:
            dropped_tunnels[sld] += 1
            continue
        if sld in lists.cdn:
            dropped_cdn[sld] += 1
            continue
        out1 += 1
        slds1.add(sld)
        # stage 2: minimum level
        if len(entry.rrname.labels) < min_level:
            continue
        out2 += 1
        slds2.add(sld)
        # stage 4: special-use removal
        if _special_use_match(entry, rules):
            continue
        out4 += 1
        slds4.add(sld)
        # stage 3: grouping
        group = groups.get(sld)
        if group is None:
            group = groups[sld] = SldGroup(sld=sld)
        group.add(entry)
        if survivors is not None:
            survivors.append(entry)

    surviving = {
        sld: g for sld, g in groups.items() if len(g.fqdns) >= config.min_distinct_fqdns
    }
    grouped_entries = sum(g.entry_count for g in surviving.values())

    stage_counts = [
        StageCount("0", "rrtype-prefilter", n_read, out0, len(slds0)),
        StageCount("1", "known-domains", out0, out1, len(slds1)),
        StageCount("2", "min-level", out1, out2, len(slds2)),
        StageCount("4", "special-use", out2, out4, len(slds4)),
        StageCount("3", "min-subdomains", out4, grouped_entries, len(surviving)),
    ]

    observation_days = config.post_filters.observation_days or len(all_days)
    post_filtered: list[tuple[CandidateRow, str]] = []
    pf = config.post_filters

    def sort_key(g: SldGroup):
        return (-g.entry_count, g.sld)

    ordered = sorted(surviving.values(), key=sort_key)
    kept: list[CandidateRow] = []
    for group in ordered:
        row = _group_row(group, watchlist=group.sld in watch)
        if not row.watchlist:
            if pf.drop_daily_seen and observation_days > 0 and row.days_seen >= observation_days:
                post_filtered.append((row, "daily-seen"))
                continue
            if pf.drop_single_entry and row.entry_count == 1:
                post_filtered.append((row, "single-entry"))
                continue
            if pf.drop_alexa_top and row.sld in pf.alexa_domains:
                post_filtered.append((row, "alexa-top"))
                continue
        kept.append(row)

    for post_id, post_name, flag in (
        ("post:daily-seen", "daily-seen", pf.drop_daily_seen),
        ("post:single-entry", "single-entry", pf.drop_single_entry),
        ("post:alexa", "alexa-top", pf.drop_alexa_top),
    ):
        if not flag:
            continue
        removed = [c for c, reason in post_filtered if reason == post_name]
        prev = stage_counts[-1]
        entries_out = prev.entries_out - sum(c.entry_count for c in removed)
        stage_counts.append(
            StageCount(
                post_id,
                post_name,
                prev.entries_out,
                entries_out,
                prev.slds_out - len(removed),
            )
        )

    if survivors is not None:
        keep_slds = {row.sld for row in kept}
        survivors = [e for e in survivors if sld_name(e, psl) in keep_slds]

    watch_hits = [
        WatchlistHit(
            sld=g.sld,
            entry_count=g.entry_count,
            fqdn_count=len(g.fqdns),
            days_seen=len(g.days),
            rrtype_mix=dict(g.rrtype_mix),
        )
        for g in sorted(watch_groups.values(), key=sort_key)
    ]

    return CandidateReport(
        stage_counts=stage_counts,
        candidates=kept,
        dropped_known_tunnels=sorted(
            dropped_tunnels.items(), key=lambda kv: (-kv[1], kv[0])
        ),
        dropped_cdn=sorted(dropped_cdn.items(), key=lambda kv: (-kv[1], kv[0])),
        post_filtered=post_filtered,
        watchlist_hits=watch_hits,
        input_entries=n_read,
        observation_days=observation_days,
        survivor_entries=survivors,
    )
