"""Deterministic, seeded generator of labeled synthetic pDNS corpora.

Tunnel streams chunk a pseudorandom payload into hostname labels whose
structure (level count, label lengths, encoding, markers, record types)
is derived from the implementation profiles, so generated traffic matches
the fingerprints by construction. Benign background classes cover the
common reasons real feeds contain high-volume or oddly-shaped names.
"""

from __future__ import annotations

import base64
import csv
import gzip
import json
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from hashlib import blake2b
from pathlib import Path
from random import Random
from typing import Iterable, Iterator, Optional

from pdnskit.fingerprint import (
    ENCODING_BASE32,
    ENCODING_BASE64,
    ENCODING_HEX,
    ENCODING_NONE,
    ImplementationProfile,
    ProfileSet,
)
from pdnskit.model import MAX_NAME_BYTES, PdnsEntry, RRType, parse_fqdn

__all__ = [
    "GenConfig",
    "TunnelSpec",
    "BackgroundSpec",
    "LabeledEntry",
    "GenConfigError",
    "UnknownProfileError",
    "BACKGROUND_KINDS",
    "generate",
    "write_corpus",
    "queries_for_payload",
]

BACKGROUND_KINDS = (
    "plain-a",
    "cdn-like",
    "spf-txt",
    "dkim-txt",
    "rdns-arpa",
    "localhost-style",
)

_BASE36 = "abcdefghijklmnopqrstuvwxyz0123456789"


class GenConfigError(ValueError):
    """The generator configuration is invalid."""


class UnknownProfileError(GenConfigError):
    """A tunnel spec references a profile that is not in the profile set."""


@dataclass(frozen=True)
class TunnelSpec:
    profile: str
    sld: str
    third: str = "t"
    payload_bytes: int = 4096
    queries: Optional[int] = None  # None: derived from payload and capacity


@dataclass(frozen=True)
class BackgroundSpec:
    kind: str
    sld: str
    queries: int = 10


@dataclass
class GenConfig:
    seed: int = 1
    start_date: date = date(2017, 7, 1)
    days: int = 1
    tunnels: list[TunnelSpec] = field(default_factory=list)
    background: list[BackgroundSpec] = field(default_factory=list)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "GenConfig":
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        try:
            return cls(
                seed=int(obj.get("seed", 1)),
                start_date=date.fromisoformat(obj.get("start_date", "2017-07-01")),
                days=int(obj.get("days", 1)),
                tunnels=[TunnelSpec(**t) for t in obj.get("tunnels", [])],
                background=[BackgroundSpec(**b) for b in obj.get("background", [])],
            )
        except (TypeError, ValueError) as exc:
            raise GenConfigError(f"bad generator config: {exc}") from exc


@dataclass(frozen=True)
class LabeledEntry:
    entry: PdnsEntry
    kind: str  # "tunnel" or "benign"
    label: str  # implementation name or background class


def _derive_seed(root: int, *parts) -> int:
    """Stable per-stream seed; avoids Python's randomized str hashing."""
    key = "|".join(str(p) for p in (root,) + parts).encode("utf-8")
    return int.from_bytes(blake2b(key, digest_size=8).digest(), "big")


def _encoded_len(encoding: str, n_bytes: int) -> int:
    if encoding == ENCODING_BASE32:
        return (8 * n_bytes + 4) // 5
    if encoding == ENCODING_HEX:
        return 2 * n_bytes
    if encoding == ENCODING_BASE64:
        return (4 * n_bytes + 2) // 3
    if encoding == ENCODING_NONE:
        return n_bytes
    raise GenConfigError(f"profile encoding {encoding!r} is not generatable")


def _encode(encoding: str, data: bytes) -> str:
    if encoding == ENCODING_BASE32:
        return base64.b32encode(data).decode("ascii").lower().rstrip("=")
    if encoding == ENCODING_HEX:
        return data.hex()
    if encoding == ENCODING_BASE64:
        return base64.urlsafe_b64encode(data).decode("ascii").rstrip("=")
    return "".join(_BASE36[b % 36] for b in data)


@dataclass(frozen=True)
class _QueryPlan:
    """Per-query emission structure derived from one profile."""

    encoding: str
    bytes_per_query: int
    chars_per_query: int
    chunk_label_len: int
    n_chunk_labels: int
    marker_labels: tuple[str, ...]
    rrtype_cycle: tuple[RRType, ...]
    lead_chars: str  # candidate replacement chars for the first byte, "" = free


def _lead_alphabet(profile: ImplementationProfile, encoding: str) -> str:
    if profile.first_chars == {"letter"}:
        return "abcdef" if encoding == ENCODING_HEX else "abcdefghijklmnopqrstuvwxyz"
    if profile.first_chars == {"digit"}:
        return "234567" if encoding == ENCODING_BASE32 else "0123456789"
    return ""


def derive_plan(profile: ImplementationProfile, sld: str, third: str) -> _QueryPlan:
    """Compute per-query payload capacity and label layout from a profile.

    The capacity follows from the profile's level and label-length ranges
    plus the wire limits; nothing is hard-coded per tool.
    """
    if not profile.encodings:
        raise GenConfigError(f"profile {profile.name}: no encoding listed")
    encoding = profile.encodings[0]  # first listed = native encoding
    n_left = profile.levels[0] - 3  # labels left of the third-level label
    if n_left < 1:
        raise GenConfigError(f"profile {profile.name}: level range leaves no payload")
    marker_labels = profile.markers
    n_chunk = n_left - len(marker_labels)
    if n_chunk < 1:
        raise GenConfigError(f"profile {profile.name}: markers leave no chunk labels")
    label_len = profile.label4_len[0]
    marker_chars = sum(len(m) for m in marker_labels)
    wire_cap = MAX_NAME_BYTES - 2 - len(third) - len(sld)
    cap = min(
        profile.payload_len[1] - (n_left - 1) - marker_chars,
        n_chunk * label_len,
        wire_cap - (n_left - 1) - marker_chars,
    )
    if cap < 1:
        raise GenConfigError(f"profile {profile.name}: no room for payload chars")
    bytes_per_query = 0
    for b in range(cap, 0, -1):
        if _encoded_len(encoding, b) <= cap:
            bytes_per_query = b
            break
    if bytes_per_query == 0:
        raise GenConfigError(f"profile {profile.name}: capacity too small to encode")
    chars = _encoded_len(encoding, bytes_per_query)
    rem = chars - (n_chunk - 1) * label_len
    if not 1 <= rem <= label_len:
        raise GenConfigError(
            f"profile {profile.name}: derived layout is inconsistent "
            f"({chars} chars into {n_chunk} labels of {label_len})"
        )
    payload_len = chars + marker_chars + (n_left - 1)
    if not profile.payload_len[0] <= payload_len <= profile.payload_len[1]:
        raise GenConfigError(
            f"profile {profile.name}: derived payload length {payload_len} "
            f"outside declared range {profile.payload_len}"
        )
    cycle = tuple(sorted(profile.rrtypes))
    return _QueryPlan(
        encoding=encoding,
        bytes_per_query=bytes_per_query,
        chars_per_query=chars,
        chunk_label_len=label_len,
        n_chunk_labels=n_chunk,
        marker_labels=marker_labels,
        rrtype_cycle=cycle,
        lead_chars=_lead_alphabet(profile, encoding),
    )


def queries_for_payload(
    profile: ImplementationProfile, sld: str, third: str, payload_bytes: int
) -> int:
    """How many queries a payload of the given size needs for this profile."""
    plan = derive_plan(profile, sld, third)
    return max(1, math.ceil(payload_bytes / plan.bytes_per_query))


def _ensure_tail(chars: list[str], required: str, min_count: int, slot: int, rng: Random) -> int:
    """Guarantee `min_count` occurrences of `required` chars by rewriting
    tail positions; returns the next free tail slot. Keeps every generated
    chunk carrying its encoding's signature characters."""
    have = sum(c in required for c in chars)
    while have < min_count:
        slot += 1
        chars[-slot] = required[rng.randrange(len(required))]
        have += 1
    return slot


def _signature_fix(encoding: str, text: str, lead_chars: str, rng: Random) -> str:
    chars = list(text)
    if lead_chars and chars[0] not in lead_chars:
        chars[0] = lead_chars[rng.randrange(len(lead_chars))]
    slot = 0
    if encoding == ENCODING_BASE32:
        slot = _ensure_tail(chars, "234567", 1, slot, rng)
    elif encoding == ENCODING_HEX:
        slot = _ensure_tail(chars, "0123456789", 1, slot, rng)
    elif encoding == ENCODING_BASE64:
        slot = _ensure_tail(chars, "-_", 2, slot, rng)
        slot = _ensure_tail(chars, "0123456789", 1, slot, rng)
        slot = _ensure_tail(chars, "abcdefghijklmnopqrstuvwxyz", 1, slot, rng)
        slot = _ensure_tail(chars, "ABCDEFGHIJKLMNOPQRSTUVWXYZ", 1, slot, rng)
    else:  # plain alphanumerics must not look like base32/hex
        slot = _ensure_tail(chars, "0189", 4, slot, rng)
    return "".join(chars)


def _blob(rng: Random, size: int) -> str:
    raw = base64.b64encode(rng.randbytes(size)).decode("ascii")
    while len(raw) < size:
        raw += base64.b64encode(rng.randbytes(size)).decode("ascii")
    return raw[:size]


def _downstream_rdata(rng: Random, rrtype: RRType, sld: str, third: str, i: int) -> tuple[str, ...]:
    if rrtype in ("NULL", "TXT"):
        roll = rng.random()
        if roll < 0.50:
            size = rng.randrange(30, 85)
        elif roll < 0.93:
            size = rng.randrange(120, 900)
        else:
            size = rng.randrange(1050, 1400)
        return (_blob(rng, size),)
    if rrtype == "A":
        return (f"{rng.randrange(1, 224)}.{rng.randrange(256)}.{rng.randrange(256)}.{rng.randrange(1, 255)}",)
    if rrtype == "AAAA":
        return (f"2001:db8::{rng.randrange(1, 0xffff):x}",)
    if rrtype == "CNAME":
        return (f"r{i % 16}.{third}.{sld}.",)
    if rrtype == "MX":
        return (f"10 m{i % 4}.{sld}.",)
    if rrtype == "SRV":
        return (f"0 0 {rng.randrange(1024, 65535)} s{i % 4}.{sld}.",)
    if rrtype == "PTR":
        return (f"host{i % 32}.{sld}.",)
    return (_blob(rng, 24),)


def _timestamp(start: datetime, span_s: int, i: int, n: int, rng: Random) -> datetime:
    slot = span_s * i // n
    width = max(1, span_s // n)
    return start + timedelta(seconds=min(span_s - 1, slot + rng.randrange(width)))


def _validate(config: GenConfig, profiles: ProfileSet) -> None:
    if config.days < 1:
        raise GenConfigError("days must be >= 1")
    for spec in config.tunnels:
        if spec.profile not in profiles.by_name:
            raise UnknownProfileError(f"unknown profile: {spec.profile!r}")
        if spec.payload_bytes < 1:
            raise GenConfigError(f"{spec.sld}: payload_bytes must be >= 1")
        if spec.queries is not None and spec.queries < 1:
            raise GenConfigError(f"{spec.sld}: queries must be >= 1")
        sld = parse_fqdn(spec.sld)
        if len(sld.labels) != 2:
            raise GenConfigError(
                f"tunnel SLD must have exactly two labels, got {spec.sld!r}"
            )
        third = parse_fqdn(spec.third)
        if len(third.labels) != 1:
            raise GenConfigError(f"third-level label must be a single label: {spec.third!r}")
    for spec in config.background:
        if spec.kind not in BACKGROUND_KINDS:
            raise GenConfigError(f"unknown background class: {spec.kind!r}")
        if spec.queries < 1:
            raise GenConfigError(f"{spec.sld}: queries must be >= 1")
        parse_fqdn(spec.sld)


def _gen_tunnel(
    spec: TunnelSpec,
    profile: ImplementationProfile,
    start: datetime,
    span_s: int,
    seed: int,
) -> Iterator[LabeledEntry]:
    sld = parse_fqdn(spec.sld).name
    third = parse_fqdn(spec.third).name
    plan = derive_plan(profile, sld, third)
    rng = Random(seed)
    n_queries = spec.queries
    if n_queries is None:
        n_queries = max(1, math.ceil(spec.payload_bytes / plan.bytes_per_query))
    bailiwick = parse_fqdn(f"{third}.{sld}")
    domain = parse_fqdn(sld)
    L = plan.chunk_label_len
    for i in range(n_queries):
        data = rng.randbytes(plan.bytes_per_query)
        text = _signature_fix(plan.encoding, _encode(plan.encoding, data), plan.lead_chars, rng)
        rem = plan.chars_per_query - (plan.n_chunk_labels - 1) * L
        labels = list(plan.marker_labels) + [text[:rem]] + [
            text[rem + k * L : rem + (k + 1) * L] for k in range(plan.n_chunk_labels - 1)
        ]
        rrname = parse_fqdn(".".join(labels) + f".{third}.{sld}")
        rrtype = plan.rrtype_cycle[i % len(plan.rrtype_cycle)]
        entry = PdnsEntry(
            domain=domain,
            time_seen=_timestamp(start, span_s, i, n_queries, rng),
            bailiwick=bailiwick,
            rrname=rrname,
            rrclass="IN",
            rrtype=rrtype,
            rdata=_downstream_rdata(rng, rrtype, sld, third, i),
        )
        yield LabeledEntry(entry=entry, kind="tunnel", label=profile.name)


def _gen_background(
    spec: BackgroundSpec, start: datetime, span_s: int, seed: int
) -> Iterator[LabeledEntry]:
    rng = Random(seed)
    sld = parse_fqdn(spec.sld).name
    domain = parse_fqdn(sld)
    kind = spec.kind
    octet = rng.randrange(1, 224)
    arpa_zone = f"{octet}.in-addr.arpa"
    for i in range(spec.queries):
        rrclass = "IN"
        bailiwick = domain
        if kind == "plain-a":
            host = (sld, f"www.{sld}", f"mail.{sld}", f"api.{sld}")[i % 4]
            rrtype, rdata = RRType.parse("A"), _downstream_rdata(rng, RRType.parse("A"), sld, "", i)
            rrname = parse_fqdn(host)
        elif kind == "cdn-like":
            rrname = parse_fqdn(f"img{i}.cdn.{sld}")
            rrtype, rdata = RRType.parse("CNAME"), (f"edge{i % 7}.cdnhost.net.",)
        elif kind == "spf-txt":
            host = (sld, f"mail.{sld}", f"_spf.{sld}")[i % 3]
            rrname = parse_fqdn(host)
            rrtype = RRType.parse("TXT")
            rdata = (f"v=spf1 ip4:192.0.2.0/24 include:_spf.{sld} ~all",)
        elif kind == "dkim-txt":
            rrname = parse_fqdn(f"selector{i % 3}._domainkey.{sld}")
            rrtype = RRType.parse("TXT")
            rdata = (f"v=DKIM1; k=rsa; p={_blob(rng, 180)}",)
        elif kind == "rdns-arpa":
            rrname = parse_fqdn(
                f"{rng.randrange(256)}.{rng.randrange(256)}.{rng.randrange(256)}.{octet}.in-addr.arpa"
            )
            domain_f = parse_fqdn(arpa_zone)
            rrtype, rdata = RRType.parse("PTR"), (f"host{i % 32}.{sld}.",)
            yield LabeledEntry(
                entry=PdnsEntry(
                    domain=domain_f,
                    time_seen=_timestamp(start, span_s, i, spec.queries, rng),
                    bailiwick=domain_f,
                    rrname=rrname,
                    rrclass=rrclass,
                    rrtype=rrtype,
                    rdata=rdata,
                ),
                kind="benign",
                label=kind,
            )
            continue
        else:  # localhost-style: many random subdomains resolving to loopback
            sub = "".join(_BASE36[rng.randrange(36)] for _ in range(10))
            rrname = parse_fqdn(f"{sub}.{sld}")
            rrtype, rdata = RRType.parse("A"), ("127.0.0.1",)
        yield LabeledEntry(
            entry=PdnsEntry(
                domain=domain,
                time_seen=_timestamp(start, span_s, i, spec.queries, rng),
                bailiwick=bailiwick,
                rrname=rrname,
                rrclass=rrclass,
                rrtype=rrtype,
                rdata=rdata,
            ),
            kind="benign",
            label=kind,
        )


def generate(
    config: GenConfig, profiles: Optional[ProfileSet] = None
) -> Iterator[LabeledEntry]:
    """Yield labeled entries for every configured stream, deterministically.

    The same config and seed always produce byte-identical corpora; each
    stream draws from its own derived seed, so adding one stream never
    perturbs another.
    """
    if profiles is None:
        profiles = ProfileSet.default()
    _validate(config, profiles)
    start = datetime(
        config.start_date.year,
        config.start_date.month,
        config.start_date.day,
        tzinfo=timezone.utc,
    )
    span_s = config.days * 86400
    for idx, spec in enumerate(config.tunnels):
        seed = _derive_seed(config.seed, "tunnel", idx, spec.profile, spec.sld)
        yield from _gen_tunnel(spec, profiles.by_name[spec.profile], start, span_s, seed)
    for idx, spec in enumerate(config.background):
        seed = _derive_seed(config.seed, "background", idx, spec.kind, spec.sld)
        yield from _gen_background(spec, start, span_s, seed)


def _corpus_record(entry: PdnsEntry) -> str:
    obj = {
        "domain": entry.domain.dotted if entry.domain else "",
        "time_seen": entry.time_seen.strftime("%Y-%m-%d %H:%M:%S"),
        "bailiwick": entry.bailiwick.dotted if entry.bailiwick else "",
        "rrname": entry.rrname.dotted,
        "rrclass": entry.rrclass,
        "rrtype": str(entry.rrtype),
        "rdata": list(entry.rdata),
    }
    return json.dumps(obj, separators=(",", ":"))


def labels_path_for(corpus_path: str | Path) -> Path:
    """Sidecar path: corpus.ndjson[.gz] -> corpus.labels.csv."""
    path = Path(corpus_path)
    name = path.name
    if name.endswith(".gz"):
        name = name[:-3]
    stem = name.rsplit(".", 1)[0] if "." in name else name
    return path.with_name(stem + ".labels.csv")


def write_corpus(
    entries: Iterable[LabeledEntry],
    corpus_path: str | Path,
    labels_path: Optional[str | Path] = None,
) -> tuple[Path, Path]:
    """Write the NDJSON corpus (gzip if the name ends in .gz) plus the
    labels sidecar CSV keyed by normalized rrname, one row per rrname."""
    corpus_path = Path(corpus_path)
    corpus_path.parent.mkdir(parents=True, exist_ok=True)
    if labels_path is None:
        labels_path = labels_path_for(corpus_path)
    labels_path = Path(labels_path)
    labels: dict[str, tuple[str, str]] = {}
    opener = gzip.open if corpus_path.name.endswith(".gz") else open
    with opener(corpus_path, "wt", encoding="utf-8") as fh:
        for item in entries:
            fh.write(_corpus_record(item.entry))
            fh.write("\n")
            labels.setdefault(item.entry.rrname.name, (item.kind, item.label))
    with open(labels_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("rrname", "kind", "class"))
        for rrname, (kind, label) in labels.items():
            writer.writerow((rrname, kind, label))
    return corpus_path, labels_path


def demo_config(seed: int = 7) -> GenConfig:
    """Small mixed corpus: several tunnel implementations (including both
    provider domains) plus every benign background class."""
    return GenConfig(
        seed=seed,
        start_date=date(2017, 7, 1),
        days=3,
        tunnels=[
            TunnelSpec("iodine-null", "tun-alpha.net", "t", payload_bytes=6000),
            TunnelSpec("iodine-txt", "tun-epsilon.com", "x", payload_bytes=4500),
            TunnelSpec("dns2tcp", "tun-beta.org", "d", payload_bytes=4000),
            TunnelSpec("ozymandns", "tun-gamma.me", "up", payload_bytes=3000),
            TunnelSpec("dnscat2", "tun-delta.io", "c", payload_bytes=5000),
            TunnelSpec("your-freedom", "53r.de", "a", payload_bytes=8000),
            TunnelSpec("tunnelguru", "qv4.in", "g", payload_bytes=4000),
        ],
        background=[
            BackgroundSpec("plain-a", "example-shop.com", 40),
            BackgroundSpec("cdn-like", "cdn-park.net", 60),
            BackgroundSpec("spf-txt", "mailhost.org", 12),
            BackgroundSpec("dkim-txt", "bulk-sender.net", 12),
            BackgroundSpec("rdns-arpa", "isp-pool.net", 30),
            BackgroundSpec("localhost-style", "locallink.com", 80),
        ],
    )


def read_labels(path: str | Path) -> dict[str, tuple[str, str]]:
    """Load a labels sidecar: rrname -> (kind, class)."""
    out: dict[str, tuple[str, str]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is not None and header[:1] != ["rrname"]:
            fh.seek(0)
            reader = csv.reader(fh)
        for row in reader:
            if len(row) >= 3:
                out[row[0]] = (row[1], row[2])
    return out
