"""Structural fingerprinting of hostnames against tunnel-tool profiles.

Eight attributes are extracted from each entry and compared to per-tool
profiles; six or more matches attribute the entry to that tool. Profiles
live in a data file (`data/tunnel_profiles.conf`), not in code.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from pdnskit.model import Fqdn, PdnsEntry, RRType

__all__ = [
    "ENCODING_HEX",
    "ENCODING_BASE32",
    "ENCODING_BASE64",
    "ENCODING_NONE",
    "CHAR_CLASSES",
    "AttributeVector",
    "ImplementationProfile",
    "ProviderRule",
    "ProfileSet",
    "Attribution",
    "SldAttribution",
    "detect_encoding",
    "extract_attributes",
    "match_profile",
    "classify",
    "attribute_sld",
]

ENCODING_HEX = "hex"
ENCODING_BASE32 = "base32"
ENCODING_BASE64 = "base64-like"
ENCODING_NONE = "none"
ENCODINGS = (ENCODING_HEX, ENCODING_BASE32, ENCODING_BASE64, ENCODING_NONE)

CHAR_CLASSES = ("digit", "letter", "other")

ATTRIBUTE_NAMES = (
    "payload_len",
    "level",
    "label4_len",
    "label5_len",
    "rrtype",
    "encoding",
    "first_char",
    "markers",
)

UNKNOWN = "unknown"

_HEX_CHARS = frozenset("0123456789abcdef")
_BASE32_CHARS = frozenset("abcdefghijklmnopqrstuvwxyz234567")
_BASE32_DIGITS = frozenset("234567")
_B64_SPECIALS = frozenset("-_+/")
_B64_CHARSET = frozenset(
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_+/="
)
_ASCII_DIGITS = frozenset("0123456789")
_ASCII_LETTERS = frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz")


def detect_encoding(text: str, min_share: float = 0.95) -> str:
    """Heuristically classify the character encoding of a payload string.

    hex and base32 are judged on the lowercase fold of the alphanumeric
    characters (so detection is case-stable) and each requires at least
    one of its digit characters, which keeps short plain words like "www"
    out. base64-like requires a clean charset, letters and digits, and
    either mixed case or at least two of `-_+/`.
    """
    if not text:
        return ENCODING_NONE
    alnum = [c for c in text if c in _ASCII_DIGITS or c in _ASCII_LETTERS]
    if alnum:
        folded = [c.lower() for c in alnum]
        n = len(folded)
        hex_n = sum(c in _HEX_CHARS for c in folded)
        if hex_n >= min_share * n and any(c in _ASCII_DIGITS for c in folded):
            return ENCODING_HEX
        b32_n = sum(c in _BASE32_CHARS for c in folded)
        if b32_n >= min_share * n and any(c in _BASE32_DIGITS for c in folded):
            return ENCODING_BASE32
        if all(c in _B64_CHARSET for c in text):
            has_digit = any(c in _ASCII_DIGITS for c in alnum)
            has_letter = any(c in _ASCII_LETTERS for c in alnum)
            mixed_case = any(c.islower() for c in alnum) and any(
                c.isupper() for c in alnum
            )
            specials = sum(c in _B64_SPECIALS for c in text)
            if has_digit and has_letter and (mixed_case or specials >= 2):
                return ENCODING_BASE64
    return ENCODING_NONE


def _char_class(c: str) -> str:
    if c in _ASCII_DIGITS:
        return "digit"
    if c in _ASCII_LETTERS:
        return "letter"
    return "other"


@dataclass(frozen=True, slots=True)
class AttributeVector:
    """The eight structural attributes of one entry's hostname."""

    payload_len: int  # bytes (dots included) of all labels at level >= 4
    level: int
    label4_len: Optional[int]  # absent when level < 4
    label5_len: Optional[int]  # absent when level < 5
    rrtype: RRType
    encoding: str
    first_char: str  # class of the leftmost label's first byte
    markers: frozenset[str]  # marker substrings found anywhere in the name


def extract_attributes(
    entry: PdnsEntry, markers: Iterable[str] = ()
) -> AttributeVector:
    """Extract the attribute vector of one entry.

    `markers` is the vocabulary of literal substrings worth noticing,
    normally the union of all profile markers. The payload portion is
    everything left of the third-level label: tunnels keep the SLD and a
    short third-level constant, so that is where encoded data lives.
    """
    labels = entry.rrname.labels
    n = len(labels)
    payload_labels = labels[: n - 3] if n > 3 else ()
    payload = ".".join(payload_labels)
    name = entry.rrname.name
    found = frozenset(m for m in markers if m in name)
    return AttributeVector(
        payload_len=len(payload) if payload.isascii() else len(payload.encode()),
        level=n,
        label4_len=len(labels[n - 4]) if n >= 4 else None,
        label5_len=len(labels[n - 5]) if n >= 5 else None,
        rrtype=entry.rrtype,
        encoding=detect_encoding("".join(payload_labels)),
        first_char=_char_class(labels[0][0]),
        markers=found,
    )


@dataclass(frozen=True, slots=True)
class ProviderRule:
    """SLD pattern tied to a tunnel provider, e.g. three-character .de."""

    label_len: int
    tld: str

    def matches(self, fqdn: Fqdn) -> bool:
        labels = fqdn.labels
        return (
            len(labels) >= 2
            and labels[-1] == self.tld
            and len(labels[-2]) == self.label_len
        )

    def __str__(self) -> str:
        return f"{self.label_len}char.{self.tld}"


def _parse_range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("..")
    lo = int(lo.strip())
    hi = int(hi.strip()) if sep else lo
    if hi < lo:
        raise ValueError(f"empty range: {text!r}")
    return lo, hi


def _parse_set(text: str) -> tuple[str, ...]:
    return tuple(tok.strip() for tok in text.split(",") if tok.strip())


@dataclass(frozen=True)
class ImplementationProfile:
    """Attribute-value ranges characterizing one tunnel implementation.

    `encodings` is ordered: the first entry is the tool's native payload
    encoding (used for traffic generation); any listed encoding counts as
    a match during classification.
    """

    name: str
    payload_len: tuple[int, int]
    levels: tuple[int, int]
    label4_len: tuple[int, int]
    label5_len: tuple[int, int]
    rrtypes: frozenset[RRType]
    encodings: tuple[str, ...]
    first_chars: frozenset[str]
    markers: tuple[str, ...] = ()
    provider: Optional[ProviderRule] = None

    def __post_init__(self):
        for rng in (self.payload_len, self.levels, self.label4_len, self.label5_len):
            if rng[1] < rng[0]:
                raise ValueError(f"profile {self.name}: empty range {rng}")
        for enc in self.encodings:
            if enc not in ENCODINGS:
                raise ValueError(f"profile {self.name}: unknown encoding {enc!r}")
        for cls in self.first_chars:
            if cls not in CHAR_CLASSES:
                raise ValueError(f"profile {self.name}: unknown char class {cls!r}")


def _profile_from_section(name: str, sec) -> ImplementationProfile:
    provider = None
    if sec.get("provider_sld"):
        label_len, _, tld = sec["provider_sld"].partition("char.")
        provider = ProviderRule(label_len=int(label_len), tld=tld.strip().lower())
    return ImplementationProfile(
        name=name,
        payload_len=_parse_range(sec["payload_len"]),
        levels=_parse_range(sec["levels"]),
        label4_len=_parse_range(sec["label4_len"]),
        label5_len=_parse_range(sec["label5_len"]),
        rrtypes=frozenset(RRType.parse(t) for t in _parse_set(sec["rrtypes"])),
        encodings=_parse_set(sec["encodings"]),
        first_chars=frozenset(_parse_set(sec["first_char"])),
        markers=_parse_set(sec.get("markers", "")),
        provider=provider,
    )


class ProfileSet:
    """An ordered collection of profiles sharing one marker vocabulary."""

    def __init__(self, profiles: Sequence[ImplementationProfile]):
        if not profiles:
            raise ValueError("profile set is empty")
        names = [p.name for p in profiles]
        if len(set(names)) != len(names):
            raise ValueError("duplicate profile names")
        self.profiles: tuple[ImplementationProfile, ...] = tuple(profiles)
        self.by_name = {p.name: p for p in self.profiles}
        self.markers: frozenset[str] = frozenset(
            m for p in self.profiles for m in p.markers
        )
        self._order = {p.name: i for i, p in enumerate(self.profiles)}

    def __iter__(self):
        return iter(self.profiles)

    def __len__(self):
        return len(self.profiles)

    def order(self, name: str) -> int:
        return self._order[name]

    @classmethod
    def from_file(cls, path: str | Path) -> "ProfileSet":
        parser = configparser.ConfigParser(interpolation=None)
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
        return cls(
            [_profile_from_section(name, parser[name]) for name in parser.sections()]
        )

    @classmethod
    def default(cls) -> "ProfileSet":
        ref = resources.files("pdnskit.data").joinpath("tunnel_profiles.conf")
        with resources.as_file(ref) as path:
            return cls.from_file(path)


@dataclass(frozen=True)
class Attribution:
    """Outcome of classifying one entry against a profile set."""

    implementation: str  # profile name or "unknown"
    match_count: int
    per_attribute: dict[str, bool] = field(default_factory=dict)
    provider_rule: bool = False
    tied_with: tuple[str, ...] = ()

    @property
    def is_unknown(self) -> bool:
        return self.implementation == UNKNOWN


def _in_range(value: Optional[int], rng: tuple[int, int]) -> bool:
    return value is not None and rng[0] <= value <= rng[1]


def match_profile(
    attrs: AttributeVector, profile: ImplementationProfile
) -> Attribution:
    """Compare one attribute vector to one profile.

    Length attributes match by inclusive range (absent values never
    match); type, encoding, and first-char match by set membership. The
    marker attribute matches when every profile marker occurs; a
    marker-free profile matches only names carrying no known marker at
    all.
    """
    if profile.markers:
        markers_ok = all(m in attrs.markers for m in profile.markers)
    else:
        markers_ok = not attrs.markers
    per = {
        "payload_len": _in_range(attrs.payload_len, profile.payload_len),
        "level": _in_range(attrs.level, profile.levels),
        "label4_len": _in_range(attrs.label4_len, profile.label4_len),
        "label5_len": _in_range(attrs.label5_len, profile.label5_len),
        "rrtype": attrs.rrtype in profile.rrtypes,
        "encoding": attrs.encoding in profile.encodings,
        "first_char": attrs.first_char in profile.first_chars,
        "markers": markers_ok,
    }
    return Attribution(
        implementation=profile.name,
        match_count=sum(per.values()),
        per_attribute=per,
    )


def classify(
    entry: PdnsEntry, profiles: ProfileSet, min_matches: int = 6
) -> Attribution:
    """Attribute one entry to the best-matching implementation.

    Provider SLD rules win outright (a three-character provider domain is
    a tunnel domain no matter what the name looks like). Otherwise the
    highest match count at or above `min_matches` wins; ties keep file
    order and report the tied names. Below the threshold the entry stays
    unknown.
    """
    attrs = extract_attributes(entry, markers=profiles.markers)
    for profile in profiles:
        if profile.provider is not None and profile.provider.matches(entry.rrname):
            scored = match_profile(attrs, profile)
            return Attribution(
                implementation=profile.name,
                match_count=scored.match_count,
                per_attribute=scored.per_attribute,
                provider_rule=True,
            )
    best: Optional[Attribution] = None
    tied: list[str] = []
    for profile in profiles:
        scored = match_profile(attrs, profile)
        if scored.match_count < min_matches:
            continue
        if best is None or scored.match_count > best.match_count:
            best = scored
            tied = []
        elif scored.match_count == best.match_count:
            tied.append(profile.name)
    if best is None:
        return Attribution(implementation=UNKNOWN, match_count=0, per_attribute={})
    if tied:
        return Attribution(
            implementation=best.implementation,
            match_count=best.match_count,
            per_attribute=best.per_attribute,
            tied_with=tuple(tied),
        )
    return best


@dataclass(frozen=True)
class SldAttribution:
    """Majority-vote attribution for all entries of one SLD."""

    implementation: str
    agreement: float  # fraction of all entries voting for the winner
    unknown_fraction: float
    entry_count: int
    tied_with: tuple[str, ...] = ()


def resolve_votes(
    votes: dict[str, int], unknown: int, total: int, profiles: ProfileSet
) -> SldAttribution:
    """Turn per-implementation vote counts into an SLD attribution.

    Unknowns do not vote; ties break by vote count then profile file
    order, with all tied names reported.
    """
    if total < 1:
        raise ValueError("vote resolution needs at least one entry")
    if not votes:
        return SldAttribution(UNKNOWN, 0.0, unknown / total, total)
    ordered = sorted(votes.items(), key=lambda kv: (-kv[1], profiles.order(kv[0])))
    winner, count = ordered[0]
    tied = tuple(name for name, c in ordered[1:] if c == count)
    return SldAttribution(
        implementation=winner,
        agreement=count / total,
        unknown_fraction=unknown / total,
        entry_count=total,
        tied_with=tied,
    )


def attribute_sld(
    entries: Sequence[PdnsEntry], profiles: ProfileSet, min_matches: int = 6
) -> SldAttribution:
    """Vote per-entry attributions for one SLD's entries.

    Unknown entries do not vote but are reported as a fraction; an
    all-unknown SLD comes back as (unknown, 0.0).
    """
    if not entries:
        raise ValueError("attribute_sld needs at least one entry")
    votes: dict[str, int] = {}
    unknown = 0
    for entry in entries:
        result = classify(entry, profiles, min_matches=min_matches)
        if result.is_unknown:
            unknown += 1
        else:
            votes[result.implementation] = votes.get(result.implementation, 0) + 1
    return resolve_votes(votes, unknown, len(entries), profiles)
