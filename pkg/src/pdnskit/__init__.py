"""Streaming passive-DNS measurement and DNS-tunnel candidate filtering."""

from pdnskit.model import (
    Fqdn,
    PdnsEntry,
    PublicSuffixList,
    RRType,
    label_length,
    level,
    parse_fqdn,
    second_level_domain,
)

__version__ = "0.1.0"

__all__ = [
    "Fqdn",
    "PdnsEntry",
    "PublicSuffixList",
    "RRType",
    "label_length",
    "level",
    "parse_fqdn",
    "second_level_domain",
    "__version__",
]
