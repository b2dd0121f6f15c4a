"""Property-based checks of the structural invariants."""

import string
from datetime import date

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from pdnskit.fingerprint import ProfileSet, classify, detect_encoding
from pdnskit.model import FqdnError, RRType, parse_fqdn
from pdnskit.pipeline import (
    FilterConfig,
    KnownLists,
    filter_known_domains,
    filter_min_level,
    filter_special_use,
    prefilter_rrtype,
    run_pipeline,
)
from pdnskit.stats import StatsBundle

from conftest import make_entry

LABEL_CHARS = string.ascii_lowercase + string.digits + "-_"

labels_st = st.lists(
    st.text(alphabet=LABEL_CHARS, min_size=1, max_size=12), min_size=1, max_size=6
)

rrtype_st = st.sampled_from(["A", "AAAA", "NULL", "TXT", "CNAME", "NS", "MX", "PTR"])


@st.composite
def hostname(draw):
    return ".".join(draw(labels_st))


@st.composite
def entry_st(draw):
    name = draw(hostname())
    day = draw(st.integers(min_value=1, max_value=9))
    rdata = tuple(draw(st.lists(st.text(alphabet=LABEL_CHARS, max_size=40), max_size=2)))
    return make_entry(
        name,
        rrtype=draw(rrtype_st),
        time_seen=f"2017-07-0{day} 12:00:00",
        rdata=rdata,
    )


class TestFqdnProperties:
    @given(hostname())
    @settings(max_examples=300)
    def test_roundtrip(self, name):
        f = parse_fqdn(name)
        assert ".".join(f.labels) == f.name
        assert parse_fqdn(f.dotted).labels == f.labels

    @given(hostname())
    @settings(max_examples=300)
    def test_level_equals_dots_plus_one(self, name):
        f = parse_fqdn(name)
        assert f.level == f.name.count(".") + 1

    @given(st.text(max_size=300))
    @settings(max_examples=500)
    def test_rejection_is_total(self, raw):
        assume(raw)
        try:
            f = parse_fqdn(raw)
        except FqdnError:
            return
        assert 1 <= len(f.labels)
        assert all(1 <= len(lab.encode()) <= 63 for lab in f.labels)
        assert len(f.name.encode()) <= 253

    @given(st.text(alphabet=LABEL_CHARS + ".ABC", min_size=1, max_size=80))
    @settings(max_examples=300)
    def test_exactly_one_outcome(self, raw):
        outcomes = 0
        try:
            parse_fqdn(raw)
            outcomes += 1
        except FqdnError as exc:
            assert exc.kind in ("EmptyLabel", "LabelTooLong", "NameTooLong")
            outcomes += 1
        assert outcomes == 1


class TestDetectEncodingProperties:
    @given(st.text(max_size=120))
    @settings(max_examples=300)
    def test_total(self, text):
        assert detect_encoding(text) in ("hex", "base32", "base64-like", "none")

    @given(st.text(alphabet=string.hexdigits, min_size=1, max_size=80))
    @settings(max_examples=200)
    def test_case_fold_stable(self, text):
        assert detect_encoding(text.lower()) == detect_encoding(text.upper())


class TestStatsProperties:
    @given(st.lists(entry_st(), max_size=40), st.integers(min_value=0, max_value=40))
    @settings(max_examples=200, deadline=None)
    def test_merge_matches_single_pass(self, entries, split):
        split = min(split, len(entries))
        single = StatsBundle().accumulate_all(entries)
        left = StatsBundle().accumulate_all(entries[:split])
        right = StatsBundle().accumulate_all(entries[split:])
        merged = left.merge(right)
        assert merged.rrtype_counts == single.rrtype_counts
        assert merged.sld_entries == single.sld_entries
        assert merged.per_day_rrtype == single.per_day_rrtype
        assert {s: len(v) for s, v in merged.sld_fqdns.items()} == {
            s: len(v) for s, v in single.sld_fqdns.items()
        }

    @given(st.lists(entry_st(), max_size=30))
    @settings(max_examples=150, deadline=None)
    def test_merge_commutes_and_identity(self, entries):
        a = StatsBundle().accumulate_all(entries[: len(entries) // 2])
        b = StatsBundle().accumulate_all(entries[len(entries) // 2:])
        ab, ba = a.merge(b), b.merge(a)
        assert ab.rrtype_counts == ba.rrtype_counts
        assert ab.sld_day_entries == ba.sld_day_entries
        with_empty = a.merge(StatsBundle())
        assert with_empty.rrtype_counts == a.rrtype_counts

    @given(st.lists(entry_st(), min_size=1, max_size=50))
    @settings(max_examples=200, deadline=None)
    def test_cdf_monotone_complete(self, entries):
        bundle = StatsBundle().accumulate_all(entries)
        cdf = bundle.sld_cdf()
        shares = [s for _, s in cdf.points]
        assert all(b >= a for a, b in zip(shares, shares[1:]))
        assert shares[-1] == pytest.approx(1.0, abs=1e-9)
        assert len(cdf.points) == len(bundle.sld_fqdns)

    @given(st.lists(entry_st(), min_size=1, max_size=50))
    @settings(max_examples=150, deadline=None)
    def test_shares_sum_to_one_and_buckets_sum_per_day(self, entries):
        bundle = StatsBundle().accumulate_all(entries)
        assert sum(s for _, _, s in bundle.rrtype_shares()) == pytest.approx(1.0, abs=1e-9)
        day_bucket_totals = {}
        for (day, _), c in bundle.rdata_buckets_per_day.items():
            day_bucket_totals[day] = day_bucket_totals.get(day, 0) + c
        day_totals = {}
        for (day, rrtype), c in bundle.per_day_rrtype.items():
            day_totals[day] = day_totals.get(day, 0) + c
        assert day_bucket_totals == day_totals


def apply_stage(name, entries, config):
    if name == "types":
        return list(prefilter_rrtype(entries, config.prefilter_types))
    if name == "known":
        return list(filter_known_domains(entries, config.known))
    if name == "level":
        return list(filter_min_level(entries, config.min_level))
    return list(filter_special_use(entries, config.special_use_rules))


STAGE_ORDERS = [
    ("types", "known", "level", "special"),
    ("special", "level", "known", "types"),
    ("known", "special", "types", "level"),
    ("level", "types", "special", "known"),
]


class TestPipelineProperties:
    @given(st.lists(entry_st(), max_size=40), st.integers(min_value=0, max_value=3))
    @settings(max_examples=200, deadline=None)
    def test_per_entry_stages_commute(self, entries, order_idx):
        config = FilterConfig(
            known=KnownLists(known_tunnels=frozenset({"ab.com", "cd-x.net"}))
        )
        baseline = entries
        for stage in STAGE_ORDERS[0]:
            baseline = apply_stage(stage, baseline, config)
        shuffled = entries
        for stage in STAGE_ORDERS[order_idx]:
            shuffled = apply_stage(stage, shuffled, config)
        assert {id(e) for e in baseline} == {id(e) for e in shuffled}

    @given(st.lists(entry_st(), max_size=40))
    @settings(max_examples=150, deadline=None)
    def test_stage_monotonicity(self, entries):
        config = FilterConfig()
        current = entries
        for stage in STAGE_ORDERS[0]:
            out = apply_stage(stage, current, config)
            assert {id(e) for e in out} <= {id(e) for e in current}
            current = out

    @given(st.lists(entry_st(), max_size=40))
    @settings(max_examples=100, deadline=None)
    def test_pipeline_idempotent(self, entries):
        config = FilterConfig()
        first = run_pipeline(entries, config, keep_entries=True)
        second = run_pipeline(first.survivor_entries, config)
        assert second.candidate_slds() == first.candidate_slds()

    @given(st.lists(entry_st(), max_size=40))
    @settings(max_examples=100, deadline=None)
    def test_accounting_chains(self, entries):
        report = run_pipeline(entries, FilterConfig())
        stages = report.stage_counts
        assert stages[0].entries_in == len(entries)
        for prev, cur in zip(stages, stages[1:]):
            assert cur.entries_in == prev.entries_out
            assert cur.entries_out <= cur.entries_in


class TestClassifyProperties:
    @given(entry_st())
    @settings(max_examples=200, deadline=None)
    def test_classify_is_deterministic_and_consistent(self, entry):
        profiles = ProfileSet.default()
        first = classify(entry, profiles)
        second = classify(entry, profiles)
        assert first == second
        if first.per_attribute:
            assert first.match_count == sum(first.per_attribute.values())
        if not first.is_unknown and not first.provider_rule:
            assert first.match_count >= 6
