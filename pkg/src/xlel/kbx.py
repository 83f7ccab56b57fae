"""Event identification over a Wikidata JSON dump.

An item qualifies as a candidate event when it carries temporal evidence
(duration OR point-in-time OR (start-time AND end-time)) and spatial
evidence (location OR coordinate-location), matches no exclusion rule,
and has at least one sitelink in the configured language allowlist.
"""

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .ioutils import ConfigError, open_maybe_compressed, read_tsv

DURATION = "P2047"
POINT_IN_TIME = "P585"
START_TIME = "P580"
END_TIME = "P582"
LOCATION = "P276"
COORDINATE_LOCATION = "P625"
PART_OF = "P361"
FOLLOWS = "P155"
FOLLOWED_BY = "P156"

TEMPORAL_PROPS = {DURATION, POINT_IN_TIME, START_TIME, END_TIME}
SPATIAL_PROPS = {LOCATION, COORDINATE_LOCATION}

_QID_RE = re.compile(r"^Q[0-9]+$")
_PID_RE = re.compile(r"^P[0-9]+$")


@dataclass(frozen=True)
class ExclusionRule:
    property: str
    value: str  # a specific QID, or "*" to match any claim with the property


@dataclass
class WikidataEvent:
    qid: str
    temporal_evidence: set
    spatial_evidence: set
    sitelinks: dict  # language code -> Wikipedia page title
    sequence_id: str | None = None

    def to_record(self) -> dict:
        return {
            "qid": self.qid,
            "temporal_evidence": sorted(self.temporal_evidence),
            "spatial_evidence": sorted(self.spatial_evidence),
            "sitelinks": self.sitelinks,
            "sequence_id": self.sequence_id,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "WikidataEvent":
        return cls(
            qid=rec["qid"],
            temporal_evidence=set(rec["temporal_evidence"]),
            spatial_evidence=set(rec["spatial_evidence"]),
            sitelinks=dict(rec["sitelinks"]),
            sequence_id=rec.get("sequence_id"),
        )


@dataclass
class EventDescription:
    qid: str
    language: str
    title: str
    description: str

    def to_record(self) -> dict:
        return {
            "qid": self.qid,
            "language": self.language,
            "title": self.title,
            "description": self.description,
        }


def qid_sort_key(qid: str):
    # numeric ordering so Q9 < Q10
    return (0, int(qid[1:])) if _QID_RE.match(qid) else (1, qid)


def default_rules_path() -> Path:
    return Path(resources.files("xlel").joinpath("data/exclusion_rules.tsv"))


def default_languages_path() -> Path:
    return Path(resources.files("xlel").joinpath("data/languages.txt"))


def load_exclusion_rules(path=None) -> list[ExclusionRule]:
    path = path or default_rules_path()
    rules = []
    for row in read_tsv(path):
        if len(row) != 2:
            raise ConfigError(f"malformed exclusion rule row: {row!r}")
        prop, value = row
        if not _PID_RE.match(prop):
            raise ConfigError(f"unparseable property ID in rules file: {prop!r}")
        if value != "*" and not _QID_RE.match(value):
            raise ConfigError(f"unparseable rule value: {value!r}")
        rules.append(ExclusionRule(prop, value))
    return rules


def load_languages(path=None) -> list[str]:
    path = path or default_languages_path()
    langs = [line.strip() for line in open(path, encoding="utf-8") if line.strip()]
    if not langs:
        raise ConfigError(f"empty language allowlist: {path}")
    return langs


def read_wikidata_dump(path, counters: Counter | None = None):
    """Yield parsed item records from a newline-delimited JSON dump.

    Tolerates the array-style official dump layout (leading '[' / trailing
    ']' lines and trailing commas). Malformed lines are counted, not fatal.
    """
    counters = counters if counters is not None else Counter()
    with open_maybe_compressed(path) as f:
        for line in f:
            line = line.strip().rstrip(",")
            if not line or line in "[]":
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError:
                counters["kbx.malformed_lines"] += 1


def _claim_object_qid(claim) -> str | None:
    try:
        value = claim["mainsnak"]["datavalue"]["value"]
        if isinstance(value, dict):
            return value.get("id")
    except (KeyError, TypeError):
        pass
    return None


def _claim_props(item) -> dict:
    claims = item.get("claims")
    if not isinstance(claims, dict):
        raise ValueError("missing claims")
    return claims


def _matches_exclusion(claims: dict, rules: list[ExclusionRule]) -> bool:
    for rule in rules:
        claim_list = claims.get(rule.property)
        if not claim_list:
            continue
        if rule.value == "*":
            return True
        for claim in claim_list:
            if _claim_object_qid(claim) == rule.value:
                return True
    return False


def _sitelinks_in(item, langs) -> dict:
    out = {}
    sitelinks = item.get("sitelinks") or {}
    for lang in langs:
        entry = sitelinks.get(f"{lang}wiki")
        if isinstance(entry, dict) and entry.get("title"):
            out[lang] = entry["title"]
        elif isinstance(entry, str) and entry:
            out[lang] = entry
    return out


def temporal_evidence(claims: dict) -> set:
    return {p for p in TEMPORAL_PROPS if claims.get(p)}


def spatial_evidence(claims: dict) -> set:
    return {p for p in SPATIAL_PROPS if claims.get(p)}


def satisfies_temporal(evidence: set) -> bool:
    return (
        DURATION in evidence
        or POINT_IN_TIME in evidence
        or (START_TIME in evidence and END_TIME in evidence)
    )


def identify_candidate_events(dump_stream, rules, langs, counters: Counter | None = None):
    """Yield WikidataEvent for every qualifying item, in input order."""
    counters = counters if counters is not None else Counter()
    langs = list(langs)
    for item in dump_stream:
        counters["kbx.items_scanned"] += 1
        try:
            qid = item["id"]
            if not _QID_RE.match(qid):
                raise ValueError("not an item id")
            claims = _claim_props(item)
        except (KeyError, TypeError, ValueError):
            counters["kbx.malformed_items"] += 1
            continue
        t_ev = temporal_evidence(claims)
        if not satisfies_temporal(t_ev):
            counters["kbx.dropped_no_temporal"] += 1
            continue
        s_ev = spatial_evidence(claims)
        if not s_ev:
            counters["kbx.dropped_no_spatial"] += 1
            continue
        if _matches_exclusion(claims, rules):
            counters["kbx.dropped_excluded"] += 1
            continue
        sitelinks = _sitelinks_in(item, langs)
        if not sitelinks:
            counters["kbx.dropped_no_sitelink"] += 1
            continue
        counters["kbx.events_kept"] += 1
        yield WikidataEvent(qid, t_ev, s_ev, sitelinks)


def extract_part_of_edges(dump_stream, candidate_qids: set) -> set:
    """Collect (child, parent) pairs from P361 claims between candidates."""
    edges = set()
    for item in dump_stream:
        qid = item.get("id")
        if qid not in candidate_qids:
            continue
        claims = item.get("claims") or {}
        for claim in claims.get(PART_OF, []):
            parent = _claim_object_qid(claim)
            if parent in candidate_qids and parent != qid:
                edges.add((qid, parent))
    return edges


def filter_leaf_events(events, part_of_edges) -> list:
    """Drop every event that is a part-of parent of another candidate."""
    parents = {parent for _, parent in part_of_edges}
    return [e for e in events if e.qid not in parents]


def canonical_edge(a: str, b: str) -> tuple:
    return (a, b) if qid_sort_key(a) <= qid_sort_key(b) else (b, a)


def extract_sequence_edges(dump_stream, candidate_qids: set, counters: Counter | None = None) -> set:
    """Undirected follows/followed-by edges between candidate events."""
    counters = counters if counters is not None else Counter()
    edges = set()
    for item in dump_stream:
        qid = item.get("id")
        if qid not in candidate_qids:
            continue
        claims = item.get("claims") or {}
        for prop in (FOLLOWS, FOLLOWED_BY):
            for claim in claims.get(prop, []):
                other = _claim_object_qid(claim)
                if other is None or other not in candidate_qids:
                    continue
                if other == qid:
                    counters["kbx.sequence_self_loops"] += 1
                    continue
                edges.add(canonical_edge(qid, other))
    return edges


def first_paragraph(body: str) -> str:
    """First non-empty blank-line-separated chunk of a page body."""
    for chunk in re.split(r"\n\s*\n", body):
        chunk = chunk.strip()
        if chunk:
            return chunk
    return ""


def compile_descriptions(events, wikipage_texts, counters: Counter | None = None):
    """Yield one EventDescription per (event, language) sitelink with text.

    wikipage_texts maps (language, title) -> page body. Sitelinks without a
    page or with an empty first paragraph are dropped and counted.
    """
    counters = counters if counters is not None else Counter()
    for event in events:
        for lang in sorted(event.sitelinks):
            title = event.sitelinks[lang]
            body = wikipage_texts.get((lang, title))
            if body is None:
                counters["kbx.descriptions_missing_page"] += 1
                continue
            para = first_paragraph(body)
            if not para:
                counters["kbx.descriptions_empty"] += 1
                continue
            counters["kbx.descriptions_kept"] += 1
            yield EventDescription(event.qid, lang, title, para)
