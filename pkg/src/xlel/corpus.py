"""Mention harvesting from parsed pages, postprocessing filters, and stats.

Filters run once, in order: temporal filter, context-length filter, then
event-level filters (single-language, title-match ratio, minimum mentions).
"""

import re
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass

BUCKETS = ("high_overlap", "multiple_categories", "ambiguous_substring", "low_overlap")

_YEAR_RE = re.compile(r"\b(1[0-9]{3}|20[0-9]{2}|2100)\b")


@dataclass
class Mention:
    id: str  # language:page:offset
    language: str
    source_title: str
    surface: str
    left_context: str
    right_context: str
    gold_qid: str
    bucket: str
    meta_title: str | None = None
    meta_date: str | None = None

    @property
    def context_length(self) -> int:
        return len(self.left_context) + len(self.surface) + len(self.right_context)

    def full_context(self) -> str:
        return self.left_context + self.surface + self.right_context

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "language": self.language,
            "source_title": self.source_title,
            "surface": self.surface,
            "left_context": self.left_context,
            "right_context": self.right_context,
            "gold_qid": self.gold_qid,
            "bucket": self.bucket,
        }
        if self.meta_title is not None:
            rec["meta_title"] = self.meta_title
        if self.meta_date is not None:
            rec["meta_date"] = self.meta_date
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "Mention":
        return cls(
            id=rec["id"],
            language=rec["language"],
            source_title=rec["source_title"],
            surface=rec["surface"],
            left_context=rec["left_context"],
            right_context=rec["right_context"],
            gold_qid=rec["gold_qid"],
            bucket=rec["bucket"],
            meta_title=rec.get("meta_title"),
            meta_date=rec.get("meta_date"),
        )


def normalize_for_match(text: str) -> str:
    text = unicodedata.normalize("NFKC", text).casefold()
    return re.sub(r"\s+", " ", text).strip()


def categorize(surface: str, title: str) -> str:
    """Title-overlap bucket; first matching rule wins."""
    s = normalize_for_match(surface)
    t = normalize_for_match(title)
    if s == t:
        return "high_overlap"
    if s and t.startswith(s + " "):
        # title is the surface plus a disambiguation phrase or extra tokens
        return "multiple_categories"
    if s and s in t:
        return "ambiguous_substring"
    return "low_overlap"


def _paragraph_bounds(body: str, start: int, end: int) -> tuple:
    pstart = body.rfind("\n\n", 0, start)
    pstart = 0 if pstart < 0 else pstart + 2
    pend = body.find("\n\n", end)
    pend = len(body) if pend < 0 else pend
    return pstart, pend


def _make_mention(page, span, qid, title):
    pstart, pend = _paragraph_bounds(page.body, span.start, span.end)
    return Mention(
        id=f"{page.language}:{page.title}:{span.start}",
        language=page.language,
        source_title=page.title,
        surface=span.surface,
        left_context=page.body[pstart : span.start],
        right_context=page.body[span.end : pend],
        gold_qid=qid,
        bucket=categorize(span.surface, title),
    )


def harvest_mentions(pages, title_to_qid, redirects=None, counters: Counter | None = None):
    """Yield a Mention per hyperlink resolving to a same-language event page.

    title_to_qid maps (language, title) -> qid. Links on the event's own
    page are excluded.
    """
    counters = counters if counters is not None else Counter()
    redirects = redirects or {}
    for page in pages:
        own_qid = title_to_qid.get((page.language, page.title))
        for span in page.links:
            target = redirects.get(span.target_title, span.target_title)
            qid = title_to_qid.get((page.language, target))
            if qid is None:
                counters["corpus.links_unresolved"] += 1
                continue
            if own_qid == qid:
                counters["corpus.self_links_excluded"] += 1
                continue
            counters["corpus.mentions_harvested"] += 1
            yield _make_mention(page, span, qid, target)


def harvest_wikinews(pages, title_to_qid, event_qids: set, redirects=None,
                     counters: Counter | None = None):
    """Harvest Wikinews mentions via Wikipedia-page or category links.

    Restricted to the already-compiled event set; mentions carry the
    article title and publication date as meta fields.
    """
    counters = counters if counters is not None else Counter()
    redirects = redirects or {}
    for page in pages:
        for span in page.links:
            target = redirects.get(span.target_title, span.target_title)
            qid = title_to_qid.get((page.language, target))
            if qid is None or qid not in event_qids:
                counters["corpus.wikinews_links_unresolved"] += 1
                continue
            counters["corpus.wikinews_mentions_harvested"] += 1
            mention = _make_mention(page, span, qid, target)
            mention.meta_title = page.title
            mention.meta_date = page.published
            yield mention


def temporal_tokens(text: str, extra_patterns=None) -> set:
    """Temporal expressions: 4-digit years in 1000..2100 plus config regexes."""
    tokens = set(_YEAR_RE.findall(text))
    for rx in extra_patterns or []:
        tokens.update(m.group(0) for m in rx.finditer(text))
    return tokens


def filter_temporal(mention: Mention, title: str, description: str,
                    extra_patterns=None) -> bool:
    """Keep unless the context misses every temporal token of the gold
    event's title+description. Vacuously keeps when no tokens exist."""
    tokens = temporal_tokens(f"{title} {description}", extra_patterns)
    if not tokens:
        return True
    context = mention.full_context()
    return any(tok in context for tok in tokens)


def filter_context_length(mention: Mention, context_min=100, context_max=2000) -> bool:
    return context_min <= mention.context_length <= context_max


def filter_events(mentions, titles, min_mentions=30, title_match_max=0.5,
                  counters: Counter | None = None):
    """Apply the event-level filters once; returns (surviving qids, mentions).

    titles maps (qid, language) -> event page title in that language.
    An event is dropped when its mentions come from a single language, when
    more than title_match_max of them equal their language's title, or when
    it has fewer than min_mentions mentions.
    """
    counters = counters if counters is not None else Counter()
    by_qid = defaultdict(list)
    for m in mentions:
        by_qid[m.gold_qid].append(m)
    surviving = set()
    kept = []
    for qid, group in by_qid.items():
        langs = {m.language for m in group}
        if len(langs) < 2:
            counters["corpus.events_dropped_single_language"] += 1
            continue
        matches = sum(
            1 for m in group
            if normalize_for_match(m.surface)
            == normalize_for_match(titles.get((qid, m.language), ""))
        )
        if matches / len(group) > title_match_max:
            counters["corpus.events_dropped_title_match"] += 1
            continue
        if len(group) < min_mentions:
            counters["corpus.events_dropped_few_mentions"] += 1
            continue
        surviving.add(qid)
        kept.extend(group)
    kept.sort(key=lambda m: m.id)
    counters["corpus.events_kept"] += len(surviving)
    return surviving, kept


@dataclass
class CorpusStats:
    per_language: dict  # lang -> {"events": n, "mentions": n}
    bucket_percentages: dict  # bucket -> percentage of mentions
    events_per_language_avg: float  # mean number of languages per event
    n_events: int
    n_mentions: int

    def to_record(self) -> dict:
        return {
            "per_language": self.per_language,
            "bucket_percentages": self.bucket_percentages,
            "events_per_language_avg": self.events_per_language_avg,
            "n_events": self.n_events,
            "n_mentions": self.n_mentions,
        }


def compute_stats(mentions, event_qids=None) -> CorpusStats:
    mentions = list(mentions)
    lang_mentions = Counter(m.language for m in mentions)
    lang_events = defaultdict(set)
    event_langs = defaultdict(set)
    buckets = Counter(m.bucket for m in mentions)
    for m in mentions:
        lang_events[m.language].add(m.gold_qid)
        event_langs[m.gold_qid].add(m.language)
    qids = set(event_qids) if event_qids is not None else set(event_langs)
    n = len(mentions)
    per_language = {
        lang: {"events": len(lang_events[lang]), "mentions": lang_mentions[lang]}
        for lang in sorted(lang_mentions)
    }
    bucket_pct = {b: (100.0 * buckets[b] / n if n else 0.0) for b in BUCKETS}
    avg_langs = (
        sum(len(event_langs[q]) for q in qids) / len(qids) if qids else 0.0
    )
    return CorpusStats(per_language, bucket_pct, avg_langs, len(qids), n)
