"""Streaming MediaWiki XML dump parsing and plain-text extraction.

Markup is stripped natively (rather than via an external extractor) so
hyperlink offsets into the emitted plain text are exact: for every span,
body[start:end] == surface.
"""

import re
import unicodedata
import urllib.parse
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field

from .ioutils import open_maybe_compressed


class DumpTruncatedError(Exception):
    """The XML stream ended mid-document; complete pages were emitted."""


@dataclass(frozen=True)
class HyperlinkSpan:
    start: int
    end: int
    surface: str
    target_title: str
    category: bool = False  # Wikinews category link


@dataclass
class PageText:
    language: str
    title: str
    kind: str  # "wikipedia" | "wikinews"
    body: str
    links: list
    published: str | None = None
    namespace: int = 0

    def to_record(self) -> dict:
        return {
            "language": self.language,
            "title": self.title,
            "kind": self.kind,
            "body": self.body,
            "links": [
                [s.start, s.end, s.surface, s.target_title, int(s.category)]
                for s in self.links
            ],
            "published": self.published,
            "namespace": self.namespace,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "PageText":
        return cls(
            language=rec["language"],
            title=rec["title"],
            kind=rec["kind"],
            body=rec["body"],
            links=[HyperlinkSpan(a, b, s, t, bool(c)) for a, b, s, t, c in rec["links"]],
            published=rec.get("published"),
            namespace=rec.get("namespace", 0),
        )


def normalize_title(raw: str) -> str:
    """MediaWiki title canonicalization: strip fragment, URL-decode,
    underscores to spaces, collapse whitespace, uppercase first char."""
    title = raw.split("#", 1)[0]
    if "%" in title:
        title = urllib.parse.unquote(title)
    title = title.replace("_", " ")
    title = re.sub(r"\s+", " ", title).strip()
    if title:
        title = title[0].upper() + title[1:]
    return title


# ---------------------------------------------------------------------------
# markup stripping
# ---------------------------------------------------------------------------

_COMMENT_RE = re.compile(r"<!--.*?-->", re.S)
_REF_RE = re.compile(r"<ref[^>/]*/>|<ref[^>]*>.*?</ref>", re.S | re.I)
_TAG_RE = re.compile(r"</?[a-zA-Z][^>]*>")
_MAGIC_RE = re.compile(r"__[A-Z]+__")
_QUOTES_RE = re.compile(r"'{2,}")
_EXTLINK_RE = re.compile(r"\[(?:https?|ftp)://[^\s\]]*\s*([^\]]*)\]")
_HEADER_RE = re.compile(r"^(={1,6})\s*(.*?)\s*\1\s*$")
_LIST_RE = re.compile(r"^[*#:;]+\s*")

_MEDIA_PREFIXES = ("file:", "image:", "media:")
_LANG_PREFIX_RE = re.compile(r"^[a-z]{2,3}(-[a-z]+)?$")


def _strip_braced(text: str, open_s: str, close_s: str) -> str:
    """Remove nested {{...}} or {|...|} constructs."""
    out = []
    depth = 0
    i = 0
    n = len(text)
    while i < n:
        if text.startswith(open_s, i):
            depth += 1
            i += len(open_s)
        elif depth and text.startswith(close_s, i):
            depth -= 1
            i += len(close_s)
        elif depth:
            i += 1
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


def _strip_bracketed_media(text: str) -> str:
    """Remove [[File:...]] style links, including nested caption links."""
    out = []
    i = 0
    n = len(text)
    while i < n:
        if text.startswith("[[", i):
            head = text[i + 2 : i + 12].lstrip(":").lower()
            if any(head.startswith(p) for p in _MEDIA_PREFIXES):
                depth = 1
                j = i + 2
                while j < n and depth:
                    if text.startswith("[[", j):
                        depth += 1
                        j += 2
                    elif text.startswith("]]", j):
                        depth -= 1
                        j += 2
                    else:
                        j += 1
                i = j
                continue
        out.append(text[i])
        i += 1
    return "".join(out)


def _preclean(wikitext: str) -> str:
    """Everything except wikilink handling; no edits after this may reflow
    text, because link offsets are assigned during the wikilink pass."""
    text = wikitext.replace("\r\n", "\n").replace("\r", "\n")
    text = _COMMENT_RE.sub("", text)
    text = _REF_RE.sub("", text)
    text = _strip_braced(text, "{{", "}}")
    text = _strip_braced(text, "{|", "|}")
    text = _strip_bracketed_media(text)
    text = _TAG_RE.sub("", text)
    text = _MAGIC_RE.sub("", text)
    text = _EXTLINK_RE.sub(lambda m: m.group(1), text)
    text = _QUOTES_RE.sub("", text)

    lines = []
    for line in text.split("\n"):
        m = _HEADER_RE.match(line.strip())
        if m:
            # headers become their own paragraph so they never join a
            # mention's context paragraph
            lines.extend(["", m.group(2), ""])
            continue
        lines.append(_LIST_RE.sub("", line).rstrip())
    text = "\n".join(lines)
    text = re.sub(r"\n{3,}", "\n\n", text).strip("\n")
    return text


_TRAIL_RE = re.compile(r"[a-zA-Z]+")


def _classify_target(raw_target: str, kind: str):
    """Return (normalized_title, is_category, keep_link, keep_text)."""
    target = raw_target.strip()
    bare = not target.lstrip().startswith(":")
    target = target.lstrip(":").strip()
    low = target.lower()
    if any(low.startswith(p) for p in _MEDIA_PREFIXES):
        return None, False, False, False
    if low.startswith("category:"):
        title = normalize_title(target.split(":", 1)[1])
        if kind == "wikinews":
            # bare category links are page categorization, not prose
            return title, True, not bare, not bare
        return None, False, False, False
    if low.startswith(("w:", "wikipedia:")):
        rest = target.split(":", 1)[1]
        # optional language prefix after the project prefix, e.g. w:en:Foo
        head, _, tail = rest.partition(":")
        if tail and _LANG_PREFIX_RE.match(head.strip().lower()):
            rest = tail
        if kind == "wikinews":
            return normalize_title(rest), False, True, True
        return None, False, False, True
    if ":" in target:
        head = target.split(":", 1)[0].strip().lower()
        if _LANG_PREFIX_RE.match(head):
            # interwiki language link: keep surface text, drop the link
            return None, False, False, True
        if head in ("wikt", "wiktionary", "commons", "special", "talk", "user",
                    "template", "help", "portal", "wikisource", "wikiquote", "n"):
            return None, False, False, head not in ("special",)
    return normalize_title(target), False, True, True


def extract_text(wikitext: str, kind: str = "wikipedia"):
    """Strip markup and return (body, links) with exact span offsets."""
    text = _preclean(wikitext)
    out = []
    pos = 0  # length of emitted body so far
    links = []
    i = 0
    n = len(text)
    while i < n:
        start_br = text.find("[[", i)
        if start_br < 0:
            out.append(text[i:])
            break
        out.append(text[i:start_br])
        pos += start_br - i
        end_br = text.find("]]", start_br + 2)
        if end_br < 0:
            out.append(text[start_br:])
            break
        inner = text[start_br + 2 : end_br]
        if "[[" in inner:
            # malformed / unexpected nesting: emit raw text, no span
            out.append(inner)
            pos += len(inner)
            i = end_br + 2
            continue
        raw_target, sep, surface = inner.partition("|")
        if not sep:
            surface = raw_target.lstrip(":")
            if ":" in surface:
                surface = surface.split(":")[-1]
        i = end_br + 2
        m = _TRAIL_RE.match(text, i)  # blended suffix: [[link]]s
        if m:
            surface += m.group(0)
            i = m.end()
        title, is_cat, keep_link, keep_text = _classify_target(raw_target, kind)
        surface = surface.strip()
        if keep_link and title and surface:
            out.append(surface)
            links.append(HyperlinkSpan(pos, pos + len(surface), surface, title, is_cat))
            pos += len(surface)
        elif keep_text and surface:
            out.append(surface)
            pos += len(surface)
    body = "".join(out)
    return body, links


# ---------------------------------------------------------------------------
# XML streaming
# ---------------------------------------------------------------------------


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _iter_pages(path):
    """Yield (title, ns, redirect_target, text) per <page> element."""
    with open_maybe_compressed(path, "rb") as f:
        try:
            for _, elem in ET.iterparse(f, events=("end",)):
                if _local(elem.tag) != "page":
                    continue
                title = ns = redirect = text = None
                for child in elem.iter():
                    tag = _local(child.tag)
                    if tag == "title" and title is None:
                        title = child.text or ""
                    elif tag == "ns" and ns is None:
                        ns = int(child.text or 0)
                    elif tag == "redirect" and redirect is None:
                        redirect = child.get("title", "")
                    elif tag == "text" and text is None:
                        text = child.text or ""
                yield title, ns or 0, redirect, text or ""
                elem.clear()
        except ET.ParseError as exc:
            raise DumpTruncatedError(f"truncated or malformed dump {path}: {exc}") from exc


def resolve_title(title: str, redirects) -> str:
    if redirects:
        return redirects.get(title, title)
    return title


def parse_dump(path, language: str, kind: str = "wikipedia",
               redirects=None, counters: Counter | None = None,
               date_patterns=None):
    """Yield one PageText per article page of a MediaWiki export dump."""
    counters = counters if counters is not None else Counter()
    for title, ns, redirect, text in _iter_pages(path):
        if ns != 0 or redirect is not None or not title:
            counters["wikitext.pages_skipped_nonarticle"] += 1
            continue
        try:
            body, links = extract_text(text, kind)
        except Exception:
            counters["wikitext.pages_malformed"] += 1
            continue
        if redirects:
            links = [
                HyperlinkSpan(s.start, s.end, s.surface,
                              resolve_title(s.target_title, redirects), s.category)
                for s in links
            ]
        page = PageText(language, normalize_title(title), kind, body, links)
        if kind == "wikinews":
            _, date = extract_wikinews_meta(page, date_patterns)
            page.published = date
        counters["wikitext.pages_emitted"] += 1
        yield page


def build_redirect_map(path, counters: Counter | None = None) -> dict:
    """Redirect title -> final target, chains collapsed, cycles self-mapped."""
    counters = counters if counters is not None else Counter()
    raw = {}
    for title, ns, redirect, _ in _iter_pages(path):
        if redirect is not None and title:
            raw[normalize_title(title)] = normalize_title(redirect)
    resolved = {}
    for src in raw:
        if src in resolved:
            continue
        chain = []
        seen = {}
        node = src
        while node in raw and node not in resolved and node not in seen:
            seen[node] = len(chain)
            chain.append(node)
            node = raw[node]
        if node in seen:
            # cycle: members map to themselves
            counters["wikitext.redirect_cycles"] += 1
            cycle_start = seen[node]
            for member in chain[cycle_start:]:
                resolved[member] = member
            chain = chain[:cycle_start]
            node = chain[-1] if chain else None
            target = resolved.get(node, node)
        else:
            target = resolved.get(node, node)
        for member in chain:
            resolved[member] = target
    return resolved


# ---------------------------------------------------------------------------
# Wikinews meta extraction
# ---------------------------------------------------------------------------

_MONTHS_EN = {m: i + 1 for i, m in enumerate(
    ["january", "february", "march", "april", "may", "june", "july",
     "august", "september", "october", "november", "december"])}
_MONTHS_ES = {m: i + 1 for i, m in enumerate(
    ["enero", "febrero", "marzo", "abril", "mayo", "junio", "julio",
     "agosto", "septiembre", "octubre", "noviembre", "diciembre"])}
_MONTHS_FR = {m: i + 1 for i, m in enumerate(
    ["janvier", "février", "mars", "avril", "mai", "juin", "juillet",
     "août", "septembre", "octobre", "novembre", "décembre"])}


def _iso(y, m, d) -> str | None:
    y, m, d = int(y), int(m), int(d)
    if not (1 <= m <= 12 and 1 <= d <= 31):
        return None
    return f"{y:04d}-{m:02d}-{d:02d}"


def _month_name_pattern(months):
    return "|".join(sorted(months, key=len, reverse=True))


DEFAULT_DATE_PATTERNS = [
    (re.compile(r"\b(\d{4})-(\d{2})-(\d{2})\b"),
     lambda m: _iso(m.group(1), m.group(2), m.group(3))),
    (re.compile(r"\b(\d{4})年(\d{1,2})月(\d{1,2})日"),
     lambda m: _iso(m.group(1), m.group(2), m.group(3))),
    (re.compile(rf"\b({_month_name_pattern(_MONTHS_EN)})\s+(\d{{1,2}}),\s*(\d{{4}})\b", re.I),
     lambda m: _iso(m.group(3), _MONTHS_EN[m.group(1).lower()], m.group(2))),
    (re.compile(rf"\b(\d{{1,2}})\s+de\s+({_month_name_pattern(_MONTHS_ES)})\s+de\s+(\d{{4}})\b", re.I),
     lambda m: _iso(m.group(3), _MONTHS_ES[m.group(2).lower()], m.group(1))),
    (re.compile(rf"\b(\d{{1,2}})(?:er)?\s+({_month_name_pattern(_MONTHS_FR)})\s+(\d{{4}})\b", re.I),
     lambda m: _iso(m.group(3), _MONTHS_FR[unicodedata.normalize('NFC', m.group(2).lower())], m.group(1))),
]


def load_date_patterns(path) -> list:
    """Load per-language date regexes from a JSON config file.

    Each entry: {"regex": ..., "order": "ymd"|"dmy"|"mdy", "months": {...}}.
    Groups named y/m/d or positional per the declared order; month names are
    looked up in the entry's months map when non-numeric.
    """
    import json

    with open(path, encoding="utf-8") as f:
        entries = json.load(f)
    patterns = []
    for entry in entries:
        rx = re.compile(entry["regex"], re.I)
        order = entry.get("order", "ymd")
        months = {k.lower(): v for k, v in entry.get("months", {}).items()}

        def handler(m, order=order, months=months):
            parts = dict(zip(order, m.groups()))
            month = parts["m"]
            if not str(month).isdigit():
                month = months.get(str(month).lower())
                if month is None:
                    return None
            return _iso(parts["y"], month, parts["d"])

        patterns.append((rx, handler))
    return patterns


def extract_wikinews_meta(page: PageText, date_patterns=None):
    """Return (title, ISO date or None) from the first date-bearing line."""
    patterns = date_patterns or DEFAULT_DATE_PATTERNS
    for line in page.body.split("\n"):
        line = line.strip()
        if not line:
            continue
        for rx, handler in patterns:
            m = rx.search(line)
            if m:
                date = handler(m)
                if date:
                    return page.title, date
    return page.title, None
