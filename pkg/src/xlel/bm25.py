"""Multilingual tokenization, inverted index, and BM25-family retrieval.

Documents are the concatenation of an event's title and description; the
candidate pool is per-language (multilingual task) or English-only over all
events (crosslingual task). Scoring implements the Okapi, BM25+ and BM25L
variants with deterministic doc-id tie-breaking.
"""

import hashlib
import json
import math
import pickle
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field

from .ioutils import ConfigError
from .kbx import qid_sort_key

VARIANTS = ("okapi", "plus", "l")

# scripts without word boundaries fall back to character unigrams
_UNSEGMENTED_RANGES = (
    (0x2E80, 0x2EFF),   # CJK radicals
    (0x3040, 0x30FF),   # hiragana, katakana
    (0x3400, 0x4DBF),   # CJK ext A
    (0x4E00, 0x9FFF),   # CJK unified
    (0xF900, 0xFAFF),   # CJK compat
    (0x20000, 0x2A6DF),  # CJK ext B
    (0x0E00, 0x0E7F),   # Thai
    (0x0E80, 0x0EFF),   # Lao
    (0x1780, 0x17FF),   # Khmer
    (0x1000, 0x109F),   # Myanmar
)


def _is_unsegmented(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _UNSEGMENTED_RANGES)


def _is_word_char(ch: str) -> bool:
    if ch == "_":
        return True
    cat = unicodedata.category(ch)
    return cat[0] in ("L", "N") or cat == "Mn"


def tokenize(text: str) -> list:
    """NFKC-normalize, case-fold, segment on word boundaries; runs of
    unsegmented scripts (CJK, Thai, ...) become character unigrams."""
    text = unicodedata.normalize("NFKC", text).casefold()
    tokens = []
    current = []
    for ch in text:
        if not _is_word_char(ch):
            if current:
                tokens.append("".join(current))
                current = []
        elif _is_unsegmented(ch):
            if current:
                tokens.append("".join(current))
                current = []
            tokens.append(ch)
        else:
            current.append(ch)
    if current:
        tokens.append("".join(current))
    return tokens


DEFAULT_TOKENIZER_ID = "unicode-v1"


@dataclass
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75
    delta: float = 1.0


@dataclass
class Query:
    tokens: list
    window: int = 0


@dataclass
class RetrievalResult:
    mention_id: str
    ranked: list  # [(qid, score)] descending
    k: int

    def to_record(self) -> dict:
        return {
            "mention_id": self.mention_id,
            "ranked": [[qid, score] for qid, score in self.ranked],
            "k": self.k,
        }


class Bm25Index:
    """Inverted index over (qid, language) documents."""

    def __init__(self, variant: str, params: Bm25Params,
                 tokenizer=None, tokenizer_id: str = DEFAULT_TOKENIZER_ID):
        if variant not in VARIANTS:
            raise ConfigError(f"unknown BM25 variant: {variant}")
        self.variant = variant
        self.params = params
        self.tokenizer = tokenizer or tokenize
        self.tokenizer_id = tokenizer_id
        self.postings = {}  # term -> [(doc_id, tf)]
        self.doc_lengths = []
        self.doc_ids = []  # doc_id -> (qid, language)
        self.avgdl = 0.0

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    def idf_okapi(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        n = self.n_docs
        return math.log((n - df + 0.5) / (df + 0.5) + 1.0)

    def idf_plus(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        if df == 0:
            return 0.0
        return math.log((self.n_docs + 1.0) / df)

    def term_score(self, term: str, tf: int, dl: int) -> float:
        """Contribution of one query-term occurrence against one document."""
        k1, b, delta = self.params.k1, self.params.b, self.params.delta
        norm = 1.0 - b + b * dl / self.avgdl
        if self.variant == "okapi":
            if tf == 0:
                return 0.0
            return self.idf_okapi(term) * tf * (k1 + 1.0) / (tf + k1 * norm)
        if tf == 0:
            return 0.0
        if self.variant == "plus":
            return self.idf_plus(term) * (tf * (k1 + 1.0) / (tf + k1 * norm) + delta)
        # BM25L
        c = tf / norm
        return self.idf_plus(term) * (k1 + 1.0) * (c + delta) / (k1 + c + delta)

    def score(self, query_tokens, doc_id: int) -> float:
        dl = self.doc_lengths[doc_id]
        tfs = {}
        for term in set(query_tokens):
            for d, tf in self.postings.get(term, ()):
                if d == doc_id:
                    tfs[term] = tf
                    break
        return sum(self.term_score(t, tfs.get(t, 0), dl) for t in query_tokens)

    def fingerprint(self) -> str:
        payload = json.dumps(
            {
                "variant": self.variant,
                "k1": self.params.k1,
                "b": self.params.b,
                "delta": self.params.delta,
                "tokenizer": self.tokenizer_id,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()


def build_index(documents, variant="okapi", params: Bm25Params | None = None,
                tokenizer=None, tokenizer_id: str = DEFAULT_TOKENIZER_ID) -> Bm25Index:
    """documents: iterable of (qid, language, title, description)."""
    docs = sorted(documents, key=lambda d: (qid_sort_key(d[0]), d[1]))
    if not docs:
        raise ConfigError("empty candidate pool")
    index = Bm25Index(variant, params or Bm25Params(), tokenizer, tokenizer_id)
    for doc_id, (qid, lang, title, description) in enumerate(docs):
        tokens = index.tokenizer(f"{title} {description}")
        index.doc_ids.append((qid, lang))
        index.doc_lengths.append(len(tokens))
        for term, tf in sorted(Counter(tokens).items()):
            index.postings.setdefault(term, []).append((doc_id, tf))
    index.avgdl = sum(index.doc_lengths) / len(index.doc_lengths)
    return index


def build_query(mention, window: int, tokenizer=None) -> Query:
    """Mention surface plus up to `window` context tokens per side."""
    tok = tokenizer or tokenize
    tokens = tok(mention.surface)
    if window:
        left = tok(mention.left_context)
        right = tok(mention.right_context)
        tokens = left[-window:] + tokens + right[:window]
    return Query(tokens=tokens, window=window)


def retrieve(index: Bm25Index, query: Query, k: int, mention_id: str = "") -> RetrievalResult:
    """Top-k documents by score; ties broken by ascending doc_id."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    scores = {}
    # sorted term order keeps float accumulation deterministic across runs
    for term in sorted(set(query.tokens)):
        mult = query.tokens.count(term)
        for doc_id, tf in index.postings.get(term, ()):
            contrib = index.term_score(term, tf, index.doc_lengths[doc_id])
            scores[doc_id] = scores.get(doc_id, 0.0) + mult * contrib
    # zero-score documents still rank (by doc_id) when k exceeds the matched set
    if len(scores) < k:
        for doc_id in range(index.n_docs):
            scores.setdefault(doc_id, 0.0)
    order = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    ranked = [(index.doc_ids[doc_id][0], score) for doc_id, score in order[:k]]
    return RetrievalResult(mention_id=mention_id, ranked=ranked, k=k)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_MAGIC = b"XLELBM25"
_FORMAT_VERSION = 1


def save_index(index: Bm25Index, path) -> None:
    header = {
        "version": _FORMAT_VERSION,
        "variant": index.variant,
        "params": {"k1": index.params.k1, "b": index.params.b, "delta": index.params.delta},
        "tokenizer": index.tokenizer_id,
        "fingerprint": index.fingerprint(),
    }
    payload = {
        "postings": index.postings,
        "doc_lengths": index.doc_lengths,
        "doc_ids": index.doc_ids,
        "avgdl": index.avgdl,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(len(header_bytes).to_bytes(4, "big"))
        f.write(header_bytes)
        pickle.dump(payload, f, protocol=4)


def load_index(index_path, tokenizer=None) -> Bm25Index:
    with open(index_path, "rb") as f:
        if f.read(len(_MAGIC)) != _MAGIC:
            raise ConfigError(f"not an index file: {index_path}")
        header_len = int.from_bytes(f.read(4), "big")
        header = json.loads(f.read(header_len))
        if header.get("version") != _FORMAT_VERSION:
            raise ConfigError(f"unsupported index version: {header.get('version')}")
        payload = pickle.load(f)
    index = Bm25Index(
        header["variant"],
        Bm25Params(**header["params"]),
        tokenizer,
        header["tokenizer"],
    )
    if index.fingerprint() != header["fingerprint"]:
        raise ConfigError("index fingerprint mismatch: params or tokenizer changed")
    index.postings = {t: [tuple(p) for p in plist] for t, plist in payload["postings"].items()}
    index.doc_lengths = list(payload["doc_lengths"])
    index.doc_ids = [tuple(d) for d in payload["doc_ids"]]
    index.avgdl = payload["avgdl"]
    return index
