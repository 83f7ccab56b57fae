"""Word-level tokenizer and vocabulary with reserved special tokens."""

import json
import re
from collections import Counter

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
MENTION_START, MENTION_END, EVT = "[MENTION_START]", "[MENTION_END]", "[EVT]"
SPECIALS = (PAD, UNK, CLS, SEP, MENTION_START, MENTION_END, EVT)

_WORD_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def word_tokenize(text: str) -> list:
    return _WORD_RE.findall(text.lower())


class Vocab:
    """Token <-> id mapping; ids 0..6 are the special tokens."""

    def __init__(self, tokens=None, min_count: int = 1):
        self.token_to_id = {t: i for i, t in enumerate(SPECIALS)}
        if tokens is not None:
            counts = Counter(tokens)
            for token, n in sorted(counts.items()):
                if n >= min_count and token not in self.token_to_id:
                    self.token_to_id[token] = len(self.token_to_id)
        self.id_to_token = {i: t for t, i in self.token_to_id.items()}

    def __len__(self) -> int:
        return len(self.token_to_id)

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK]

    def encode(self, tokens) -> list:
        unk = self.unk_id
        return [self.token_to_id.get(t, unk) for t in tokens]

    def decode(self, ids) -> list:
        return [self.id_to_token.get(i, UNK) for i in ids]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.token_to_id, f, ensure_ascii=False)

    @classmethod
    def load(cls, path) -> "Vocab":
        vocab = cls()
        with open(path, encoding="utf-8") as f:
            vocab.token_to_id = json.load(f)
        vocab.id_to_token = {i: t for t, i in vocab.token_to_id.items()}
        return vocab


def build_vocab(mentions, candidates, min_count: int = 1) -> Vocab:
    """Vocabulary over mention contexts and candidate texts."""
    def stream():
        for m in mentions:
            yield from word_tokenize(m.get("left_context", ""))
            yield from word_tokenize(m.get("surface", ""))
            yield from word_tokenize(m.get("right_context", ""))
            for key in ("meta_title", "meta_date"):
                if m.get(key):
                    yield from word_tokenize(m[key])
        for c in candidates:
            yield from word_tokenize(c.get("title", ""))
            yield from word_tokenize(c.get("description", ""))

    return Vocab(stream(), min_count=min_count)
