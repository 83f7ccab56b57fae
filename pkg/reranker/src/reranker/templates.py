"""Input templates for contexts, candidates, and crossencoder pairs.

Context: [CLS] left [MENTION_START] mention [MENTION_END] right [SEP]
         (meta variant prepends `title [SEP] date [SEP]`)
Candidate: [CLS] title [EVT] description [SEP]
Pair: context tokens followed by [SEP] title [EVT] description [SEP]

Truncation shortens the left/right contexts symmetrically around the
mention, so the surface and both marker tokens always survive.
"""

from .vocab import CLS, EVT, MENTION_END, MENTION_START, SEP, word_tokenize


class TemplateError(Exception):
    pass


def _truncate_sides(left: list, right: list, budget: int) -> tuple:
    """Keep the tail of `left` and the head of `right`, at most `budget`
    tokens combined, split as evenly as the two sides allow."""
    if budget <= 0:
        return [], []
    if len(left) + len(right) <= budget:
        return left, right
    half = budget // 2
    take_left = min(len(left), max(half, budget - len(right)))
    take_right = min(len(right), budget - take_left)
    return left[len(left) - take_left:], right[:take_right]


def context_tokens(mention: dict, max_tokens: int = 128,
                   use_meta: bool = False) -> list:
    surface = word_tokenize(mention["surface"])
    prefix = [CLS]
    if use_meta and (mention.get("meta_title") or mention.get("meta_date")):
        if mention.get("meta_title"):
            prefix += word_tokenize(mention["meta_title"]) + [SEP]
        if mention.get("meta_date"):
            prefix += word_tokenize(mention["meta_date"]) + [SEP]
    fixed = len(prefix) + len(surface) + 3  # both markers + final [SEP]
    if fixed > max_tokens:
        raise TemplateError(
            f"mention does not fit in {max_tokens} tokens: {mention['surface']!r}"
        )
    left, right = _truncate_sides(
        word_tokenize(mention.get("left_context", "")),
        word_tokenize(mention.get("right_context", "")),
        max_tokens - fixed,
    )
    return prefix + left + [MENTION_START] + surface + [MENTION_END] + right + [SEP]


def candidate_tokens(title: str, description: str, max_tokens: int = 128) -> list:
    title_toks = word_tokenize(title)
    desc_toks = word_tokenize(description)
    fixed = 3  # [CLS], [EVT], [SEP]
    if fixed + len(title_toks) > max_tokens:
        title_toks = title_toks[: max_tokens - fixed]
    desc_toks = desc_toks[: max_tokens - fixed - len(title_toks)]
    return [CLS] + title_toks + [EVT] + desc_toks + [SEP]


def pair_tokens(mention: dict, title: str, description: str,
                max_tokens: int = 256, use_meta: bool = False) -> list:
    """Crossencoder input: context then the candidate, jointly bounded."""
    cand = candidate_tokens(title, description, max_tokens // 2)[1:]  # drop [CLS]
    ctx = context_tokens(mention, max_tokens - len(cand), use_meta)
    # the context's closing [SEP] doubles as the separator before the title
    return ctx + cand


def mention_span(tokens: list) -> list:
    """Surface tokens between the mention markers (round-trip check)."""
    try:
        start = tokens.index(MENTION_START)
        end = tokens.index(MENTION_END)
    except ValueError as exc:
        raise TemplateError("mention markers missing") from exc
    return tokens[start + 1 : end]
