"""Shared toy corpus (50 events, lexically informative contexts) and a
session-scoped trained biencoder so the slower tests reuse one model."""

import random

import pytest

from reranker.train import TrainConfig, retrieve_dense, train_biencoder

CITIES = ["vancouver", "turin", "sochi", "oslo", "nagano", "calgary",
          "grenoble", "sapporo", "lillehammer", "albertville", "bern",
          "helsinki", "prague", "madrid", "lyon", "porto", "gent", "basel",
          "graz", "malmo", "aarhus", "bergen", "kyoto", "busan", "quito"]


def toy_corpus(n_events: int = 50, train_per_event: int = 6,
               dev_per_event: int = 2, seed: int = 5):
    rng = random.Random(seed)
    candidates = []
    events = []
    for i in range(n_events):
        qid = f"Q{i + 1}"
        year = 1950 + i
        city = CITIES[i % len(CITIES)] + str(i // len(CITIES))
        events.append((qid, year, city))
        for lang in ("en", "de"):
            candidates.append({
                "qid": qid,
                "language": lang,
                "title": f"{year} games",
                "description": f"the {year} games took place in {city}",
            })

    def mention(qid, year, city, split, j):
        lang = "en" if j % 2 == 0 else "de"
        filler = " ".join(rng.choices(
            ["reports", "athletes", "during", "the", "season", "press"], k=3))
        return {
            "id": f"{lang}:{split}{qid}x{j}:0",
            "language": lang,
            "source_title": f"Article {qid} {j}",
            "surface": "the games",
            "left_context": f"in {city} {filler} ",
            "right_context": f" of {year} drew large crowds",
            "gold_qid": qid,
            "bucket": "low_overlap",
        }

    train = [mention(q, y, c, "t", j)
             for q, y, c in events for j in range(train_per_event)]
    dev = [mention(q, y, c, "d", j + 100)
           for q, y, c in events for j in range(dev_per_event)]
    return train, dev, candidates


@pytest.fixture(scope="session")
def corpus():
    return toy_corpus()


@pytest.fixture(scope="session")
def bi_config():
    return TrainConfig(epochs=5, lr=3e-3, batch_size=16, seed=1)


@pytest.fixture(scope="session")
def trained_biencoder(corpus, bi_config):
    train, dev, candidates = corpus
    model, vocab, log = train_biencoder(train, dev, candidates,
                                        config=bi_config)
    return model, vocab, log


@pytest.fixture(scope="session")
def dev_run(trained_biencoder, corpus, bi_config):
    model, vocab, _ = trained_biencoder
    _, dev, candidates = corpus
    return retrieve_dense(model, vocab, dev, candidates, k=8, config=bi_config)
