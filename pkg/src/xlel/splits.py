"""Zero-shot split assignment with sequence-level disjointness.

Events connected by follows/followed-by edges form sequences; a sequence is
assigned atomically so no split ever shares events from one sequence.
"""

import random
from dataclasses import dataclass

from .ioutils import ConfigError
from .kbx import qid_sort_key

SPLITS = ("train", "dev", "test")


@dataclass
class EventSequence:
    sequence_id: str  # smallest member qid
    members: frozenset


@dataclass
class SplitAssignment:
    by_qid: dict  # qid -> "train" | "dev" | "test"
    seed: int
    target_fractions: tuple
    sequence_of: dict  # qid -> sequence_id

    def split_of(self, qid: str) -> str:
        return self.by_qid[qid]

    def counts(self) -> dict:
        events = {s: 0 for s in SPLITS}
        sequences = {s: set() for s in SPLITS}
        for qid, split in self.by_qid.items():
            events[split] += 1
            sequences[split].add(self.sequence_of[qid])
        return {
            "events": events,
            "sequences": {s: len(v) for s, v in sequences.items()},
        }


def build_sequences(event_qids, edges) -> list:
    """Connected components of the undirected sequence-edge graph."""
    parent = {q: q for q in event_qids}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        if a in parent and b in parent:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[rb] = ra
    groups = {}
    for q in event_qids:
        groups.setdefault(find(q), set()).add(q)
    sequences = [
        EventSequence(min(members, key=qid_sort_key), frozenset(members))
        for members in groups.values()
    ]
    sequences.sort(key=lambda s: qid_sort_key(s.sequence_id))
    return sequences


def assign_splits(sequences, fractions=(0.80, 0.10, 0.10), seed=0) -> SplitAssignment:
    """Greedy deficit assignment of whole sequences after a seeded shuffle."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1: {fractions}")
    if len(sequences) < 3:
        raise ConfigError("need at least 3 sequences to form three splits")
    order = sorted(sequences, key=lambda s: qid_sort_key(s.sequence_id))
    rng = random.Random(seed)
    rng.shuffle(order)
    total = sum(len(s.members) for s in order)
    counts = [0, 0, 0]
    by_qid = {}
    sequence_of = {}
    for seq in order:
        deficits = [fractions[i] * total - counts[i] for i in range(3)]
        # ties resolve train > dev > test via max() taking the first argmax
        target = max(range(3), key=lambda i: (deficits[i], -i))
        counts[target] += len(seq.members)
        for qid in seq.members:
            by_qid[qid] = SPLITS[target]
            sequence_of[qid] = seq.sequence_id
    return SplitAssignment(by_qid, seed, tuple(fractions), sequence_of)


def derive_wikinews_sets(wikinews_mentions, assignment: SplitAssignment):
    """(cross_domain, zero_shot) mention lists; zero-shot golds come only
    from dev/test events."""
    cross = list(wikinews_mentions)
    zero = [
        m for m in cross
        if assignment.by_qid.get(m.gold_qid) in ("dev", "test")
    ]
    return cross, zero
