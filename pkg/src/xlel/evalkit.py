"""Scoring of prediction runs: Recall@k, unnormalized accuracy, breakdowns.

A run maps mention_id to a ranked candidate list. Accuracy is unnormalized:
mentions whose gold never appears in the run's candidates count as errors.
"""

from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .ioutils import read_jsonl


class EvalError(Exception):
    pass


@dataclass
class EvalReport:
    run_id: str
    task: str
    recall_at: dict  # k -> fraction
    accuracy: float
    per_language: dict  # lang -> {"accuracy", "recall_at", "n"}
    per_bucket: dict  # bucket -> {"accuracy", "n"}
    n_mentions: int
    missing_mentions: int = 0

    def to_record(self) -> dict:
        return {
            "run_id": self.run_id,
            "task": self.task,
            "recall_at": {str(k): v for k, v in sorted(self.recall_at.items())},
            "accuracy": self.accuracy,
            "per_language": self.per_language,
            "per_bucket": self.per_bucket,
            "n_mentions": self.n_mentions,
            "missing_mentions": self.missing_mentions,
        }


def load_run(path) -> dict:
    """run.jsonl -> mention_id -> [qid, ...] ranked. Duplicate ids are fatal."""
    run = {}
    for rec in read_jsonl(path):
        mid = rec["mention_id"]
        if mid in run:
            raise EvalError(f"duplicate mention_id in run: {mid}")
        run[mid] = [qid for qid, _ in rec["ranked"]]
    return run


def _gold_rank(ranked, gold_qid) -> int | None:
    try:
        return ranked.index(gold_qid) + 1
    except ValueError:
        return None


def recall_at_k(run: dict, gold: dict, ks) -> dict:
    """Fraction of mentions whose gold appears in the top-k, per k.

    Mentions absent from the run count as misses.
    """
    if not gold:
        return {k: 0.0 for k in ks}
    hits = Counter()
    for mid, gold_qid in gold.items():
        rank = _gold_rank(run.get(mid, []), gold_qid)
        if rank is None:
            continue
        for k in ks:
            if rank <= k:
                hits[k] += 1
    return {k: hits[k] / len(gold) for k in ks}


def accuracy(run: dict, gold: dict) -> float:
    """Unnormalized accuracy: rank-1 match over ALL gold mentions."""
    if not gold:
        return 0.0
    correct = sum(
        1 for mid, gold_qid in gold.items()
        if run.get(mid) and run[mid][0] == gold_qid
    )
    return correct / len(gold)


def breakdown(run: dict, gold: dict, mentions, ks=(1, 4, 8)):
    """Per-language and per-bucket tables.

    mentions supply language and bucket per mention_id; language rows are
    sorted by ascending mention count (plot order).
    """
    by_lang = defaultdict(dict)
    by_bucket = defaultdict(dict)
    meta = {m.id: m for m in mentions}
    for mid, gold_qid in gold.items():
        m = meta.get(mid)
        if m is None:
            continue
        by_lang[m.language][mid] = gold_qid
        by_bucket[m.bucket][mid] = gold_qid
    per_language = {}
    for lang in sorted(by_lang, key=lambda lg: (len(by_lang[lg]), lg)):
        g = by_lang[lang]
        per_language[lang] = {
            "accuracy": accuracy(run, g),
            "recall_at": recall_at_k(run, g, ks),
            "n": len(g),
        }
    per_bucket = {}
    for bucket in sorted(by_bucket):
        g = by_bucket[bucket]
        per_bucket[bucket] = {"accuracy": accuracy(run, g), "n": len(g)}
    return per_language, per_bucket


def evaluate(run: dict, gold: dict, mentions, task="multilingual",
             run_id="run", ks=(1, 4, 8)) -> EvalReport:
    rec = recall_at_k(run, gold, ks)
    acc = accuracy(run, gold)
    per_language, per_bucket = breakdown(run, gold, mentions, ks)
    missing = sum(1 for mid in gold if mid not in run)
    report = EvalReport(
        run_id=run_id,
        task=task,
        recall_at=rec,
        accuracy=acc,
        per_language=per_language,
        per_bucket=per_bucket,
        n_mentions=len(gold),
        missing_mentions=missing,
    )
    assert_report_invariants(report)
    return report


def assert_report_invariants(report: EvalReport) -> None:
    """Recall monotone in k; accuracy bounded by every Recall@k."""
    ks = sorted(report.recall_at)
    for lo, hi in zip(ks, ks[1:]):
        if report.recall_at[lo] > report.recall_at[hi] + 1e-12:
            raise EvalError(f"recall not monotone: R@{lo} > R@{hi}")
    for k in ks:
        if report.accuracy > report.recall_at[k] + 1e-12:
            raise EvalError(f"accuracy exceeds recall@{k}")


def per_language_rows(report: EvalReport):
    header = ["language", "n", "accuracy"] + [f"recall@{k}" for k in sorted(report.recall_at)]
    yield header
    for lang, row in report.per_language.items():
        yield [lang, row["n"], f"{row['accuracy']:.6f}"] + [
            f"{row['recall_at'][k]:.6f}" for k in sorted(report.recall_at)
        ]


def per_bucket_rows(report: EvalReport):
    yield ["bucket", "n", "accuracy"]
    for bucket, row in report.per_bucket.items():
        yield [bucket, row["n"], f"{row['accuracy']:.6f}"]


def wikinews_report(run_with_meta: dict, run_without_meta: dict, gold: dict,
                    subset_name: str) -> dict:
    """Accuracy for a Wikinews subset plus the meta-information delta
    (with-meta minus without-meta, in points)."""
    if set(run_with_meta) != set(run_without_meta):
        raise EvalError("meta/no-meta runs cover different mention sets")
    acc_with = accuracy(run_with_meta, gold)
    acc_without = accuracy(run_without_meta, gold)
    return {
        "subset": subset_name,
        "n_mentions": len(gold),
        "accuracy": acc_without,
        "accuracy_with_meta": acc_with,
        "meta_delta_points": 100.0 * (acc_with - acc_without),
    }
