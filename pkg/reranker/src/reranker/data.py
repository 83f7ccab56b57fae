"""Reading the upstream corpus and dictionary files and writing run files.

All interchange happens through plain JSONL records so this package never
imports the corpus toolkit itself.
"""

import json
import os
import tempfile
from pathlib import Path


def read_jsonl(path):
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                yield json.loads(line)


def write_jsonl(path, records) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True, ensure_ascii=False,
                               separators=(",", ":")) + "\n")
            n += 1
    return n


def load_mentions(path) -> list:
    return list(read_jsonl(path))


def load_dictionary(paths) -> list:
    """One or more dictionary.<lang>.jsonl files -> candidate records."""
    records = []
    for path in paths:
        records.extend(read_jsonl(path))
    return records


def candidate_pools(candidates, task: str) -> dict:
    """language -> candidate list; crosslingual uses the English pool only."""
    if task not in ("multilingual", "crosslingual"):
        raise ValueError(f"unknown task: {task}")
    pools = {}
    if task == "crosslingual":
        pools["en"] = [c for c in candidates if c["language"] == "en"]
    else:
        for c in candidates:
            pools.setdefault(c["language"], []).append(c)
    return {lang: pool for lang, pool in pools.items() if pool}


def pool_for(mention: dict, pools: dict, task: str):
    lang = "en" if task == "crosslingual" else mention["language"]
    return pools.get(lang)


def run_record(mention_id: str, ranked, k: int) -> dict:
    return {"mention_id": mention_id,
            "ranked": [[qid, float(score)] for qid, score in ranked],
            "k": k}


def atomic_save(save_fn, path) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    os.close(fd)
    try:
        save_fn(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
