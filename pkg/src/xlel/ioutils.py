"""Shared I/O helpers: compressed streams, JSONL and TSV files, hashing."""

import bz2
import gzip
import hashlib
import json
from pathlib import Path


class ConfigError(Exception):
    """Invalid configuration or input schema; maps to exit code 1."""


def open_maybe_compressed(path, mode="rt"):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode, encoding="utf-8" if "t" in mode else None)
    if path.suffix == ".bz2":
        return bz2.open(path, mode, encoding="utf-8" if "t" in mode else None)
    if "t" in mode:
        return open(path, mode, encoding="utf-8")
    return open(path, mode)


def read_jsonl(path):
    with open_maybe_compressed(path) as f:
        for line in f:
            line = line.strip()
            if line:
                yield json.loads(line)


def json_line(record) -> str:
    return json.dumps(record, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def write_jsonl(path, records):
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json_line(rec) + "\n")
            n += 1
    return n


def write_tsv(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write("\t".join(str(c) for c in row) + "\n")


def read_tsv(path):
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if line:
                yield line.split("\t")


def sha256_file(path, chunk_size=1 << 20) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        while chunk := f.read(chunk_size):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
