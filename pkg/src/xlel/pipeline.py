"""End-to-end pipeline orchestration: declarative config, content-hash
stage caching, run manifests, and dataset export."""

import datetime
import json
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import __version__, bm25, corpus, evalkit, kbx, splits, wikitext
from .ioutils import (
    ConfigError,
    json_line,
    read_jsonl,
    read_tsv,
    sha256_file,
    sha256_text,
    write_jsonl,
    write_tsv,
)

STAGES = ("kbx", "ingest", "corpus", "split", "index", "retrieve", "eval")


@dataclass
class Thresholds:
    min_mentions: int = 30
    title_match_max: float = 0.5
    context_min: int = 100
    context_max: int = 2000


@dataclass
class PipelineConfig:
    languages: list
    wikidata: str
    wikipedia: dict  # lang -> dump path
    out: str
    wikinews: dict = field(default_factory=dict)
    rules: str | None = None
    thresholds: Thresholds = field(default_factory=Thresholds)
    seed: int = 13
    fractions: tuple = (0.80, 0.10, 0.10)
    task: str = "multilingual"
    variant: str = "plus"
    k1: float = 1.5
    b: float = 0.75
    delta: float = 1.0
    window: int = 16
    k: int = 8
    eval_split: str = "test"

    def validate(self) -> None:
        if not self.languages:
            raise ConfigError("language allowlist is empty")
        t = self.thresholds
        if min(t.min_mentions, t.context_min, t.context_max) <= 0 or t.title_match_max <= 0:
            raise ConfigError("thresholds must be positive")
        if t.context_min >= t.context_max:
            raise ConfigError("context_min must be < context_max")
        if self.task not in ("multilingual", "crosslingual"):
            raise ConfigError(f"unknown task: {self.task}")
        if self.variant not in bm25.VARIANTS:
            raise ConfigError(f"unknown BM25 variant: {self.variant}")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ConfigError("split fractions must sum to 1")
        if self.eval_split not in splits.SPLITS:
            raise ConfigError(f"unknown eval split: {self.eval_split}")
        for lang in self.wikipedia:
            if lang not in self.languages:
                raise ConfigError(f"wikipedia dump for {lang} not in allowlist")

    def to_dict(self) -> dict:
        return {
            "languages": list(self.languages),
            "wikidata": str(self.wikidata),
            "wikipedia": {k: str(v) for k, v in self.wikipedia.items()},
            "wikinews": {k: str(v) for k, v in self.wikinews.items()},
            "out": str(self.out),
            "rules": str(self.rules) if self.rules else None,
            "thresholds": vars(self.thresholds),
            "seed": self.seed,
            "fractions": list(self.fractions),
            "task": self.task,
            "bm25": {
                "variant": self.variant,
                "k1": self.k1,
                "b": self.b,
                "delta": self.delta,
                "window": self.window,
                "k": self.k,
            },
            "eval_split": self.eval_split,
        }

    def config_hash(self) -> str:
        return sha256_text(json.dumps(self.to_dict(), sort_keys=True))


def load_config(path) -> PipelineConfig:
    with open(path, encoding="utf-8") as f:
        raw = yaml.safe_load(f)
    if not isinstance(raw, dict):
        raise ConfigError(f"config file is not a mapping: {path}")
    base = Path(path).parent

    def respath(p):
        p = Path(p)
        return str(p if p.is_absolute() else base / p)

    try:
        bm = raw.get("bm25", {})
        split_cfg = raw.get("split", {})
        cfg = PipelineConfig(
            languages=list(raw["languages"]),
            wikidata=respath(raw["wikidata"]),
            wikipedia={k: respath(v) for k, v in raw["wikipedia"].items()},
            wikinews={k: respath(v) for k, v in raw.get("wikinews", {}).items()},
            out=respath(raw["out"]) if "out" in raw else "",
            rules=respath(raw["rules"]) if raw.get("rules") else None,
            thresholds=Thresholds(**raw.get("thresholds", {})),
            seed=int(split_cfg.get("seed", 13)),
            fractions=tuple(split_cfg.get("fractions", (0.80, 0.10, 0.10))),
            task=raw.get("task", "multilingual"),
            variant=bm.get("variant", "plus"),
            k1=float(bm.get("k1", 1.5)),
            b=float(bm.get("b", 0.75)),
            delta=float(bm.get("delta", 1.0)),
            window=int(bm.get("window", 16)),
            k=int(bm.get("k", 8)),
            eval_split=raw.get("eval_split", "test"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# manifest and caching
# ---------------------------------------------------------------------------


class RunManifest:
    def __init__(self, config: PipelineConfig):
        self.data = {
            "tool_version": __version__,
            "config_hash": config.config_hash(),
            "config": config.to_dict(),
            "seed": config.seed,
            "dumps": {},
            "stages": {},
            "timestamps": {},
        }

    def record_stage(self, name: str, counters: Counter, cached: bool = False) -> None:
        self.data["stages"][name] = {
            "cached": cached,
            "counters": dict(sorted(counters.items())),
        }
        self.data["timestamps"][name] = datetime.datetime.now(
            datetime.timezone.utc
        ).isoformat()

    def write(self, out_dir) -> None:
        path = Path(out_dir) / "manifest.json"
        path.write_text(
            json.dumps(self.data, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )


def reconcile(counters: Counter, scanned_key: str, kept_key: str, dropped_keys) -> None:
    """Assert kept + dropped = scanned for a stage's counters."""
    scanned = counters.get(scanned_key, 0)
    kept = counters.get(kept_key, 0)
    dropped = sum(counters.get(k, 0) for k in dropped_keys)
    if scanned != kept + dropped:
        raise AssertionError(
            f"counter reconciliation failed: {scanned_key}={scanned} != "
            f"{kept_key}={kept} + dropped={dropped}"
        )


def _stage_key(parts: dict) -> str:
    return sha256_text(json.dumps(parts, sort_keys=True))


def _cache_check(stage_dir: Path, key: str, force: bool) -> bool:
    """True when the cached stage output is valid and can be reused."""
    key_file = stage_dir / ".stage_key"
    if not key_file.exists():
        return False
    if key_file.read_text().strip() == key:
        return True
    if not force:
        raise ConfigError(
            f"stage cache at {stage_dir} was built with a different config; "
            "pass --force to rebuild"
        )
    return False


def _cache_store(stage_dir: Path, key: str) -> None:
    (stage_dir / ".stage_key").write_text(key + "\n")


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


def stage_kbx(config: PipelineConfig, out_dir: Path, counters: Counter):
    rules = kbx.load_exclusion_rules(config.rules)
    events = list(
        kbx.identify_candidate_events(
            kbx.read_wikidata_dump(config.wikidata, counters),
            rules,
            config.languages,
            counters,
        )
    )
    qids = {e.qid for e in events}
    part_of = kbx.extract_part_of_edges(kbx.read_wikidata_dump(config.wikidata), qids)
    n_before = len(events)
    events = kbx.filter_leaf_events(events, part_of)
    counters["kbx.dropped_non_leaf"] += n_before - len(events)
    qids = {e.qid for e in events}
    edges = kbx.extract_sequence_edges(
        kbx.read_wikidata_dump(config.wikidata), qids, counters
    )
    write_jsonl(out_dir / "events.jsonl", (e.to_record() for e in events))
    write_tsv(
        out_dir / "sequence_edges.tsv",
        sorted(edges, key=lambda e: (kbx.qid_sort_key(e[0]), kbx.qid_sort_key(e[1]))),
    )
    write_tsv(out_dir / "exclusion_rules.tsv", [(r.property, r.value) for r in rules])
    reconcile(
        counters,
        "kbx.items_scanned",
        "kbx.events_kept",
        [
            "kbx.malformed_items",
            "kbx.dropped_no_temporal",
            "kbx.dropped_no_spatial",
            "kbx.dropped_excluded",
            "kbx.dropped_no_sitelink",
        ],
    )
    return events, edges


def stage_ingest(config: PipelineConfig, out_dir: Path, counters: Counter):
    for kind, dumps in (("wikipedia", config.wikipedia), ("wikinews", config.wikinews)):
        for lang, dump in sorted(dumps.items()):
            redirects = wikitext.build_redirect_map(dump, counters)
            pages = wikitext.parse_dump(dump, lang, kind, redirects, counters)
            suffix = "" if kind == "wikipedia" else ".wikinews"
            write_jsonl(out_dir / f"pages.{lang}{suffix}.jsonl", (p.to_record() for p in pages))
            write_tsv(out_dir / f"redirects.{lang}{suffix}.tsv", sorted(redirects.items()))


def _load_pages(ingest_dir: Path, lang: str, wikinews: bool = False):
    suffix = ".wikinews" if wikinews else ""
    path = ingest_dir / f"pages.{lang}{suffix}.jsonl"
    if not path.exists():
        return
    for rec in read_jsonl(path):
        yield wikitext.PageText.from_record(rec)


def load_events(kbx_dir: Path) -> list:
    return [kbx.WikidataEvent.from_record(r) for r in read_jsonl(Path(kbx_dir) / "events.jsonl")]


def load_descriptions(corpus_dir: Path) -> list:
    return [
        kbx.EventDescription(r["qid"], r["language"], r["title"], r["description"])
        for r in read_jsonl(Path(corpus_dir) / "descriptions.jsonl")
    ]


def load_mentions(path) -> list:
    return [corpus.Mention.from_record(r) for r in read_jsonl(path)]


def stage_corpus(config: PipelineConfig, out_dir: Path, kbx_dir: Path,
                 ingest_dir: Path, counters: Counter):
    events = load_events(kbx_dir)
    title_to_qid = {}
    qid_to_title = {}
    for e in events:
        for lang, title in e.sitelinks.items():
            title_to_qid[(lang, title)] = e.qid
            qid_to_title[(e.qid, lang)] = title

    # descriptions from the ingested event pages
    wikipage_texts = {}
    wanted = set(title_to_qid)
    for lang in config.languages:
        for page in _load_pages(ingest_dir, lang):
            if (lang, page.title) in wanted:
                wikipage_texts[(lang, page.title)] = page.body
    descriptions = list(kbx.compile_descriptions(events, wikipage_texts, counters))
    write_jsonl(out_dir / "descriptions.jsonl", (d.to_record() for d in descriptions))
    desc_by_key = {(d.qid, d.language): d for d in descriptions}

    t = config.thresholds
    mentions = []
    for lang in config.languages:
        pages = _load_pages(ingest_dir, lang)
        for m in corpus.harvest_mentions(pages, title_to_qid, counters=counters):
            desc = desc_by_key.get((m.gold_qid, m.language))
            title = qid_to_title.get((m.gold_qid, m.language), "")
            if not corpus.filter_temporal(m, title, desc.description if desc else ""):
                counters["corpus.mentions_dropped_temporal"] += 1
                continue
            if not corpus.filter_context_length(m, t.context_min, t.context_max):
                counters["corpus.mentions_dropped_context_length"] += 1
                continue
            mentions.append(m)
    surviving, mentions = corpus.filter_events(
        mentions, qid_to_title, t.min_mentions, t.title_match_max, counters
    )
    counters["corpus.mentions_kept"] += len(mentions)
    write_jsonl(out_dir / "mentions.jsonl", (m.to_record() for m in mentions))

    # wikinews mentions: only context-length bounds apply
    wn_mentions = []
    for lang in sorted(config.wikinews):
        pages = _load_pages(ingest_dir, lang, wikinews=True)
        for m in corpus.harvest_wikinews(pages, title_to_qid, surviving, counters=counters):
            if not corpus.filter_context_length(m, t.context_min, t.context_max):
                counters["corpus.wikinews_dropped_context_length"] += 1
                continue
            wn_mentions.append(m)
    wn_mentions.sort(key=lambda m: m.id)
    write_jsonl(out_dir / "wikinews_mentions.jsonl", (m.to_record() for m in wn_mentions))

    stats = corpus.compute_stats(mentions, surviving)
    (out_dir / "stats.json").write_text(
        json.dumps(stats.to_record(), sort_keys=True, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return surviving, mentions


def stage_split(config: PipelineConfig, out_dir: Path, kbx_dir: Path,
                corpus_dir: Path, counters: Counter):
    surviving = {m.gold_qid for m in load_mentions(corpus_dir / "mentions.jsonl")}
    edges = {(a, b) for a, b in read_tsv(kbx_dir / "sequence_edges.tsv")}
    sequences = splits.build_sequences(sorted(surviving, key=kbx.qid_sort_key), edges)
    assignment = splits.assign_splits(sequences, config.fractions, config.seed)
    rows = [
        (qid, assignment.by_qid[qid], assignment.sequence_of[qid])
        for qid in sorted(assignment.by_qid, key=kbx.qid_sort_key)
    ]
    write_tsv(out_dir / "splits.tsv", rows)
    for split, n in assignment.counts()["events"].items():
        counters[f"split.events_{split}"] = n
    for split, n in assignment.counts()["sequences"].items():
        counters[f"split.sequences_{split}"] = n

    wn_path = corpus_dir / "wikinews_mentions.jsonl"
    if wn_path.exists():
        wn = load_mentions(wn_path)
        cross, zero = splits.derive_wikinews_sets(wn, assignment)
        write_jsonl(out_dir / "wikinews_cross_domain.jsonl", (m.to_record() for m in cross))
        write_jsonl(out_dir / "wikinews_zero_shot.jsonl", (m.to_record() for m in zero))
        counters["split.wikinews_cross_domain"] = len(cross)
        counters["split.wikinews_zero_shot"] = len(zero)
    return assignment


def load_splits(split_dir: Path) -> dict:
    return {qid: split for qid, split, _ in read_tsv(Path(split_dir) / "splits.tsv")}


def description_pools(descriptions, task: str):
    """lang -> [(qid, lang, title, description)] candidate pools."""
    pools = {}
    if task == "crosslingual":
        pools["en"] = [
            (d.qid, d.language, d.title, d.description)
            for d in descriptions
            if d.language == "en"
        ]
    else:
        for d in descriptions:
            pools.setdefault(d.language, []).append(
                (d.qid, d.language, d.title, d.description)
            )
    return pools


def stage_index(config: PipelineConfig, out_dir: Path, corpus_dir: Path,
                counters: Counter):
    descriptions = load_descriptions(corpus_dir)
    mention_qids = {m.gold_qid for m in load_mentions(corpus_dir / "mentions.jsonl")}
    descriptions = [d for d in descriptions if d.qid in mention_qids]
    params = bm25.Bm25Params(config.k1, config.b, config.delta)
    pools = description_pools(descriptions, config.task)
    if not pools:
        raise ConfigError("no candidate pools: empty description set")
    for lang, docs in sorted(pools.items()):
        index = bm25.build_index(docs, config.variant, params)
        bm25.save_index(index, out_dir / f"{lang}.idx")
        counters[f"index.docs_{lang}"] = index.n_docs


def run_retrieval(mentions, index_dir: Path, task: str, window: int, k: int,
                  use_meta: bool = False, counters: Counter | None = None):
    """Score mentions against the per-language (or English) indexes."""
    counters = counters if counters is not None else Counter()
    index_dir = Path(index_dir)
    indexes = {}
    results = []
    for m in sorted(mentions, key=lambda m: m.id):
        lang = "en" if task == "crosslingual" else m.language
        if lang not in indexes:
            path = index_dir / f"{lang}.idx"
            indexes[lang] = bm25.load_index(path) if path.exists() else None
        index = indexes[lang]
        if index is None:
            counters["retrieve.mentions_no_pool"] += 1
            results.append(bm25.RetrievalResult(m.id, [], k))
            continue
        if use_meta and (m.meta_title or m.meta_date):
            meta = " ".join(filter(None, [m.meta_title, m.meta_date]))
            m = corpus.Mention(**{**vars(m), "left_context": meta + " " + m.left_context})
        query = bm25.build_query(m, window, index.tokenizer)
        results.append(bm25.retrieve(index, query, k, m.id))
        counters["retrieve.mentions_scored"] += 1
    return results


def stage_retrieve(config: PipelineConfig, out_dir: Path, corpus_dir: Path,
                   split_dir: Path, index_dir: Path, counters: Counter):
    mentions = load_mentions(corpus_dir / "mentions.jsonl")
    split_of = load_splits(split_dir)
    subset = [m for m in mentions if split_of.get(m.gold_qid) == config.eval_split]
    results = run_retrieval(
        subset, index_dir, config.task, config.window, config.k, counters=counters
    )
    write_jsonl(out_dir / "run.jsonl", (r.to_record() for r in results))
    return results


def stage_eval(config: PipelineConfig, out_dir: Path, corpus_dir: Path,
               split_dir: Path, retrieve_dir: Path, counters: Counter):
    mentions = load_mentions(corpus_dir / "mentions.jsonl")
    split_of = load_splits(split_dir)
    subset = [m for m in mentions if split_of.get(m.gold_qid) == config.eval_split]
    run = evalkit.load_run(retrieve_dir / "run.jsonl")
    gold = {m.id: m.gold_qid for m in subset}
    ks = sorted({1, 4, 8, config.k})
    report = evalkit.evaluate(run, gold, subset, config.task,
                              run_id=f"bm25-{config.variant}-w{config.window}", ks=ks)
    (out_dir / "report.json").write_text(
        json.dumps(report.to_record(), sort_keys=True, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    write_tsv(out_dir / "per_language.tsv", evalkit.per_language_rows(report))
    write_tsv(out_dir / "per_bucket.tsv", evalkit.per_bucket_rows(report))
    counters["eval.n_mentions"] = report.n_mentions
    return report


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------


def _input_hashes(paths) -> dict:
    return {str(p): sha256_file(p) for p in paths if p and Path(p).exists()}


def run_pipeline(config: PipelineConfig, force: bool = False) -> RunManifest:
    config.validate()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    lock = out / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        os.close(fd)
    except FileExistsError:
        raise ConfigError(f"output directory is locked by another run: {lock}")
    try:
        return _run_pipeline_locked(config, out, force)
    finally:
        lock.unlink(missing_ok=True)


def _run_pipeline_locked(config: PipelineConfig, out: Path, force: bool) -> RunManifest:
    manifest = RunManifest(config)
    manifest.data["dumps"] = _input_hashes(
        [config.wikidata, *config.wikipedia.values(), *config.wikinews.values()]
    )
    cfg = config.to_dict()
    dirs = {name: out / name for name in STAGES}

    def run_stage(name, key_parts, fn):
        stage_dir = dirs[name]
        stage_dir.mkdir(parents=True, exist_ok=True)
        key = _stage_key(key_parts)
        counters = Counter()
        if _cache_check(stage_dir, key, force):
            manifest.record_stage(name, counters, cached=True)
            return
        fn(counters)
        _cache_store(stage_dir, key)
        manifest.record_stage(name, counters)

    def out_hashes(stage):
        # keyed by file name, not path, so cache keys are location-independent
        return {
            p.name: sha256_file(p)
            for p in sorted(dirs[stage].iterdir())
            if p.name != ".stage_key"
        }

    run_stage(
        "kbx",
        {"cfg": {"languages": cfg["languages"], "rules": cfg["rules"]},
         "inputs": _input_hashes([config.wikidata, config.rules])},
        lambda c: stage_kbx(config, dirs["kbx"], c),
    )
    run_stage(
        "ingest",
        {"inputs": _input_hashes([*config.wikipedia.values(), *config.wikinews.values()])},
        lambda c: stage_ingest(config, dirs["ingest"], c),
    )
    run_stage(
        "corpus",
        {"cfg": cfg["thresholds"], "kbx": out_hashes("kbx"), "ingest": out_hashes("ingest")},
        lambda c: stage_corpus(config, dirs["corpus"], dirs["kbx"], dirs["ingest"], c),
    )
    run_stage(
        "split",
        {"cfg": {"seed": cfg["seed"], "fractions": cfg["fractions"]},
         "corpus": out_hashes("corpus"), "kbx": out_hashes("kbx")},
        lambda c: stage_split(config, dirs["split"], dirs["kbx"], dirs["corpus"], c),
    )
    run_stage(
        "index",
        {"cfg": cfg["bm25"], "task": cfg["task"], "corpus": out_hashes("corpus")},
        lambda c: stage_index(config, dirs["index"], dirs["corpus"], c),
    )
    run_stage(
        "retrieve",
        {"cfg": cfg["bm25"], "task": cfg["task"], "eval_split": cfg["eval_split"],
         "index": out_hashes("index"), "split": out_hashes("split")},
        lambda c: stage_retrieve(config, dirs["retrieve"], dirs["corpus"],
                                 dirs["split"], dirs["index"], c),
    )
    run_stage(
        "eval",
        {"retrieve": out_hashes("retrieve"), "split": out_hashes("split")},
        lambda c: stage_eval(config, dirs["eval"], dirs["corpus"],
                             dirs["split"], dirs["retrieve"], c),
    )
    manifest.write(out)
    return manifest


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def export_dataset(corpus_dir, split_dir, out_dir) -> dict:
    """Release bundle: per-split mentions, per-language dictionaries,
    splits.tsv, stats.json, and a README listing record counts."""
    corpus_dir, split_dir, out_dir = Path(corpus_dir), Path(split_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    split_of = load_splits(split_dir)
    if not split_of:
        raise ConfigError("missing split assignment")
    mentions = load_mentions(corpus_dir / "mentions.jsonl")
    counts = {}
    for split in splits.SPLITS:
        subset = [m for m in mentions if split_of.get(m.gold_qid) == split]
        counts[f"mentions.{split}.jsonl"] = write_jsonl(
            out_dir / f"mentions.{split}.jsonl", (m.to_record() for m in subset)
        )
    descriptions = load_descriptions(corpus_dir)
    by_lang = {}
    for d in descriptions:
        by_lang.setdefault(d.language, []).append(d)
    for lang, ds in sorted(by_lang.items()):
        ds.sort(key=lambda d: kbx.qid_sort_key(d.qid))
        counts[f"dictionary.{lang}.jsonl"] = write_jsonl(
            out_dir / f"dictionary.{lang}.jsonl", (d.to_record() for d in ds)
        )
    rows = list(read_tsv(split_dir / "splits.tsv"))
    write_tsv(out_dir / "splits.tsv", rows)
    counts["splits.tsv"] = len(rows)
    stats_src = corpus_dir / "stats.json"
    (out_dir / "stats.json").write_text(stats_src.read_text(encoding="utf-8"), encoding="utf-8")
    lines = ["# Dataset bundle", "", "| file | records |", "| --- | --- |"]
    lines += [f"| {name} | {n} |" for name, n in sorted(counts.items())]
    (out_dir / "README.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return counts
