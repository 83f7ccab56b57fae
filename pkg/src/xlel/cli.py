"""`xlel` command line: per-stage subcommands plus full pipeline runs.

Exit codes: 0 ok, 1 configuration error, 2 runtime error.
"""

import argparse
import json
import sys
from collections import Counter
from pathlib import Path

from . import bm25, corpus, evalkit, kbx, pipeline, splits, wikitext
from .ioutils import ConfigError, read_tsv, write_jsonl, write_tsv


def _add_kbx(sub):
    p = sub.add_parser("kbx", help="identify KB events from a Wikidata dump")
    p.add_argument("--wikidata", required=True)
    p.add_argument("--rules", default=None)
    p.add_argument("--langs", default=None, help="language allowlist file")
    p.add_argument("--pages", default=None,
                   help="ingest output dir; enables descriptions.jsonl")
    p.add_argument("--out", required=True)


def _add_ingest(sub):
    p = sub.add_parser("ingest", help="parse a MediaWiki XML dump to plain text")
    p.add_argument("--dump", required=True)
    p.add_argument("--lang", required=True)
    p.add_argument("--kind", choices=("wikipedia", "wikinews"), default="wikipedia")
    p.add_argument("--out", required=True)


def _add_corpus(sub):
    p = sub.add_parser("corpus", help="harvest and filter event mentions")
    p.add_argument("--config", required=True)
    p.add_argument("--wikinews", action="store_true",
                   help="also harvest the configured Wikinews dumps")


def _add_split(sub):
    p = sub.add_parser("split", help="assign events to zero-shot splits")
    p.add_argument("--events", required=True, help="kbx output dir")
    p.add_argument("--mentions", default=None, help="corpus output dir")
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--fractions", default="0.8,0.1,0.1")
    p.add_argument("--out", required=True)


def _add_index(sub):
    p = sub.add_parser("index", help="build BM25 indexes over descriptions")
    p.add_argument("--config", required=True)


def _add_retrieve(sub):
    p = sub.add_parser("retrieve", help="run BM25 retrieval over mentions")
    p.add_argument("--index", required=True, help="index dir")
    p.add_argument("--mentions", required=True, help="mentions.jsonl")
    p.add_argument("--task", choices=("multilingual", "crosslingual"),
                   default="multilingual")
    p.add_argument("--window", type=int, default=16)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--meta", action="store_true",
                   help="prepend Wikinews title/date meta to the context")
    p.add_argument("--out", required=True, help="output run.jsonl")


def _add_eval(sub):
    p = sub.add_parser("eval", help="score a prediction run")
    p.add_argument("--run", required=True)
    p.add_argument("--mentions", required=True)
    p.add_argument("--compare", default=None, help="second run for meta deltas")
    p.add_argument("--task", choices=("multilingual", "crosslingual"),
                   default="multilingual")
    p.add_argument("--out", required=True)


def _add_run(sub):
    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--force", action="store_true")
    p.add_argument("--seed", type=int, default=None, help="override split seed")
    p.add_argument("--jobs", type=int, default=1)


def _add_export(sub):
    p = sub.add_parser("export", help="export the release dataset bundle")
    p.add_argument("--corpus", required=True)
    p.add_argument("--splits", required=True)
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xlel")
    sub = parser.add_subparsers(dest="command", required=True)
    for add in (_add_kbx, _add_ingest, _add_corpus, _add_split, _add_index,
                _add_retrieve, _add_eval, _add_run, _add_export):
        add(sub)
    return parser


def cmd_kbx(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    counters = Counter()
    rules = kbx.load_exclusion_rules(args.rules)
    langs = kbx.load_languages(args.langs)
    events = list(
        kbx.identify_candidate_events(
            kbx.read_wikidata_dump(args.wikidata, counters), rules, langs, counters
        )
    )
    qids = {e.qid for e in events}
    part_of = kbx.extract_part_of_edges(kbx.read_wikidata_dump(args.wikidata), qids)
    events = kbx.filter_leaf_events(events, part_of)
    qids = {e.qid for e in events}
    edges = kbx.extract_sequence_edges(kbx.read_wikidata_dump(args.wikidata), qids, counters)
    write_jsonl(out / "events.jsonl", (e.to_record() for e in events))
    write_tsv(out / "sequence_edges.tsv",
              sorted(edges, key=lambda e: (kbx.qid_sort_key(e[0]), kbx.qid_sort_key(e[1]))))
    write_tsv(out / "exclusion_rules.tsv", [(r.property, r.value) for r in rules])
    if args.pages:
        texts = {}
        wanted = {(lg, t) for e in events for lg, t in e.sitelinks.items()}
        for lang in sorted({lg for lg, _ in wanted}):
            path = Path(args.pages) / f"pages.{lang}.jsonl"
            if not path.exists():
                continue
            from .ioutils import read_jsonl

            for rec in read_jsonl(path):
                if (lang, rec["title"]) in wanted:
                    texts[(lang, rec["title"])] = rec["body"]
        descriptions = kbx.compile_descriptions(events, texts, counters)
        write_jsonl(out / "descriptions.jsonl", (d.to_record() for d in descriptions))
    _write_counters(out, counters)
    print(f"kbx: {len(events)} events, {len(edges)} sequence edges")


def cmd_ingest(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    counters = Counter()
    redirects = wikitext.build_redirect_map(args.dump, counters)
    pages = wikitext.parse_dump(args.dump, args.lang, args.kind, redirects, counters)
    suffix = "" if args.kind == "wikipedia" else ".wikinews"
    n = write_jsonl(out / f"pages.{args.lang}{suffix}.jsonl", (p.to_record() for p in pages))
    write_tsv(out / f"redirects.{args.lang}{suffix}.tsv", sorted(redirects.items()))
    _write_counters(out, counters)
    print(f"ingest: {n} pages, {len(redirects)} redirects")


def cmd_corpus(args) -> None:
    config = pipeline.load_config(args.config)
    out = Path(config.out)
    counters = Counter()
    (out / "corpus").mkdir(parents=True, exist_ok=True)
    pipeline.stage_corpus(config, out / "corpus", out / "kbx", out / "ingest", counters)
    _write_counters(out / "corpus", counters)
    print(f"corpus: {counters['corpus.mentions_kept']} mentions")


def cmd_split(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fractions = tuple(float(x) for x in args.fractions.split(","))
    if len(fractions) != 3:
        raise ConfigError("--fractions needs three comma-separated ratios")
    events_dir = Path(args.events)
    if args.mentions:
        qids = sorted(
            {m.gold_qid for m in pipeline.load_mentions(Path(args.mentions) / "mentions.jsonl")},
            key=kbx.qid_sort_key,
        )
    else:
        qids = [e.qid for e in pipeline.load_events(events_dir)]
    edges = {(a, b) for a, b in read_tsv(events_dir / "sequence_edges.tsv")}
    sequences = splits.build_sequences(qids, edges)
    assignment = splits.assign_splits(sequences, fractions, args.seed)
    rows = [
        (qid, assignment.by_qid[qid], assignment.sequence_of[qid])
        for qid in sorted(assignment.by_qid, key=kbx.qid_sort_key)
    ]
    write_tsv(out / "splits.tsv", rows)
    print(f"split: {assignment.counts()['events']}")


def cmd_index(args) -> None:
    config = pipeline.load_config(args.config)
    out = Path(config.out)
    counters = Counter()
    (out / "index").mkdir(parents=True, exist_ok=True)
    pipeline.stage_index(config, out / "index", out / "corpus", counters)
    _write_counters(out / "index", counters)
    print("index: " + ", ".join(f"{k.split('_')[-1]}={v}" for k, v in sorted(counters.items())))


def cmd_retrieve(args) -> None:
    mentions = pipeline.load_mentions(args.mentions)
    counters = Counter()
    results = pipeline.run_retrieval(
        mentions, args.index, args.task, args.window, args.k,
        use_meta=args.meta, counters=counters,
    )
    write_jsonl(args.out, (r.to_record() for r in results))
    print(f"retrieve: {len(results)} mentions -> {args.out}")


def cmd_eval(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mentions = pipeline.load_mentions(args.mentions)
    gold = {m.id: m.gold_qid for m in mentions}
    run = evalkit.load_run(args.run)
    report = evalkit.evaluate(run, gold, mentions, args.task, run_id=str(args.run))
    (out / "report.json").write_text(
        json.dumps(report.to_record(), sort_keys=True, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    write_tsv(out / "per_language.tsv", evalkit.per_language_rows(report))
    write_tsv(out / "per_bucket.tsv", evalkit.per_bucket_rows(report))
    if args.compare:
        other = evalkit.load_run(args.compare)
        delta = evalkit.wikinews_report(run, other, gold, subset_name="comparison")
        (out / "comparison.json").write_text(
            json.dumps(delta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    print(f"eval: accuracy={report.accuracy:.4f} "
          + " ".join(f"R@{k}={v:.4f}" for k, v in sorted(report.recall_at.items())))


def cmd_run(args) -> None:
    config = pipeline.load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    manifest = pipeline.run_pipeline(config, force=args.force)
    print(f"run: pipeline complete, manifest at {Path(config.out) / 'manifest.json'}")
    del manifest


def cmd_export(args) -> None:
    counts = pipeline.export_dataset(args.corpus, args.splits, args.out)
    print("export: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))


def _write_counters(out_dir: Path, counters: Counter) -> None:
    (Path(out_dir) / "manifest.json").write_text(
        json.dumps({"counters": dict(sorted(counters.items()))},
                   sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


_COMMANDS = {
    "kbx": cmd_kbx,
    "ingest": cmd_ingest,
    "corpus": cmd_corpus,
    "split": cmd_split,
    "index": cmd_index,
    "retrieve": cmd_retrieve,
    "eval": cmd_eval,
    "run": cmd_run,
    "export": cmd_export,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
