"""Training loops and inference for the biencoder and crossencoder."""

import random
from dataclasses import asdict, dataclass, field

import torch

from . import templates
from .data import atomic_save, candidate_pools, pool_for, run_record
from .model import BiEncoder, CrossEncoder, in_batch_loss, pad_batch
from .vocab import Vocab, build_vocab


@dataclass
class TrainConfig:
    epochs: int = 5
    lr: float = 1e-5
    batch_size: int = 8
    warmup: float = 0.1  # fraction of total steps
    seed: int = 0
    d_model: int = 32
    n_heads: int = 2
    n_layers: int = 2
    max_context_tokens: int = 128
    max_candidate_tokens: int = 128
    max_pair_tokens: int = 256
    use_meta: bool = False


@dataclass
class TrainLog:
    config: dict
    epochs: list = field(default_factory=list)
    best_epoch: int = -1
    best_metric: float = 0.0
    skipped: int = 0


def encode_mention(mention: dict, vocab: Vocab, config: TrainConfig) -> list:
    toks = templates.context_tokens(mention, config.max_context_tokens,
                                    config.use_meta)
    return vocab.encode(toks)


def encode_candidate(candidate: dict, vocab: Vocab, config: TrainConfig) -> list:
    toks = templates.candidate_tokens(candidate["title"],
                                      candidate["description"],
                                      config.max_candidate_tokens)
    return vocab.encode(toks)


def _candidate_index(candidates) -> dict:
    return {(c["qid"], c["language"]): c for c in candidates}


def _gold_candidate(mention: dict, cand_index: dict, task: str):
    lang = "en" if task == "crosslingual" else mention["language"]
    return cand_index.get((mention["gold_qid"], lang))


def _scheduler(optimizer, total_steps: int, warmup_frac: float):
    warmup = max(1, int(total_steps * warmup_frac))

    def factor(step):
        if step < warmup:
            return (step + 1) / warmup
        remaining = max(1, total_steps - warmup)
        return max(0.0, (total_steps - step) / remaining)

    return torch.optim.lr_scheduler.LambdaLR(optimizer, factor)


@torch.no_grad()
def embed_pool(model: BiEncoder, pool, vocab: Vocab, config: TrainConfig,
               batch_size: int = 64) -> torch.Tensor:
    model.eval()
    chunks = []
    for i in range(0, len(pool), batch_size):
        ids = pad_batch([encode_candidate(c, vocab, config)
                         for c in pool[i : i + batch_size]], vocab.pad_id)
        chunks.append(model.encode_candidates(ids))
    return torch.cat(chunks)


@torch.no_grad()
def retrieve_dense(model: BiEncoder, vocab: Vocab, mentions, candidates,
                   task: str = "multilingual", k: int = 8,
                   config: TrainConfig | None = None) -> list:
    """Exact top-k by dot product against the precomputed pool embeddings."""
    config = config or TrainConfig()
    model.eval()
    pools = candidate_pools(candidates, task)
    pool_embs = {lang: embed_pool(model, pool, vocab, config)
                 for lang, pool in pools.items()}
    results = []
    for m in sorted(mentions, key=lambda m: m["id"]):
        pool = pool_for(m, pools, task)
        if not pool:
            results.append(run_record(m["id"], [], k))
            continue
        lang = "en" if task == "crosslingual" else m["language"]
        ctx = model.encode_contexts(
            pad_batch([encode_mention(m, vocab, config)], vocab.pad_id)
        )
        scores = BiEncoder.score_matrix(ctx, pool_embs[lang])[0]
        top = min(k, len(pool))
        values, indices = torch.topk(scores, top)
        ranked = [(pool[i]["qid"], float(v)) for v, i in zip(values, indices)]
        results.append(run_record(m["id"], ranked, k))
    return results


def _recall_at_1(run_records, mentions) -> float:
    gold = {m["id"]: m["gold_qid"] for m in mentions}
    if not gold:
        return 0.0
    hits = sum(
        1 for r in run_records
        if r["ranked"] and r["ranked"][0][0] == gold.get(r["mention_id"])
    )
    return hits / len(gold)


def train_biencoder(train_mentions, dev_mentions, candidates,
                    task: str = "multilingual",
                    config: TrainConfig | None = None,
                    vocab: Vocab | None = None):
    """In-batch-negative training; returns (model, vocab, log) with the
    best-dev-Recall@1 epoch's weights restored."""
    config = config or TrainConfig()
    if config.batch_size < 2:
        raise ValueError("batch size 1 leaves no in-batch negatives")
    vocab = vocab or build_vocab(train_mentions + dev_mentions, candidates)
    cand_index = _candidate_index(candidates)
    examples = []
    skipped = 0
    for m in train_mentions:
        gold = _gold_candidate(m, cand_index, task)
        if gold is None:
            skipped += 1
            continue
        examples.append((encode_mention(m, vocab, config),
                         encode_candidate(gold, vocab, config)))
    if not examples:
        raise ValueError("no trainable mentions: gold candidates missing")

    torch.manual_seed(config.seed)
    model = BiEncoder(len(vocab), config.d_model, config.n_heads,
                      config.n_layers, config.max_context_tokens, vocab.pad_id)
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.lr)
    steps_per_epoch = max(1, len(examples) // config.batch_size)
    scheduler = _scheduler(optimizer, config.epochs * steps_per_epoch, config.warmup)
    rng = random.Random(config.seed)

    log = TrainLog(config=asdict(config), skipped=skipped)
    best_state = None
    for epoch in range(config.epochs):
        model.train()
        rng.shuffle(examples)
        total_loss = 0.0
        n_batches = 0
        for i in range(0, len(examples), config.batch_size):
            batch = examples[i : i + config.batch_size]
            if len(batch) < 2:
                continue  # a trailing singleton has no negatives
            ctx_ids = pad_batch([b[0] for b in batch], vocab.pad_id)
            cand_ids = pad_batch([b[1] for b in batch], vocab.pad_id)
            scores = BiEncoder.score_matrix(
                model.encode_contexts(ctx_ids),
                model.encode_candidates(cand_ids),
            )
            loss = in_batch_loss(scores)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            scheduler.step()
            total_loss += float(loss.detach())
            n_batches += 1
        run = retrieve_dense(model, vocab, dev_mentions, candidates, task,
                             k=1, config=config)
        dev_r1 = _recall_at_1(run, dev_mentions)
        log.epochs.append({
            "epoch": epoch,
            "loss": total_loss / max(1, n_batches),
            "dev_recall_at_1": dev_r1,
            "lr": scheduler.get_last_lr()[0],
        })
        if dev_r1 >= log.best_metric or best_state is None:
            log.best_metric = dev_r1
            log.best_epoch = epoch
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
    model.load_state_dict(best_state)
    return model, vocab, log


def train_crossencoder(run_records, mentions, candidates,
                       task: str = "multilingual",
                       config: TrainConfig | None = None,
                       vocab: Vocab | None = None):
    """Softmax over each mention's retrieved top-k; trains only on mentions
    whose gold event was retrieved."""
    config = config or TrainConfig()
    vocab = vocab or build_vocab(mentions, candidates)
    cand_index = _candidate_index(candidates)
    by_id = {m["id"]: m for m in mentions}
    run_by_id = {r["mention_id"]: r for r in run_records}

    instances = []
    skipped = 0
    for mid, m in by_id.items():
        rec = run_by_id.get(mid)
        if rec is None:
            skipped += 1
            continue
        qids = [qid for qid, _ in rec["ranked"]]
        if m["gold_qid"] not in qids:
            skipped += 1
            continue
        lang = "en" if task == "crosslingual" else m["language"]
        cands = [cand_index.get((qid, lang)) for qid in qids]
        if any(c is None for c in cands):
            skipped += 1
            continue
        ids = [vocab.encode(templates.pair_tokens(
            m, c["title"], c["description"], config.max_pair_tokens,
            config.use_meta)) for c in cands]
        instances.append((ids, qids.index(m["gold_qid"])))
    if not instances:
        raise ValueError("no trainable mentions: gold never retrieved")

    torch.manual_seed(config.seed)
    model = CrossEncoder(len(vocab), config.d_model, config.n_heads,
                         config.n_layers, config.max_pair_tokens, vocab.pad_id)
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.lr)
    scheduler = _scheduler(optimizer, config.epochs * len(instances), config.warmup)
    rng = random.Random(config.seed)
    ce = torch.nn.CrossEntropyLoss()

    log = TrainLog(config=asdict(config), skipped=skipped)
    best_state = None
    for epoch in range(config.epochs):
        model.train()
        rng.shuffle(instances)
        total_loss = 0.0
        correct = 0
        for ids, target in instances:
            logits = model(pad_batch(ids, vocab.pad_id))
            loss = ce(logits.unsqueeze(0),
                      torch.tensor([target], dtype=torch.long))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            scheduler.step()
            total_loss += float(loss.detach())
            correct += int(int(logits.argmax()) == target)
        acc = correct / len(instances)
        log.epochs.append({
            "epoch": epoch,
            "loss": total_loss / len(instances),
            "train_accuracy": acc,
            "lr": scheduler.get_last_lr()[0],
        })
        if acc >= log.best_metric or best_state is None:
            log.best_metric = acc
            log.best_epoch = epoch
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
    model.load_state_dict(best_state)
    return model, vocab, log


@torch.no_grad()
def rerank(model: CrossEncoder, vocab: Vocab, run_records, mentions,
           candidates, task: str = "multilingual",
           config: TrainConfig | None = None) -> list:
    """Re-score each retrieved candidate list; the output ranking is a
    permutation of the input candidates (no new candidates appear)."""
    config = config or TrainConfig()
    model.eval()
    cand_index = _candidate_index(candidates)
    by_id = {m["id"]: m for m in mentions}
    out = []
    for rec in run_records:
        m = by_id.get(rec["mention_id"])
        qids = [qid for qid, _ in rec["ranked"]]
        if m is None or not qids:
            out.append(rec)
            continue
        lang = "en" if task == "crosslingual" else m["language"]
        cands = [cand_index.get((qid, lang)) for qid in qids]
        if any(c is None for c in cands):
            out.append(rec)
            continue
        ids = [vocab.encode(templates.pair_tokens(
            m, c["title"], c["description"], config.max_pair_tokens,
            config.use_meta)) for c in cands]
        logits = model(pad_batch(ids, vocab.pad_id))
        order = torch.argsort(logits, descending=True)
        ranked = [(qids[i], float(logits[i])) for i in order]
        out.append(run_record(rec["mention_id"], ranked, rec["k"]))
    return out


def save_checkpoint(model, vocab: Vocab, config: TrainConfig, log: TrainLog,
                    path) -> None:
    payload = {
        "kind": type(model).__name__,
        "state_dict": model.state_dict(),
        "vocab": vocab.token_to_id,
        "config": asdict(config),
        "log": asdict(log),
    }
    atomic_save(lambda tmp: torch.save(payload, tmp), path)


def load_checkpoint(path):
    payload = torch.load(path, weights_only=False)
    vocab = Vocab()
    vocab.token_to_id = payload["vocab"]
    vocab.id_to_token = {i: t for t, i in vocab.token_to_id.items()}
    config = TrainConfig(**payload["config"])
    cls = {"BiEncoder": BiEncoder, "CrossEncoder": CrossEncoder}[payload["kind"]]
    max_len = (config.max_pair_tokens if cls is CrossEncoder
               else config.max_context_tokens)
    model = cls(len(vocab), config.d_model, config.n_heads, config.n_layers,
                max_len, vocab.pad_id)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, vocab, config, payload.get("log")
