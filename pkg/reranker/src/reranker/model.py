"""Miniature transformer encoder, biencoder scoring, crossencoder head."""

import torch
from torch import nn


class TinyEncoder(nn.Module):
    """Token + position embeddings, a small transformer stack, and the
    final-layer representation at the first position as the output."""

    def __init__(self, vocab_size: int, d_model: int = 32, n_heads: int = 2,
                 n_layers: int = 2, max_len: int = 256, pad_id: int = 0,
                 dtype=torch.float32):
        super().__init__()
        self.pad_id = pad_id
        self.max_len = max_len
        self.d_model = d_model
        self.token_emb = nn.Embedding(vocab_size, d_model, padding_idx=pad_id, dtype=dtype)
        self.pos_emb = nn.Embedding(max_len, d_model, dtype=dtype)
        layer = nn.TransformerEncoderLayer(
            d_model=d_model, nhead=n_heads, dim_feedforward=2 * d_model,
            dropout=0.0, batch_first=True, norm_first=True, dtype=dtype,
        )
        self.layers = nn.TransformerEncoder(layer, num_layers=n_layers,
                                            enable_nested_tensor=False)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        """ids: [batch, seq] padded with pad_id; returns [batch, d_model]."""
        if ids.size(1) > self.max_len:
            ids = ids[:, : self.max_len]
        positions = torch.arange(ids.size(1), device=ids.device)
        x = self.token_emb(ids) + self.pos_emb(positions)
        pad_mask = ids.eq(self.pad_id)
        x = self.layers(x, src_key_padding_mask=pad_mask)
        return x[:, 0]


class BiEncoder(nn.Module):
    """Separate context/candidate encoders scored by a dot product of the
    first-position embeddings."""

    def __init__(self, vocab_size: int, d_model: int = 32, n_heads: int = 2,
                 n_layers: int = 2, max_len: int = 128, pad_id: int = 0,
                 dtype=torch.float32):
        super().__init__()
        self.context_encoder = TinyEncoder(vocab_size, d_model, n_heads,
                                           n_layers, max_len, pad_id, dtype)
        self.candidate_encoder = TinyEncoder(vocab_size, d_model, n_heads,
                                             n_layers, max_len, pad_id, dtype)

    def encode_contexts(self, ids: torch.Tensor) -> torch.Tensor:
        return self.context_encoder(ids)

    def encode_candidates(self, ids: torch.Tensor) -> torch.Tensor:
        return self.candidate_encoder(ids)

    @staticmethod
    def score_matrix(ctx: torch.Tensor, cand: torch.Tensor) -> torch.Tensor:
        """All-pairs dot products: [n_contexts, n_candidates]."""
        if ctx.size(-1) != cand.size(-1):
            raise ValueError(
                f"embedding dimension mismatch: {ctx.size(-1)} vs {cand.size(-1)}"
            )
        return ctx @ cand.T

    @classmethod
    def score_pairs(cls, ctx: torch.Tensor, cand: torch.Tensor) -> torch.Tensor:
        """Aligned per-pair dot products: [n]."""
        if ctx.shape != cand.shape:
            raise ValueError(f"pair shape mismatch: {ctx.shape} vs {cand.shape}")
        return (ctx * cand).sum(dim=-1)


def in_batch_loss(scores: torch.Tensor, reduction: str = "mean") -> torch.Tensor:
    """Softmax cross-entropy over a square score matrix with the batch's own
    gold candidates on the diagonal (in-batch random negatives)."""
    if scores.dim() != 2 or scores.size(0) != scores.size(1):
        raise ValueError(f"expected a square score matrix, got {tuple(scores.shape)}")
    if scores.size(0) < 2:
        raise ValueError("in-batch negatives need batch size >= 2")
    targets = torch.arange(scores.size(0), device=scores.device)
    return nn.functional.cross_entropy(scores, targets, reduction=reduction)


class CrossEncoder(nn.Module):
    """Joint context-candidate encoder with a scalar scoring head."""

    def __init__(self, vocab_size: int, d_model: int = 32, n_heads: int = 2,
                 n_layers: int = 2, max_len: int = 256, pad_id: int = 0):
        super().__init__()
        self.encoder = TinyEncoder(vocab_size, d_model, n_heads, n_layers,
                                   max_len, pad_id)
        self.head = nn.Linear(d_model, 1)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        """ids: [n_candidates, seq] for one mention; returns [n_candidates]."""
        return self.head(self.encoder(ids)).squeeze(-1)


def pad_batch(sequences, pad_id: int = 0) -> torch.Tensor:
    """List of id lists -> LongTensor [batch, max_len] padded with pad_id."""
    width = max(len(s) for s in sequences)
    out = torch.full((len(sequences), width), pad_id, dtype=torch.long)
    for row, seq in enumerate(sequences):
        out[row, : len(seq)] = torch.tensor(seq, dtype=torch.long)
    return out
