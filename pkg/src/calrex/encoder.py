"""Tokenization and a small trainable sentence encoder.

The encoder maps a token sequence to a fixed-dimension sentence vector that
the classifier head consumes. Architecture: token embedding -> position-wise
feed-forward (tanh) with a residual connection -> masked mean pooling over
the true sequence length -> tanh projection. Padding positions never reach
the pooled representation, so appending padding cannot change the output.

Backpropagation is written out by hand; tests check every parameter gradient
against central finite differences.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

PAD = "<pad>"
UNK = "<unk>"
CLS = "<cls>"
CHEMICAL_TOKEN = "@CHEMICAL$"
GENE_TOKEN = "@GENE$"
SPECIAL_TOKENS = (PAD, UNK, CLS, CHEMICAL_TOKEN, GENE_TOKEN)

# Placeholders kept atomic; words and digit runs split from punctuation.
_TOKEN_RE = re.compile(r"@CHEMICAL\$|@GENE\$|\w+|[^\w\s]")


class ShapeMismatch(ValueError):
    """Token indices, parameters, or upstream gradients disagree in shape."""


def lex(text: str) -> list[str]:
    """Split text into tokens: placeholders atomic, punctuation separate."""
    return _TOKEN_RE.findall(text)


@dataclass(frozen=True)
class Vocabulary:
    """Dense token-to-index map with the special tokens always present."""

    tokens: tuple[str, ...]
    index: dict[str, int]

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def pad_index(self) -> int:
        return self.index[PAD]

    @property
    def unk_index(self) -> int:
        return self.index[UNK]

    def lookup(self, token: str) -> int:
        return self.index.get(token, self.index[UNK])


def build_vocab(texts, min_freq: int = 1) -> Vocabulary:
    """Build a vocabulary from an iterable of raw sentence strings.

    Tokens occurring fewer than `min_freq` times map to UNK. Ordering is
    deterministic: special tokens first, then by descending frequency with
    lexicographic tie-break.
    """
    counts: dict[str, int] = {}
    for text in texts:
        for tok in lex(text):
            counts[tok] = counts.get(tok, 0) + 1
    kept = sorted(
        (tok for tok, c in counts.items() if c >= min_freq and tok not in SPECIAL_TOKENS),
        key=lambda tok: (-counts[tok], tok),
    )
    tokens = tuple(SPECIAL_TOKENS) + tuple(kept)
    return Vocabulary(tokens, {tok: i for i, tok in enumerate(tokens)})


@dataclass(frozen=True)
class TokenSequence:
    """Vocabulary indices for one sentence, CLS first, truncated to max_len."""

    indices: np.ndarray

    @property
    def true_length(self) -> int:
        return int(self.indices.size)


def tokenize(text: str, vocab: Vocabulary, max_len: int = 200) -> TokenSequence:
    """Tokenize and index a sentence, prepending CLS and truncating.

    The result, including the CLS token, never exceeds max_len indices.
    Unknown tokens map to UNK.
    """
    toks = lex(text)[: max_len - 1]
    idx = np.fromiter(
        (vocab.index[CLS], *(vocab.lookup(t) for t in toks)),
        dtype=np.int64,
        count=len(toks) + 1,
    )
    return TokenSequence(idx)


@dataclass
class EncoderParams:
    """Trainable encoder tensors. `dim` is both embedding and feature size."""

    embed: np.ndarray  # (vocab, dim)
    w1: np.ndarray  # (dim, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, dim)
    b2: np.ndarray  # (dim,)
    w_out: np.ndarray  # (dim, dim)
    b_out: np.ndarray  # (dim,)

    @property
    def dim(self) -> int:
        return self.embed.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[1]

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "embed": self.embed,
            "w1": self.w1,
            "b1": self.b1,
            "w2": self.w2,
            "b2": self.b2,
            "w_out": self.w_out,
            "b_out": self.b_out,
        }

    def check(self) -> None:
        d, h = self.dim, self.hidden_dim
        shapes = {
            "w1": (d, h),
            "b1": (h,),
            "w2": (h, d),
            "b2": (d,),
            "w_out": (d, d),
            "b_out": (d,),
        }
        for name, want in shapes.items():
            got = getattr(self, name).shape
            if got != want:
                raise ShapeMismatch(f"{name}: expected shape {want}, got {got}")
        for name, t in self.tensors().items():
            if not np.all(np.isfinite(t)):
                raise ValueError(f"non-finite values in encoder tensor {name}")


def init_encoder_params(vocab_size: int, dim: int, hidden_dim: int, rng) -> EncoderParams:
    """Random initialization, scaled by fan-in; padding row zeroed."""
    embed = rng.normal(0.0, 0.1, size=(vocab_size, dim))
    embed[0] = 0.0
    return EncoderParams(
        embed=embed,
        w1=rng.normal(0.0, 1.0 / np.sqrt(dim), size=(dim, hidden_dim)),
        b1=np.zeros(hidden_dim),
        w2=rng.normal(0.0, 1.0 / np.sqrt(hidden_dim), size=(hidden_dim, dim)),
        b2=np.zeros(dim),
        w_out=rng.normal(0.0, 1.0 / np.sqrt(dim), size=(dim, dim)),
        b_out=np.zeros(dim),
    )


def zeros_like_params(params: EncoderParams) -> EncoderParams:
    return EncoderParams(**{k: np.zeros_like(v) for k, v in params.tensors().items()})


def pad_batch(seqs, pad_index: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack TokenSequences into (indices, mask, lengths) arrays."""
    lengths = np.array([s.true_length for s in seqs], dtype=np.int64)
    max_len = int(lengths.max()) if len(seqs) else 0
    x = np.full((len(seqs), max_len), pad_index, dtype=np.int64)
    mask = np.zeros((len(seqs), max_len))
    for i, s in enumerate(seqs):
        x[i, : s.true_length] = s.indices
        mask[i, : s.true_length] = 1.0
    return x, mask, lengths


@dataclass
class _ForwardCache:
    x: np.ndarray
    mask: np.ndarray
    lengths: np.ndarray
    emb: np.ndarray
    hidden: np.ndarray
    pooled: np.ndarray
    features: np.ndarray


def _forward(x, mask, lengths, params: EncoderParams) -> _ForwardCache:
    if x.ndim != 2:
        raise ShapeMismatch(f"token index array must be 2-d, got shape {x.shape}")
    if int(x.max(initial=0)) >= params.embed.shape[0]:
        raise ShapeMismatch("token index exceeds embedding table size")
    emb = params.embed[x]
    hidden = np.tanh(emb @ params.w1 + params.b1)
    mixed = hidden @ params.w2 + params.b2 + emb
    pooled = (mixed * mask[:, :, None]).sum(axis=1) / lengths[:, None]
    features = np.tanh(pooled @ params.w_out + params.b_out)
    return _ForwardCache(x, mask, lengths, emb, hidden, pooled, features)


def encode_batch(seqs, params: EncoderParams) -> np.ndarray:
    """Encode a list of TokenSequences into an (n, dim) feature matrix."""
    if not seqs:
        return np.zeros((0, params.dim))
    x, mask, lengths = pad_batch(seqs)
    return _forward(x, mask, lengths, params).features


def encode(seq: TokenSequence, params: EncoderParams) -> np.ndarray:
    """Encode one sequence into its sentence feature vector."""
    return encode_batch([seq], params)[0]


def _backward(cache: _ForwardCache, params: EncoderParams, upstream: np.ndarray) -> EncoderParams:
    if upstream.shape != cache.features.shape:
        raise ShapeMismatch(
            f"upstream gradient shape {upstream.shape} does not match "
            f"features shape {cache.features.shape}"
        )
    grads = zeros_like_params(params)
    d_proj = upstream * (1.0 - cache.features**2)
    grads.w_out[:] = cache.pooled.T @ d_proj
    grads.b_out[:] = d_proj.sum(axis=0)
    d_pooled = d_proj @ params.w_out.T
    # Masked positions got zero pooling weight, so they get zero gradient.
    d_mixed = (d_pooled / cache.lengths[:, None])[:, None, :] * cache.mask[:, :, None]
    d = params.dim
    h = params.hidden_dim
    flat_mixed = d_mixed.reshape(-1, d)
    flat_hidden = cache.hidden.reshape(-1, h)
    flat_emb = cache.emb.reshape(-1, d)
    grads.w2[:] = flat_hidden.T @ flat_mixed
    grads.b2[:] = flat_mixed.sum(axis=0)
    d_hidden = d_mixed @ params.w2.T
    d_pre = d_hidden * (1.0 - cache.hidden**2)
    flat_pre = d_pre.reshape(-1, h)
    grads.w1[:] = flat_emb.T @ flat_pre
    grads.b1[:] = flat_pre.sum(axis=0)
    d_emb = d_pre @ params.w1.T + d_mixed
    np.add.at(grads.embed, cache.x, d_emb)
    return grads


def encode_backward(seqs, params: EncoderParams, upstream: np.ndarray) -> EncoderParams:
    """Gradients of sum(features * upstream) with respect to all parameters.

    `seqs` may be a single TokenSequence (with a 1-d upstream) or a list
    (with a matching 2-d upstream).
    """
    if isinstance(seqs, TokenSequence):
        seqs = [seqs]
        upstream = np.asarray(upstream)[None, :]
    x, mask, lengths = pad_batch(seqs)
    cache = _forward(x, mask, lengths, params)
    return _backward(cache, params, np.asarray(upstream, dtype=np.float64))
