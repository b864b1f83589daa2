"""Embedding machinery and concatenation fusion.

Channels available to the task models: a trainable word table, a
character CNN with max-pooling, a frozen contextual embedder (hash
fallback, file cache, or plain word-table adapter), a trainable tag
table over any closed tag vocabulary, and a two-row predicate indicator
table. Fusion is plain concatenation; the fused width is always the
exact sum of the active channel widths.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .bio import TagAlphabet

UNK_TOKEN = "<unk>"

CONTEXT_CACHE_MAGIC = "#ctxcache"
CONTEXT_CACHE_VERSION = 1


def fuse(word_vecs, tag_vecs):
    """Concatenate per-token word vectors with per-token tag vectors.

    Accepts numpy arrays or torch tensors of shape [n, d]; lengths must
    agree. Returns the same kind as the inputs (torch wins on a mix).
    """
    use_torch = torch.is_tensor(word_vecs) or torch.is_tensor(tag_vecs)
    if use_torch:
        word_vecs = torch.as_tensor(word_vecs)
        tag_vecs = torch.as_tensor(tag_vecs)
    else:
        word_vecs = np.asarray(word_vecs, dtype=np.float64)
        tag_vecs = np.asarray(tag_vecs, dtype=np.float64)
    if word_vecs.ndim != 2 or tag_vecs.ndim != 2:
        raise ValueError("fuse expects [n, d] matrices")
    if word_vecs.shape[0] != tag_vecs.shape[0]:
        raise ValueError(f"length mismatch: {word_vecs.shape[0]} word rows vs {tag_vecs.shape[0]} tag rows")
    if use_torch:
        return torch.cat([word_vecs, tag_vecs], dim=-1)
    return np.concatenate([word_vecs, tag_vecs], axis=-1)


class WordEmbeddingTable:
    """Static word vectors with a dedicated unknown-word row."""

    def __init__(self, vocab: dict[str, int], vectors: np.ndarray):
        vectors = np.asarray(vectors, dtype=np.float32)
        if vectors.ndim != 2 or vectors.shape[1] == 0:
            raise ValueError("vectors must be [vocab, dim] with dim > 0")
        if sorted(vocab.values()) != list(range(len(vocab))):
            raise ValueError("vocab ids must be a contiguous bijection")
        if len(vocab) != vectors.shape[0]:
            raise ValueError(f"{len(vocab)} vocab entries but {vectors.shape[0]} vector rows")
        if UNK_TOKEN not in vocab:
            raise ValueError(f"vocab must contain the {UNK_TOKEN} row")
        self.vocab = dict(vocab)
        self.vectors = vectors

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.vocab)

    @classmethod
    def build(cls, tokens: Sequence[str], dim: int, seed: int = 0) -> "WordEmbeddingTable":
        """Random table over the distinct tokens (sorted for determinism)."""
        words = [UNK_TOKEN] + sorted(set(tokens) - {UNK_TOKEN})
        rng = np.random.Generator(np.random.PCG64(seed))
        vectors = rng.uniform(-0.1, 0.1, size=(len(words), dim)).astype(np.float32)
        return cls({w: i for i, w in enumerate(words)}, vectors)

    def id_of(self, token: str) -> int:
        return self.vocab.get(token, self.vocab[UNK_TOKEN])

    def lookup(self, tokens: Sequence[str]) -> np.ndarray:
        ids = [self.id_of(t) for t in tokens]
        return self.vectors[ids] if ids else np.zeros((0, self.dim), dtype=np.float32)

    def save_text(self, path) -> None:
        """One token per line followed by its floats."""
        order = sorted(self.vocab, key=self.vocab.get)
        with open(path, "w", encoding="utf-8") as fh:
            for word in order:
                values = " ".join(repr(float(v)) for v in self.vectors[self.vocab[word]])
                fh.write(f"{word} {values}\n")

    @classmethod
    def load_text(cls, path) -> "WordEmbeddingTable":
        vocab: dict[str, int] = {}
        rows: list[list[float]] = []
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                parts = line.rstrip("\n").split(" ")
                if len(parts) < 2:
                    raise ValueError(f"{path}:{line_no}: expected 'token floats...'")
                word, values = parts[0], [float(v) for v in parts[1:]]
                if rows and len(values) != len(rows[0]):
                    raise ValueError(f"{path}:{line_no}: inconsistent vector width")
                if word in vocab:
                    raise ValueError(f"{path}:{line_no}: duplicate token {word!r}")
                vocab[word] = len(rows)
                rows.append(values)
        vectors = np.asarray(rows, dtype=np.float32)
        if UNK_TOKEN not in vocab:
            # Files exported from standard vector dumps rarely carry an
            # unknown row; synthesize one as the mean vector.
            vocab[UNK_TOKEN] = len(rows)
            vectors = np.vstack([vectors, vectors.mean(axis=0, keepdims=True)])
        return cls(vocab, vectors)


class TagEmbeddingTable(nn.Module):
    """Trainable lookup table over a closed tag vocabulary.

    Rows start uniform in [-0.1, 0.1] and train jointly with the
    downstream model. Initialization draws from a private generator so
    adding or removing the tag channel cannot perturb any other
    channel's weights. ``lookup_count`` counts forward calls so ablation
    tests can prove the table was never read.
    """

    def __init__(self, tags: Sequence[str], dim: int = 5, init_seed: int = 0):
        super().__init__()
        tags = [str(t) for t in tags]
        if dim <= 0:
            raise ValueError("tag embedding dim must be positive")
        if len(set(tags)) != len(tags):
            raise ValueError("duplicate tags in vocabulary")
        if not tags:
            raise ValueError("tag vocabulary is empty")
        self.tags = tuple(tags)
        self._ids = {t: i for i, t in enumerate(self.tags)}
        generator = torch.Generator().manual_seed(init_seed)
        weight = torch.empty(len(tags), dim)
        weight.uniform_(-0.1, 0.1, generator=generator)
        self.weight = nn.Parameter(weight)
        self.lookup_count = 0

    @classmethod
    def for_alphabet(cls, alphabet: TagAlphabet, dim: int = 5, init_seed: int = 0) -> "TagEmbeddingTable":
        return cls([str(t) for t in alphabet.tags], dim, init_seed=init_seed)

    @property
    def dim(self) -> int:
        return self.weight.shape[1]

    def ids(self, tags: Sequence) -> torch.Tensor:
        try:
            return torch.tensor([self._ids[str(t)] for t in tags], dtype=torch.long)
        except KeyError as exc:
            raise KeyError(f"tag {exc.args[0]!r} not in the closed vocabulary") from None

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        self.lookup_count += 1
        return F.embedding(ids, self.weight)

    def embed_tags(self, tags: Sequence) -> torch.Tensor:
        return self(self.ids(tags))


class PredicateIndicatorEmbedding(nn.Module):
    """Two learned rows distinguishing predicate from non-predicate tokens."""

    def __init__(self, dim: int = 8):
        super().__init__()
        if dim <= 0:
            raise ValueError("indicator embedding dim must be positive")
        self.weight = nn.Parameter(torch.empty(2, dim).uniform_(-0.1, 0.1))

    @property
    def dim(self) -> int:
        return self.weight.shape[1]

    def forward(self, flags: Sequence[bool] | torch.Tensor) -> torch.Tensor:
        ids = torch.as_tensor(flags).long()
        return F.embedding(ids, self.weight)


class ContextualEmbedder(Protocol):
    """Per-token context-sensitive vectors, frozen at task-training time."""

    dim: int

    def embed(self, tokens: Sequence[str]) -> np.ndarray: ...


def sentence_key(tokens: Sequence[str]) -> str:
    """Stable hex key for a token sequence (cache file lookups)."""
    joined = "\x1f".join(tokens)
    return hashlib.blake2b(joined.encode("utf-8"), digest_size=12).hexdigest()


class HashContextualEmbedder:
    """Deterministic pseudo-random contextual vectors.

    Each position's vector is derived from a seeded hash of the token
    and its neighbor window, so identical sentences map to identical
    matrices while the same token in different contexts gets different
    vectors. A stand-in for pretrained contextual models at desk scale.
    """

    def __init__(self, dim: int = 64, window: int = 1, seed: int = 0):
        if dim <= 0:
            raise ValueError("contextual dim must be positive")
        self.dim = dim
        self.window = window
        self.seed = seed

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(tokens), self.dim), dtype=np.float32)
        padded = ["<s>"] * self.window + list(tokens) + ["</s>"] * self.window
        for i in range(len(tokens)):
            context = padded[i : i + 2 * self.window + 1]
            key = f"{self.seed}|{self.window}|" + "\x1f".join(context)
            digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
            rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "big")))
            out[i] = rng.standard_normal(self.dim) / np.sqrt(self.dim)
        return out


class WordTableContextual:
    """Context-independent adapter: plain word-table rows as e_ctx."""

    def __init__(self, table: WordEmbeddingTable):
        self.table = table
        self.dim = table.dim

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        return self.table.lookup(tokens)


def save_context_cache(path, sentences: Sequence[Sequence[str]], vectors: Sequence[np.ndarray],
                       subword_spans: Sequence[Sequence[tuple[int, int]]] | None = None) -> None:
    """Write precomputed contextual vectors keyed by sentence hash.

    ``subword_spans``, when given, maps each word to its subunit row
    range in that sentence's matrix; the first subunit's vector is
    stored for the word.
    """
    if len(sentences) != len(vectors):
        raise ValueError("one vector matrix per sentence required")
    dims = {np.asarray(v).shape[1] for v in vectors}
    if len(dims) != 1:
        raise ValueError(f"inconsistent vector widths: {sorted(dims)}")
    dim = dims.pop()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{CONTEXT_CACHE_MAGIC} v{CONTEXT_CACHE_VERSION} dim={dim}\n")
        for idx, (tokens, matrix) in enumerate(zip(sentences, vectors)):
            matrix = np.asarray(matrix, dtype=np.float32)
            if subword_spans is not None:
                spans = subword_spans[idx]
                if len(spans) != len(tokens):
                    raise ValueError(f"sentence {idx}: {len(spans)} spans for {len(tokens)} words")
                matrix = matrix[[s[0] for s in spans]]
            elif matrix.shape[0] != len(tokens):
                raise ValueError(f"sentence {idx}: {matrix.shape[0]} rows for {len(tokens)} words")
            record = {"key": sentence_key(tokens), "vectors": [[float(x) for x in row] for row in matrix]}
            fh.write(json.dumps(record, sort_keys=True) + "\n")


class CachedContextualEmbedder:
    """Contextual vectors loaded from a cache file written offline."""

    def __init__(self, path):
        self.path = str(path)
        self._table: dict[str, np.ndarray] = {}
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip()
            parts = header.split()
            if len(parts) != 3 or parts[0] != CONTEXT_CACHE_MAGIC:
                raise ValueError(f"{path}: not a contextual cache file")
            if parts[1] != f"v{CONTEXT_CACHE_VERSION}":
                raise ValueError(f"{path}: unsupported cache version {parts[1]}")
            self.dim = int(parts[2].removeprefix("dim="))
            for line_no, line in enumerate(fh, 2):
                if not line.strip():
                    continue
                record = json.loads(line)
                matrix = np.asarray(record["vectors"], dtype=np.float32)
                if matrix.size and matrix.shape[1] != self.dim:
                    raise ValueError(f"{path}:{line_no}: width {matrix.shape[1]} != header dim {self.dim}")
                self._table[record["key"]] = matrix

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        key = sentence_key(tokens)
        if key not in self._table:
            raise KeyError(f"sentence {' '.join(tokens)!r} not present in cache {self.path}")
        matrix = self._table[key]
        if matrix.shape[0] != len(tokens):
            raise ValueError(f"cache row count {matrix.shape[0]} != sentence length {len(tokens)}")
        return matrix


class CharCnnEmbedder(nn.Module):
    """Per-token character convolution followed by max-pooling.

    Words shorter than the kernel are padded with the pad character, so
    every token yields at least one pooled position.
    """

    PAD, UNK = 0, 1

    def __init__(self, out_dim: int = 24, char_dim: int = 16, kernel: int = 3):
        super().__init__()
        if out_dim <= 0 or char_dim <= 0 or kernel <= 0:
            raise ValueError("char CNN dims must be positive")
        self.kernel = kernel
        self.embed = nn.Embedding(2 + 95, char_dim, padding_idx=self.PAD)  # printable ASCII
        self.conv = nn.Conv1d(char_dim, out_dim, kernel)

    @property
    def dim(self) -> int:
        return self.conv.out_channels

    def _char_ids(self, token: str) -> list[int]:
        ids = [ord(c) - 32 + 2 if 32 <= ord(c) < 127 else self.UNK for c in token]
        while len(ids) < self.kernel:
            ids.append(self.PAD)
        return ids

    def convolved(self, token: str) -> torch.Tensor:
        """Pre-pooling feature matrix [positions, out_dim] for one token."""
        ids = torch.tensor(self._char_ids(token), dtype=torch.long)
        chars = self.embed(ids).T.unsqueeze(0)
        return torch.relu(self.conv(chars)).squeeze(0).T

    @staticmethod
    def pool(features: torch.Tensor) -> torch.Tensor:
        return features.max(dim=0).values

    def forward(self, tokens: Sequence[str]) -> torch.Tensor:
        if not tokens:
            return torch.zeros(0, self.dim)
        return torch.stack([self.pool(self.convolved(t)) for t in tokens])


@dataclass
class TagProvider:
    """A tag source: its name, closed vocabulary, and tagging function."""

    name: str
    vocabulary: tuple[str, ...]
    tag: Callable[[Sequence[str]], list[str]]


class TokenEmbedder(nn.Module):
    """Concatenates the configured channels into one vector per token.

    Channel order is fixed: word, characters, contextual, tags. The tag
    table is always constructed by the caller and passed in, so turning
    the tag channel off cannot perturb the other channels'
    initialization. With ``use_tags`` false a supplied table is parked
    outside the module tree and never read.
    """

    def __init__(self, *, word_vocab: Sequence[str] | None = None, word_dim: int = 0,
                 char_dim: int = 0, context_dim: int = 0,
                 tag_table: TagEmbeddingTable | None = None, use_tags: bool = True):
        super().__init__()
        if word_dim > 0 and not word_vocab:
            raise ValueError("word channel requires a vocabulary")
        self.word_vocab = {}
        self.word_embed = None
        if word_dim > 0:
            words = [UNK_TOKEN] + sorted(set(word_vocab) - {UNK_TOKEN})
            self.word_vocab = {w: i for i, w in enumerate(words)}
            self.word_embed = nn.Embedding(len(words), word_dim)
            nn.init.uniform_(self.word_embed.weight, -0.1, 0.1)
        self.char_cnn = CharCnnEmbedder(out_dim=char_dim) if char_dim > 0 else None
        self.context_dim = context_dim
        self.use_tags = bool(use_tags and tag_table is not None)
        self.tag_table = tag_table if self.use_tags else None
        # Parked, unregistered reference: keeps the object reachable for
        # instrumentation without exposing its parameters for training.
        self._parked_tag_table = (tag_table,) if (tag_table is not None and not self.use_tags) else ()

    @property
    def width(self) -> int:
        total = 0
        if self.word_embed is not None:
            total += self.word_embed.embedding_dim
        if self.char_cnn is not None:
            total += self.char_cnn.dim
        total += self.context_dim
        if self.use_tags:
            total += self.tag_table.dim
        if total == 0:
            raise ValueError("embedder has no active channels")
        return total

    def word_ids(self, tokens: Sequence[str]) -> torch.Tensor:
        unk = self.word_vocab[UNK_TOKEN]
        return torch.tensor([self.word_vocab.get(t, unk) for t in tokens], dtype=torch.long)

    def forward(self, tokens: Sequence[str], context: torch.Tensor | None = None,
                tag_ids: torch.Tensor | None = None) -> torch.Tensor:
        parts = []
        if self.word_embed is not None:
            parts.append(self.word_embed(self.word_ids(tokens)))
        if self.char_cnn is not None:
            parts.append(self.char_cnn(tokens))
        if self.context_dim:
            if context is None:
                raise ValueError("context channel is active but no context vectors were given")
            context = torch.as_tensor(context, dtype=torch.float32)
            if context.shape != (len(tokens), self.context_dim):
                raise ValueError(f"context shape {tuple(context.shape)} != ({len(tokens)}, {self.context_dim})")
            parts.append(context)
        if self.use_tags:
            if tag_ids is None:
                raise ValueError("tag channel is active but no tag ids were given")
            parts.append(self.tag_table(tag_ids))
        fused = torch.cat(parts, dim=-1)
        if fused.shape[-1] != self.width:
            raise AssertionError("fused width does not match the sum of channel widths")
        return fused
