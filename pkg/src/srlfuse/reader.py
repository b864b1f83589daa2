"""Span-extraction reading model over fused token embeddings.

Document and question pass through a shared bidirectional GRU, a
bidirectional attention layer mixes them, and a residual self-attention
layer refines the document representation before separate start/end
pointers. Spans are decoded by maximizing start*end probability under a
length cap.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from sklearn.base import BaseEstimator
from torch import nn

from .embeddings import HashContextualEmbedder, TagEmbeddingTable, TagProvider, TokenEmbedder


@dataclass(frozen=True)
class ReadingExample:
    """A (document, question, answer span) triple.

    ``answer_texts`` keeps every reference string for text-level
    scoring; the span indexes the document tokens inclusively.
    """

    document: tuple[str, ...]
    question: tuple[str, ...]
    answer_start: int = -1
    answer_end: int = -1
    answer_texts: tuple[str, ...] = ()
    qid: str = ""
    document_tags: tuple[str, ...] | None = None
    question_tags: tuple[str, ...] | None = None

    def __post_init__(self):
        where = f"question {self.qid}: " if self.qid else ""
        if not self.document or not self.question:
            raise ValueError(f"{where}document and question must be non-empty")
        if self.answer_start != -1 or self.answer_end != -1:
            if not (0 <= self.answer_start <= self.answer_end < len(self.document)):
                raise ValueError(f"{where}answer span ({self.answer_start}, {self.answer_end}) "
                                 f"outside document of {len(self.document)} tokens")

    @property
    def span(self) -> tuple[int, int]:
        return (self.answer_start, self.answer_end)

    def span_text(self, start: int, end: int) -> str:
        return " ".join(self.document[start : end + 1])


def extract_span(start_dist, end_dist, max_len: int = 17) -> tuple[int, int]:
    """Best (i, j) with i <= j < i + max_len by start[i] * end[j].

    Ties break to the smallest i, then the smallest j.
    """
    start_dist = np.asarray(start_dist, dtype=np.float64)
    end_dist = np.asarray(end_dist, dtype=np.float64)
    if start_dist.ndim != 1 or start_dist.shape != end_dist.shape or start_dist.size == 0:
        raise ValueError("start and end must be equal-length non-empty vectors")
    for name, dist in (("start", start_dist), ("end", end_dist)):
        if np.any(dist < 0) or abs(dist.sum() - 1.0) > 1e-3:
            raise ValueError(f"{name} is not a probability distribution")
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    best = (0, 0)
    best_score = -1.0
    for i in range(start_dist.size):
        for j in range(i, min(i + max_len, start_dist.size)):
            score = start_dist[i] * end_dist[j]
            if score > best_score:
                best, best_score = (i, j), score
    return best


class _Trilinear(nn.Module):
    """Similarity s(u, v) = w_u . u + w_v . v + w_uv . (u * v)."""

    def __init__(self, dim: int):
        super().__init__()
        bound = 1.0 / dim**0.5
        self.w_u = nn.Parameter(torch.empty(dim).uniform_(-bound, bound))
        self.w_v = nn.Parameter(torch.empty(dim).uniform_(-bound, bound))
        self.w_uv = nn.Parameter(torch.empty(dim).uniform_(-bound, bound))

    def forward(self, u: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
        return (u @ self.w_u)[:, None] + (v @ self.w_v)[None, :] + (u * self.w_uv) @ v.T


class ReaderNetwork(nn.Module):
    """Shared-encoder bidirectional-attention network with two pointers."""

    def __init__(self, input_width: int, hidden_size: int):
        super().__init__()
        self.input_width = input_width
        d = 2 * hidden_size
        self.encoder = nn.GRU(input_width, hidden_size, bidirectional=True)
        self.bidaf_sim = _Trilinear(d)
        self.project = nn.Linear(4 * d, d)
        self.self_sim = _Trilinear(d)
        self.self_project = nn.Linear(3 * d, d)
        self.start_gru = nn.GRU(d, hidden_size, bidirectional=True)
        self.start_linear = nn.Linear(2 * d, 1)
        self.end_gru = nn.GRU(d, hidden_size, bidirectional=True)
        self.end_linear = nn.Linear(2 * d, 1)

    def _encode(self, seq: torch.Tensor, rnn: nn.GRU) -> torch.Tensor:
        return rnn(seq.unsqueeze(1))[0].squeeze(1)

    def forward(self, document: torch.Tensor, question: torch.Tensor):
        for name, seq in (("document", document), ("question", question)):
            if seq.ndim != 2 or seq.shape[0] == 0:
                raise ValueError(f"{name} must be a non-empty [n, width] matrix")
            if seq.shape[1] != self.input_width:
                raise ValueError(f"{name} width {seq.shape[1]} != expected {self.input_width}")
        d_enc = self._encode(document, self.encoder)
        q_enc = self._encode(question, self.encoder)

        sim = self.bidaf_sim(d_enc, q_enc)                      # [m, n]
        doc_to_q = F.softmax(sim, dim=1) @ q_enc                # per-token query summary
        q_to_doc = F.softmax(sim.max(dim=1).values, dim=0) @ d_enc
        mixed = torch.cat([d_enc, doc_to_q, d_enc * doc_to_q,
                           d_enc * q_to_doc.expand_as(d_enc)], dim=-1)
        x = torch.relu(self.project(mixed))

        self_attn = F.softmax(self.self_sim(x, x), dim=1) @ x
        m = x + torch.relu(self.self_project(torch.cat([x, self_attn, x * self_attn], dim=-1)))

        m1 = self._encode(m, self.start_gru)
        start_logits = self.start_linear(torch.cat([m, m1], dim=-1)).squeeze(-1)
        m2 = self._encode(m1, self.end_gru)
        end_logits = self.end_linear(torch.cat([m, m2], dim=-1)).squeeze(-1)
        return F.log_softmax(start_logits, dim=0), F.log_softmax(end_logits, dim=0)


class SpanReader(BaseEstimator):
    """Reading-comprehension estimator: fit on triples, predict spans.

    The token embedding concatenates the word table, the character CNN,
    and frozen contextual vectors; the tag channel is appended when
    ``use_tags`` is on.
    """

    def __init__(self, hidden_size: int = 32, word_dim: int = 32, char_dim: int = 16,
                 context_dim: int = 32, tag_dim: int = 5, use_tags: bool = True,
                 tag_provider: TagProvider | None = None, tag_table: TagEmbeddingTable | None = None,
                 max_answer_len: int = 17, epochs: int = 40, learning_rate: float = 2e-3,
                 batch_size: int = 8, seed: int = 0, context_embedder=None):
        self.hidden_size = hidden_size
        self.word_dim = word_dim
        self.char_dim = char_dim
        self.context_dim = context_dim
        self.tag_dim = tag_dim
        self.use_tags = use_tags
        self.tag_provider = tag_provider
        self.tag_table = tag_table
        self.max_answer_len = max_answer_len
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed
        self.context_embedder = context_embedder

    @property
    def _tags_on(self) -> bool:
        return bool(self.use_tags and self.tag_dim > 0)

    @staticmethod
    def _as_examples(X, y=None) -> list[ReadingExample]:
        spans = list(y) if y is not None else [None] * len(X)
        if len(spans) != len(X):
            raise ValueError(f"{len(X)} examples but {len(spans)} spans")
        examples = []
        for i, item in enumerate(X):
            try:
                if isinstance(item, ReadingExample):
                    ex = item
                    if spans[i] is not None:
                        start, end = spans[i]
                        ex = ReadingExample(ex.document, ex.question, start, end,
                                            ex.answer_texts, ex.qid,
                                            ex.document_tags, ex.question_tags)
                else:
                    document, question = item
                    start, end = spans[i] if spans[i] is not None else (-1, -1)
                    ex = ReadingExample(tuple(document), tuple(question), start, end)
                examples.append(ex)
            except ValueError as exc:
                label = getattr(item, "qid", "") or f"example {i}"
                raise ValueError(f"{label}: {exc}") from None
        return examples

    def _tags_for(self, tokens: Sequence[str], given) -> list[str]:
        if given is not None:
            return list(given)
        if self.tag_provider is None:
            raise ValueError("use_tags is on but no tag provider is configured and the "
                             "example carries no tags")
        return self.tag_provider.tag(tokens)

    def _featurize(self, example: ReadingExample):
        sides = []
        for tokens, tags in ((example.document, example.document_tags),
                             (example.question, example.question_tags)):
            context = None
            if self.context_dim > 0:
                context = torch.as_tensor(self.context_embedder_.embed(tokens), dtype=torch.float32)
            tag_ids = None
            if self._tags_on:
                tag_ids = self.embedder_.tag_table.ids(self._tags_for(tokens, tags))
            sides.append((list(tokens), context, tag_ids))
        return tuple(sides)

    def _embed(self, side) -> torch.Tensor:
        tokens, context, tag_ids = side
        return self.embedder_(tokens, context=context, tag_ids=tag_ids)

    def fit(self, X, y=None):
        examples = self._as_examples(X, y)
        if not examples:
            raise ValueError("training set is empty")
        for ex in examples:
            if ex.answer_start == -1:
                raise ValueError(f"{ex.qid or 'example'}: training requires an answer span")
        torch.manual_seed(self.seed)
        self.context_embedder_ = None
        if self.context_dim > 0:
            self.context_embedder_ = self.context_embedder or HashContextualEmbedder(
                dim=self.context_dim, seed=self.seed)
            if self.context_embedder_.dim != self.context_dim:
                raise ValueError(f"context embedder dim {self.context_embedder_.dim} "
                                 f"!= context_dim {self.context_dim}")
        table = self.tag_table
        if table is None and self._tags_on:
            if self.tag_provider is None:
                raise ValueError("use_tags is on: pass a tag_provider or a prebuilt tag_table")
            table = TagEmbeddingTable(self.tag_provider.vocabulary, self.tag_dim,
                                      init_seed=self.seed)
        vocab = sorted({t for ex in examples for t in ex.document + ex.question})
        self.embedder_ = TokenEmbedder(word_vocab=vocab, word_dim=self.word_dim,
                                       char_dim=self.char_dim, context_dim=self.context_dim,
                                       tag_table=table, use_tags=self._tags_on)
        self.model_ = ReaderNetwork(self.embedder_.width, self.hidden_size)

        prepared = [(self._featurize(ex), ex.answer_start, ex.answer_end) for ex in examples]
        parameters = list(self.model_.parameters()) + list(self.embedder_.parameters())
        optimizer = torch.optim.Adam(parameters, lr=self.learning_rate)
        shuffler = random.Random(self.seed)
        order = list(range(len(prepared)))
        self.loss_curve_ = []
        self.model_.train()
        self.embedder_.train()
        for _ in range(self.epochs):
            shuffler.shuffle(order)
            total = 0.0
            for lo in range(0, len(order), self.batch_size):
                batch = [prepared[i] for i in order[lo : lo + self.batch_size]]
                optimizer.zero_grad()
                loss = 0.0
                for (doc, question), start, end in batch:
                    start_lp, end_lp = self.model_(self._embed(doc), self._embed(question))
                    loss = loss - start_lp[start] - end_lp[end]
                loss = loss / len(batch)
                loss.backward()
                optimizer.step()
                total += float(loss.detach()) * len(batch)
            self.loss_curve_.append(total / len(prepared))
        self.model_.eval()
        self.embedder_.eval()
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise RuntimeError("this SpanReader instance is not fitted yet")

    def predict_distributions(self, example) -> tuple[np.ndarray, np.ndarray]:
        self._check_fitted()
        (ex,) = self._as_examples([example])
        with torch.no_grad():
            doc, question = self._featurize(ex)
            start_lp, end_lp = self.model_(self._embed(doc), self._embed(question))
        return np.exp(start_lp.numpy().astype(np.float64)), np.exp(end_lp.numpy().astype(np.float64))

    def predict(self, X) -> list[tuple[int, int]]:
        return [extract_span(*self.predict_distributions(ex), max_len=self.max_answer_len)
                for ex in X]

    def predict_text(self, X) -> list[str]:
        examples = self._as_examples(X)
        return [ex.span_text(*span) for ex, span in zip(examples, self.predict(examples))]

    def score(self, X, y=None) -> float:
        """Fraction of exactly matched spans."""
        examples = self._as_examples(X, y)
        predicted = self.predict(examples)
        return float(np.mean([p == ex.span for p, ex in zip(predicted, examples)]))

    # -- persistence ---------------------------------------------------------

    def export_state(self) -> dict:
        self._check_fitted()
        return {
            "kind": "reading",
            "params": {k: v for k, v in self.get_params().items()
                       if k not in ("tag_provider", "tag_table", "context_embedder")},
            "word_vocab": sorted(self.embedder_.word_vocab),
            "tag_vocab": list(self.embedder_.tag_table.tags) if self._tags_on else None,
            "tag_table_dim": self.embedder_.tag_table.dim if self._tags_on else None,
            "embedder_state": self.embedder_.state_dict(),
            "model_state": self.model_.state_dict(),
            "context_embedder": ({"dim": self.context_embedder_.dim,
                                  "window": self.context_embedder_.window,
                                  "seed": self.context_embedder_.seed}
                                 if isinstance(self.context_embedder_, HashContextualEmbedder) else None),
        }

    @classmethod
    def restore_state(cls, state: dict, tag_provider: TagProvider | None = None) -> "SpanReader":
        reader = cls(**state["params"], tag_provider=tag_provider)
        reader.context_embedder_ = None
        if state["context_embedder"] is not None:
            reader.context_embedder_ = HashContextualEmbedder(**state["context_embedder"])
        table = None
        if state["tag_vocab"] is not None:
            table = TagEmbeddingTable(state["tag_vocab"], state["tag_table_dim"],
                                      init_seed=reader.seed)
        reader.embedder_ = TokenEmbedder(word_vocab=state["word_vocab"], word_dim=reader.word_dim,
                                         char_dim=reader.char_dim, context_dim=reader.context_dim,
                                         tag_table=table, use_tags=table is not None)
        reader.embedder_.load_state_dict(state["embedder_state"])
        reader.model_ = ReaderNetwork(reader.embedder_.width, reader.hidden_size)
        reader.model_.load_state_dict(state["model_state"])
        reader.model_.eval()
        reader.embedder_.eval()
        reader.loss_curve_ = []
        return reader
