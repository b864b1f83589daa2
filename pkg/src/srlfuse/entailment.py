"""Three-way sentence-pair classifier over fused token embeddings.

The network follows the enhanced sequential inference recipe: a shared
encoder BiLSTM, soft dot-product alignment between the two sides,
enhanced local features [a; a~; a-a~; a*a~], a composition BiLSTM, and
average/max pooling into a small classifier. No syntactic features.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from sklearn.base import BaseEstimator, ClassifierMixin
from torch import nn

from .embeddings import HashContextualEmbedder, TagEmbeddingTable, TagProvider, TokenEmbedder

# Fixed class order in every serialized output.
ENTAILMENT_LABELS = ("entailment", "contradiction", "neutral")


@dataclass(frozen=True)
class EntailmentExample:
    """A premise/hypothesis pair, optionally carrying per-token tags."""

    premise: tuple[str, ...]
    hypothesis: tuple[str, ...]
    label: str | None = None
    premise_tags: tuple[str, ...] | None = None
    hypothesis_tags: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.premise or not self.hypothesis:
            raise ValueError("premise and hypothesis must be non-empty")
        if self.label is not None and self.label not in ENTAILMENT_LABELS:
            raise ValueError(f"label {self.label!r} not in {ENTAILMENT_LABELS}")
        for tags, side in ((self.premise_tags, self.premise), (self.hypothesis_tags, self.hypothesis)):
            if tags is not None and len(tags) != len(side):
                raise ValueError("tags must align with tokens")


class EsimNetwork(nn.Module):
    """Alignment-based pair encoder producing 3-way logits."""

    def __init__(self, input_width: int, hidden_size: int):
        super().__init__()
        self.input_width = input_width
        self.encoder = nn.LSTM(input_width, hidden_size, bidirectional=True)
        self.project = nn.Linear(8 * hidden_size, hidden_size)
        self.composer = nn.LSTM(hidden_size, hidden_size, bidirectional=True)
        self.classifier = nn.Sequential(
            nn.Linear(8 * hidden_size, hidden_size),
            nn.Tanh(),
            nn.Linear(hidden_size, len(ENTAILMENT_LABELS)),
        )

    def _encode(self, seq: torch.Tensor, rnn: nn.LSTM) -> torch.Tensor:
        return rnn(seq.unsqueeze(1))[0].squeeze(1)

    def _check(self, premise: torch.Tensor, hypothesis: torch.Tensor):
        for name, seq in (("premise", premise), ("hypothesis", hypothesis)):
            if seq.ndim != 2 or seq.shape[0] == 0:
                raise ValueError(f"{name} must be a non-empty [n, width] matrix")
            if seq.shape[1] != self.input_width:
                raise ValueError(f"{name} width {seq.shape[1]} != expected {self.input_width}")

    def forward(self, premise: torch.Tensor, hypothesis: torch.Tensor,
                return_attention: bool = False):
        self._check(premise, hypothesis)
        a = self._encode(premise, self.encoder)
        b = self._encode(hypothesis, self.encoder)
        sim = a @ b.T
        attn_a = F.softmax(sim, dim=1)      # premise rows over hypothesis
        attn_b = F.softmax(sim.T, dim=1)    # hypothesis rows over premise
        a_tilde = attn_a @ b
        b_tilde = attn_b @ a
        m_a = torch.cat([a, a_tilde, a - a_tilde, a * a_tilde], dim=-1)
        m_b = torch.cat([b, b_tilde, b - b_tilde, b * b_tilde], dim=-1)
        v_a = self._encode(torch.relu(self.project(m_a)), self.composer)
        v_b = self._encode(torch.relu(self.project(m_b)), self.composer)
        pooled = torch.cat([v_a.mean(dim=0), v_a.max(dim=0).values,
                            v_b.mean(dim=0), v_b.max(dim=0).values])
        logits = self.classifier(pooled)
        if return_attention:
            return logits, attn_a, attn_b
        return logits

    def probabilities(self, premise: torch.Tensor, hypothesis: torch.Tensor) -> torch.Tensor:
        return F.softmax(self(premise, hypothesis), dim=-1)


class EsimClassifier(BaseEstimator, ClassifierMixin):
    """Entailment classifier with an sklearn-style estimator surface.

    The word channel is a trainable table by default; setting
    ``context_dim > 0`` swaps it for frozen contextual vectors. The tag
    channel concatenates learned tag embeddings from ``tag_provider``
    (or per-example tags) when ``use_tags`` is on.
    """

    def __init__(self, hidden_size: int = 48, word_dim: int = 48, context_dim: int = 0,
                 tag_dim: int = 5, use_tags: bool = True, tag_provider: TagProvider | None = None,
                 tag_table: TagEmbeddingTable | None = None, epochs: int = 30,
                 learning_rate: float = 3e-3, batch_size: int = 16, seed: int = 0,
                 context_embedder=None):
        self.hidden_size = hidden_size
        self.word_dim = word_dim
        self.context_dim = context_dim
        self.tag_dim = tag_dim
        self.use_tags = use_tags
        self.tag_provider = tag_provider
        self.tag_table = tag_table
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed
        self.context_embedder = context_embedder

    # -- shared plumbing ---------------------------------------------------

    @staticmethod
    def _as_examples(X, y=None) -> list[EntailmentExample]:
        examples = []
        labels = list(y) if y is not None else [None] * len(X)
        if len(labels) != len(X):
            raise ValueError(f"{len(X)} pairs but {len(labels)} labels")
        for i, item in enumerate(X):
            try:
                if isinstance(item, EntailmentExample):
                    ex = item
                    if labels[i] is not None:
                        ex = EntailmentExample(ex.premise, ex.hypothesis, labels[i],
                                               ex.premise_tags, ex.hypothesis_tags)
                else:
                    premise, hypothesis = item
                    ex = EntailmentExample(tuple(premise), tuple(hypothesis), labels[i])
                examples.append(ex)
            except ValueError as exc:
                raise ValueError(f"example {i}: {exc}") from None
        return examples

    def _tags_for(self, tokens: Sequence[str], given: tuple[str, ...] | None) -> list[str]:
        if given is not None:
            return list(given)
        if self.tag_provider is None:
            raise ValueError("use_tags is on but no tag provider is configured and the "
                             "example carries no tags")
        return self.tag_provider.tag(tokens)

    def _featurize(self, example: EntailmentExample):
        sides = []
        for tokens, tags in ((example.premise, example.premise_tags),
                             (example.hypothesis, example.hypothesis_tags)):
            context = None
            if self.context_dim > 0:
                context = torch.as_tensor(self.context_embedder_.embed(tokens), dtype=torch.float32)
            tag_ids = None
            if self._tags_on:
                tag_ids = self.embedder_.tag_table.ids(self._tags_for(tokens, tags))
            sides.append((list(tokens), context, tag_ids))
        return tuple(sides)

    @property
    def _tags_on(self) -> bool:
        return bool(self.use_tags and self.tag_dim > 0)

    def _embed(self, side) -> torch.Tensor:
        tokens, context, tag_ids = side
        return self.embedder_(tokens, context=context, tag_ids=tag_ids)

    # -- estimator surface ---------------------------------------------------

    def fit(self, X, y):
        examples = self._as_examples(X, y)
        if not examples:
            raise ValueError("training set is empty")
        for i, ex in enumerate(examples):
            if ex.label is None:
                raise ValueError(f"example {i} has no gold label")
        torch.manual_seed(self.seed)
        self.classes_ = np.array(ENTAILMENT_LABELS)
        self.context_embedder_ = None
        if self.context_dim > 0:
            self.context_embedder_ = self.context_embedder or HashContextualEmbedder(
                dim=self.context_dim, seed=self.seed)
            if self.context_embedder_.dim != self.context_dim:
                raise ValueError(f"context embedder dim {self.context_embedder_.dim} "
                                 f"!= context_dim {self.context_dim}")

        table = self.tag_table
        if table is None and self.use_tags and self.tag_dim > 0:
            if self.tag_provider is None:
                raise ValueError("use_tags is on: pass a tag_provider or a prebuilt tag_table")
            table = TagEmbeddingTable(self.tag_provider.vocabulary, self.tag_dim,
                                      init_seed=self.seed)
        vocab = sorted({t for ex in examples for t in ex.premise + ex.hypothesis})
        self.embedder_ = TokenEmbedder(word_vocab=vocab, word_dim=self.word_dim,
                                       context_dim=self.context_dim,
                                       tag_table=table, use_tags=self._tags_on)
        self.model_ = EsimNetwork(self.embedder_.width, self.hidden_size)

        label_ids = {label: i for i, label in enumerate(ENTAILMENT_LABELS)}
        prepared = [(self._featurize(ex), label_ids[ex.label]) for ex in examples]
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
                loss = sum(F.cross_entropy(self.model_(self._embed(p), self._embed(h)).unsqueeze(0),
                                           torch.tensor([label]))
                           for (p, h), label in batch) / len(batch)
                loss.backward()
                optimizer.step()
                total += float(loss.detach()) * len(batch)
            self.loss_curve_.append(total / len(prepared))
        self.model_.eval()
        self.embedder_.eval()
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise RuntimeError("this EsimClassifier instance is not fitted yet")

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        examples = self._as_examples(X)
        out = np.zeros((len(examples), len(ENTAILMENT_LABELS)))
        with torch.no_grad():
            for i, ex in enumerate(examples):
                p, h = self._featurize(ex)
                out[i] = self.model_.probabilities(self._embed(p), self._embed(h)).numpy()
        return out

    def predict(self, X) -> np.ndarray:
        probs = self.predict_proba(X)
        return self.classes_[probs.argmax(axis=1)]

    # -- persistence ---------------------------------------------------------

    def export_state(self) -> dict:
        self._check_fitted()
        tags_on = self._tags_on
        return {
            "kind": "entailment",
            "params": {k: v for k, v in self.get_params().items()
                       if k not in ("tag_provider", "tag_table", "context_embedder")},
            "word_vocab": sorted(self.embedder_.word_vocab),
            "tag_vocab": list(self.embedder_.tag_table.tags) if tags_on else None,
            "tag_table_dim": self.embedder_.tag_table.dim if tags_on else None,
            "embedder_state": self.embedder_.state_dict(),
            "model_state": self.model_.state_dict(),
            "context_embedder": ({"dim": self.context_embedder_.dim,
                                  "window": self.context_embedder_.window,
                                  "seed": self.context_embedder_.seed}
                                 if isinstance(self.context_embedder_, HashContextualEmbedder) else None),
        }

    @classmethod
    def restore_state(cls, state: dict, tag_provider: TagProvider | None = None) -> "EsimClassifier":
        clf = cls(**state["params"], tag_provider=tag_provider)
        clf.classes_ = np.array(ENTAILMENT_LABELS)
        clf.context_embedder_ = None
        if state["context_embedder"] is not None:
            clf.context_embedder_ = HashContextualEmbedder(**state["context_embedder"])
        table = None
        if state["tag_vocab"] is not None:
            table = TagEmbeddingTable(state["tag_vocab"], state["tag_table_dim"],
                                      init_seed=clf.seed)
        clf.embedder_ = TokenEmbedder(word_vocab=state["word_vocab"], word_dim=clf.word_dim,
                                      context_dim=clf.context_dim, tag_table=table,
                                      use_tags=table is not None)
        clf.embedder_.load_state_dict(state["embedder_state"])
        clf.model_ = EsimNetwork(clf.embedder_.width, clf.hidden_size)
        clf.model_.load_state_dict(state["model_state"])
        clf.model_.eval()
        clf.embedder_.eval()
        clf.loss_curve_ = []
        return clf
