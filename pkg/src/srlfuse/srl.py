"""End-to-end semantic role labeler.

One tagging run per verbal predicate: the token's contextual vector is
concatenated with a two-row predicate indicator embedding, encoded by a
stack of highway LSTM layers whose directions alternate, and projected
to per-tag log-probabilities. Inference applies constrained decoding;
multiple predicate runs collapse to the sequence with the most non-O
labels so each sentence keeps exactly one label per token.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from sklearn.base import BaseEstimator
from torch import nn

from . import bio
from .embeddings import HashContextualEmbedder, PredicateIndicatorEmbedding, TagProvider
from .taggers import Token, default_pos_tagger, identify_predicates
from .viterbi import viterbi_decode

CHECKPOINT_FORMAT = "srlfuse-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class SrlExample:
    """One training unit: a sentence, one marked predicate, gold tags."""

    tokens: tuple[str, ...]
    predicate_index: int
    tags: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.tags):
            raise ValueError(f"{len(self.tokens)} tokens but {len(self.tags)} tags")
        if not (0 <= self.predicate_index < len(self.tokens)):
            raise ValueError(f"predicate index {self.predicate_index} out of range")


@dataclass
class AnnotatedSentence:
    """Tokens plus one collapsed label per token, ready for fusion.

    ``provenance`` records which predicate run won the collapse, or
    "no-predicate" when the sentence had no verb.
    """

    tokens: list[Token]
    labels: list[bio.BioTag]
    predicate_flags: list[bool]
    provenance: str

    def __post_init__(self):
        if not (len(self.tokens) == len(self.labels) == len(self.predicate_flags)):
            raise ValueError("tokens, labels and flags must align")
        if not bio.is_valid_sequence(self.labels):
            raise ValueError("labels do not form a valid BIO sequence")

    @property
    def label_strings(self) -> list[str]:
        return [str(t) for t in self.labels]


class HighwayLstmLayer(nn.Module):
    """Single-direction LSTM step with a gated identity carry.

    The carry gate's bias starts at +1 so an untrained layer passes its
    input mostly unchanged; variational recurrent dropout applies one
    mask to the recurrent state across all timesteps.
    """

    def __init__(self, size: int):
        super().__init__()
        self.size = size
        self.w_ih = nn.Parameter(torch.empty(4 * size, size))
        self.w_hh = nn.Parameter(torch.empty(4 * size, size))
        self.bias = nn.Parameter(torch.zeros(4 * size))
        self.w_cx = nn.Parameter(torch.empty(size, size))
        self.w_ch = nn.Parameter(torch.empty(size, size))
        self.carry_bias = nn.Parameter(torch.ones(size))
        for w in (self.w_ih, self.w_hh, self.w_cx, self.w_ch):
            nn.init.xavier_uniform_(w)
        with torch.no_grad():
            self.bias[size : 2 * size] = 1.0  # forget gate

    def forward(self, xs: torch.Tensor, reverse: bool = False,
                recurrent_mask: torch.Tensor | None = None) -> torch.Tensor:
        n = xs.shape[0]
        h = xs.new_zeros(self.size)
        c = xs.new_zeros(self.size)
        outputs: list[torch.Tensor | None] = [None] * n
        order = range(n - 1, -1, -1) if reverse else range(n)
        for t in order:
            x = xs[t]
            h_in = h * recurrent_mask if recurrent_mask is not None else h
            gates = F.linear(x, self.w_ih) + F.linear(h_in, self.w_hh) + self.bias
            i, f, g, o = gates.chunk(4)
            c = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
            h_lstm = torch.sigmoid(o) * torch.tanh(c)
            carry = torch.sigmoid(F.linear(x, self.w_cx) + F.linear(h_in, self.w_ch) + self.carry_bias)
            h = carry * x + (1.0 - carry) * h_lstm
            outputs[t] = h
        return torch.stack(outputs)


class HighwayLstmEncoder(nn.Module):
    """Stack of highway LSTM layers with interleaved directions.

    Layer k runs opposite to layer k-1 (even layers forward, odd layers
    backward), so depth substitutes for explicit bidirectionality.
    """

    def __init__(self, input_dim: int, hidden_dim: int, num_layers: int, dropout: float = 0.0):
        super().__init__()
        if num_layers < 1:
            raise ValueError("encoder needs at least one layer")
        self.input_proj = nn.Linear(input_dim, hidden_dim)
        self.layers = nn.ModuleList(HighwayLstmLayer(hidden_dim) for _ in range(num_layers))
        self.layer_directions = tuple("forward" if i % 2 == 0 else "backward" for i in range(num_layers))
        self.dropout = dropout

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.input_proj(x)
        for layer, direction in zip(self.layers, self.layer_directions):
            mask = None
            if self.training and self.dropout > 0:
                keep = 1.0 - self.dropout
                mask = torch.bernoulli(h.new_full((layer.size,), keep)) / keep
            h = layer(h, reverse=direction == "backward", recurrent_mask=mask)
        return h


class SrlNetwork(nn.Module):
    """Indicator-conditioned tagging network producing log-emissions."""

    def __init__(self, context_dim: int, indicator_dim: int, hidden_dim: int,
                 num_layers: int, n_tags: int, dropout: float = 0.0):
        super().__init__()
        self.indicator = PredicateIndicatorEmbedding(indicator_dim)
        self.encoder = HighwayLstmEncoder(context_dim + indicator_dim, hidden_dim, num_layers, dropout)
        self.project = nn.Linear(hidden_dim, n_tags)

    def forward(self, context: torch.Tensor, flags: torch.Tensor) -> torch.Tensor:
        inputs = torch.cat([context, self.indicator(flags)], dim=-1)
        return F.log_softmax(self.project(self.encoder(inputs)), dim=-1)


def _one_hot_flags(length: int, predicate_index: int) -> torch.Tensor:
    flags = torch.zeros(length, dtype=torch.long)
    flags[predicate_index] = 1
    return flags


class SrlTagger(BaseEstimator):
    """Semantic role labeler with a fit/predict estimator surface.

    ``fit`` consumes per-predicate examples; ``predict`` runs the whole
    pipeline (predicate identification, per-predicate tagging,
    constrained decoding, collapse) on raw token sequences.
    """

    def __init__(self, num_layers: int = 2, hidden_size: int = 64, indicator_dim: int = 8,
                 context_dim: int = 64, dropout: float = 0.0, epochs: int = 120,
                 learning_rate: float = 2e-3, batch_size: int = 8, seed: int = 0,
                 context_embedder=None, pos_tagger=None):
        self.num_layers = num_layers
        self.hidden_size = hidden_size
        self.indicator_dim = indicator_dim
        self.context_dim = context_dim
        self.dropout = dropout
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed
        self.context_embedder = context_embedder
        self.pos_tagger = pos_tagger

    # -- fitting ---------------------------------------------------------

    def _resolve_embedder(self):
        return self.context_embedder or HashContextualEmbedder(dim=self.context_dim, seed=self.seed)

    def _resolve_pos_tagger(self):
        return self.pos_tagger or default_pos_tagger()

    @staticmethod
    def _as_examples(X, y) -> list[SrlExample]:
        if len(X) != len(y):
            raise ValueError(f"{len(X)} inputs but {len(y)} tag sequences")
        examples = []
        for i, ((tokens, predicate_index), tags) in enumerate(zip(X, y)):
            tags = tuple(str(t) for t in tags)
            try:
                if not bio.is_valid_sequence(tags):
                    raise ValueError(f"gold tags are not a valid BIO sequence: {tags}")
                examples.append(SrlExample(tuple(tokens), int(predicate_index), tags))
            except ValueError as exc:
                raise ValueError(f"example {i}: {exc}") from None
        return examples

    def fit(self, X, y):
        """Train on (tokens, predicate_index) inputs and gold BIO tags."""
        examples = self._as_examples(X, y)
        if not examples:
            raise ValueError("training corpus is empty")
        torch.manual_seed(self.seed)
        self.alphabet_ = bio.TagAlphabet.from_tag_strings(t for ex in examples for t in ex.tags)
        self.context_embedder_ = self._resolve_embedder()
        if self.context_embedder_.dim != self.context_dim:
            raise ValueError(f"context embedder dim {self.context_embedder_.dim} != context_dim {self.context_dim}")
        self.model_ = SrlNetwork(self.context_dim, self.indicator_dim, self.hidden_size,
                                 self.num_layers, len(self.alphabet_), self.dropout)
        self._mask = bio.transition_mask(self.alphabet_)
        self._start = bio.start_mask(self.alphabet_)

        prepared = [
            (torch.as_tensor(self.context_embedder_.embed(ex.tokens), dtype=torch.float32),
             _one_hot_flags(len(ex.tokens), ex.predicate_index),
             torch.tensor(self.alphabet_.encode_ids(ex.tags), dtype=torch.long))
            for ex in examples
        ]
        optimizer = torch.optim.Adam(self.model_.parameters(), lr=self.learning_rate)
        shuffler = random.Random(self.seed)
        order = list(range(len(prepared)))
        self.loss_curve_ = []
        self.model_.train()
        for _ in range(self.epochs):
            shuffler.shuffle(order)
            epoch_nll = 0.0
            epoch_tokens = 0
            for lo in range(0, len(order), self.batch_size):
                batch = [prepared[i] for i in order[lo : lo + self.batch_size]]
                optimizer.zero_grad()
                nll = sum(F.nll_loss(self.model_(ctx, flags), gold, reduction="sum")
                          for ctx, flags, gold in batch)
                n_tokens = sum(len(gold) for _, _, gold in batch)
                loss = nll / n_tokens
                loss.backward()
                optimizer.step()
                epoch_nll += float(nll.detach())
                epoch_tokens += n_tokens
            self.loss_curve_.append(epoch_nll / epoch_tokens)
        self.model_.eval()
        return self

    # -- inference -------------------------------------------------------

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise RuntimeError("this SrlTagger instance is not fitted yet")

    def emissions(self, tokens: Sequence[str | Token], predicate_index: int,
                  check_predicate: bool = True) -> np.ndarray:
        """Log-emission matrix for one predicate run."""
        self._check_fitted()
        texts = [t.text if isinstance(t, Token) else str(t) for t in tokens]
        if not texts:
            raise ValueError("cannot tag an empty sentence")
        if not (0 <= predicate_index < len(texts)):
            raise ValueError(f"predicate index {predicate_index} out of range")
        if check_predicate:
            flags = identify_predicates(list(tokens), self._resolve_pos_tagger())
            if not flags[predicate_index]:
                raise ValueError(f"token {texts[predicate_index]!r} at {predicate_index} is not a predicate")
        with torch.no_grad():
            ctx = torch.as_tensor(self.context_embedder_.embed(texts), dtype=torch.float32)
            log_probs = self.model_(ctx, _one_hot_flags(len(texts), predicate_index))
        return log_probs.numpy().astype(np.float64)

    def _decode(self, emissions: np.ndarray) -> list[int]:
        return viterbi_decode(emissions, self._mask, self._start).tags

    def annotate(self, tokens: Sequence[str | Token]) -> AnnotatedSentence:
        """Full pipeline for one sentence, collapsing per-predicate runs.

        The run with the most non-O labels wins; ties break toward the
        earliest predicate. Sentences with no predicate get all-O.
        """
        self._check_fitted()
        token_objs = [t if isinstance(t, Token) else Token(str(t)) for t in tokens]
        texts = [t.text for t in token_objs]
        flags = identify_predicates(token_objs, self._resolve_pos_tagger())
        if not any(flags):
            labels = [bio.O_TAG] * len(texts)
            return AnnotatedSentence(token_objs, labels, flags, "no-predicate")
        best_ids = None
        best_count = -1
        best_predicate = -1
        for idx, flagged in enumerate(flags):
            if not flagged:
                continue
            ids = self._decode(self.emissions(token_objs, idx, check_predicate=False))
            non_o = sum(1 for i in ids if i != 0)
            if non_o > best_count:  # strict: earliest predicate wins ties
                best_ids, best_count, best_predicate = ids, non_o, idx
        labels = self.alphabet_.decode_ids(best_ids)
        return AnnotatedSentence(token_objs, labels, flags, f"predicate:{best_predicate}")

    def predict(self, X) -> list[AnnotatedSentence]:
        return [self.annotate(tokens) for tokens in X]

    def score(self, X, y) -> float:
        """Span F1 of collapsed predictions against gold tag sequences."""
        from .metrics import srl_span_f1

        predicted = self.predict(X)
        return srl_span_f1(predicted, list(y))[2]

    def tag_provider(self) -> TagProvider:
        """Tag source handing this tagger's labels to downstream models."""
        self._check_fitted()
        vocabulary = tuple(str(t) for t in self.alphabet_.tags)
        return TagProvider("srl", vocabulary, lambda tokens: self.annotate(tokens).label_strings)

    # -- persistence -----------------------------------------------------

    def export_state(self) -> dict:
        """Everything needed to rebuild a frozen copy of this tagger."""
        self._check_fitted()
        if self.context_embedder is not None and not isinstance(self.context_embedder, HashContextualEmbedder):
            raise ValueError("only the hash contextual embedder can be checkpointed; "
                             "re-attach custom embedders after load")
        if self.pos_tagger is not None:
            raise ValueError("custom POS taggers cannot be checkpointed; re-attach after load")
        embedder = self.context_embedder_
        return {
            "kind": "srl",
            "params": {k: v for k, v in self.get_params().items()
                       if k not in ("context_embedder", "pos_tagger")},
            "embedder": {"dim": embedder.dim, "window": embedder.window, "seed": embedder.seed},
            "alphabet": list(self.alphabet_.roles),
            "model_state": self.model_.state_dict(),
        }

    @classmethod
    def restore_state(cls, state: dict) -> "SrlTagger":
        tagger = cls(**state["params"])
        tagger.alphabet_ = bio.TagAlphabet(state["alphabet"])
        tagger.context_embedder_ = HashContextualEmbedder(**state["embedder"])
        tagger.model_ = SrlNetwork(tagger.context_dim, tagger.indicator_dim, tagger.hidden_size,
                                   tagger.num_layers, len(tagger.alphabet_), tagger.dropout)
        tagger.model_.load_state_dict(state["model_state"])
        tagger.model_.eval()
        tagger._mask = bio.transition_mask(tagger.alphabet_)
        tagger._start = bio.start_mask(tagger.alphabet_)
        tagger.loss_curve_ = []
        return tagger

    def save(self, path, config_hash: str | None = None) -> None:
        """Versioned single-model checkpoint file."""
        torch.save({
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "kind": "srl",
            "config_hash": config_hash,
            "estimator": self.export_state(),
            "annotator": None,
        }, path)

    @classmethod
    def load(cls, path) -> "SrlTagger":
        payload = torch.load(path, weights_only=False)
        if payload.get("format") != CHECKPOINT_FORMAT or payload.get("kind") != "srl":
            raise ValueError(f"{path} is not a tagger checkpoint")
        if payload.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
        tagger = cls.restore_state(payload["estimator"])
        tagger.config_hash_ = payload.get("config_hash")
        return tagger
