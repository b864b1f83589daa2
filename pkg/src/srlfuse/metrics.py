"""Evaluation metrics: accuracy, exact match, token F1, and span F1.

Answer normalization matches the public span-QA evaluator: lowercase,
strip punctuation, drop the articles a/an/the, collapse whitespace.
Multi-reference metrics take the max over references.
"""

from __future__ import annotations

import json
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    """Lowercase, remove punctuation and articles, collapse whitespace."""
    text = text.lower()
    text = text.translate(_PUNCT_TABLE)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def exact_match(prediction: str, golds: Sequence[str]) -> int:
    """1 iff the normalized prediction equals any normalized gold."""
    if not golds:
        raise ValueError("exact_match needs at least one gold answer")
    pred = normalize_answer(prediction)
    return int(any(pred == normalize_answer(g) for g in golds))


def _f1_single(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens or not gold_tokens:
        # Both empty counts as a match, one-sided empty as a miss.
        return float(pred_tokens == gold_tokens)
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def token_f1(prediction: str, golds: Sequence[str]) -> float:
    """Max over golds of the bag-of-tokens F1 on normalized text."""
    if not golds:
        raise ValueError("token_f1 needs at least one gold answer")
    pred_tokens = normalize_answer(prediction).split()
    return max(_f1_single(pred_tokens, normalize_answer(g).split()) for g in golds)


def accuracy(predictions: Sequence, golds: Sequence) -> float:
    """Fraction of positions where prediction equals gold."""
    if len(predictions) != len(golds):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(golds)} golds")
    if not golds:
        raise ValueError("accuracy over zero items is undefined")
    return sum(p == g for p, g in zip(predictions, golds)) / len(golds)


def _as_span_set(sentence):
    """Extract the set of (role, start, end) triples from one sentence.

    Accepts an object with ``labels`` (annotated sentence), a tag
    sequence, or an iterable of spans.
    """
    from .bio import Span, decode_spans

    labels = getattr(sentence, "labels", sentence)
    items = list(labels)
    if items and isinstance(items[0], Span):
        spans = items
    else:
        spans = decode_spans(items).spans
    return {(s.role, s.start, s.end) for s in spans}


def srl_span_f1(predicted: Sequence, gold: Sequence) -> tuple[float, float, float]:
    """Micro-averaged span precision/recall/F1 over aligned sentences.

    A predicted span counts iff its role, start and end all match a gold
    span of the same sentence. Zero predictions give precision 0 by
    convention.
    """
    if len(predicted) != len(gold):
        raise ValueError(f"misaligned corpora: {len(predicted)} predicted vs {len(gold)} gold sentences")
    n_pred = n_gold = n_match = 0
    for pred_sent, gold_sent in zip(predicted, gold):
        pred_spans = _as_span_set(pred_sent)
        gold_spans = _as_span_set(gold_sent)
        n_pred += len(pred_spans)
        n_gold += len(gold_spans)
        n_match += len(pred_spans & gold_spans)
    precision = n_match / n_pred if n_pred else 0.0
    recall = n_match / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass
class MetricReport:
    """One named metric, optionally aggregated over seeds.

    ``value`` is the mean of ``per_seed`` when seeds are present.
    """

    name: str
    value: float
    count: int
    per_seed: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.value <= 1.0):
            raise ValueError(f"metric {self.name} value {self.value} outside [0, 1]")
        if self.count <= 0:
            raise ValueError("metric count must be positive")
        if self.per_seed:
            mean = sum(self.per_seed.values()) / len(self.per_seed)
            if abs(mean - self.value) > 1e-12:
                raise ValueError(f"value {self.value} is not the mean of per-seed values ({mean})")

    @classmethod
    def aggregate(cls, name: str, per_seed: dict[int, float], count: int) -> "MetricReport":
        value = sum(per_seed.values()) / len(per_seed)
        return cls(name=name, value=value, count=count, per_seed=dict(per_seed))

    @property
    def percent(self) -> float:
        return 100.0 * self.value

    def to_record(self) -> dict:
        record = {
            "count": self.count,
            "metric": self.name,
            "per_seed": {str(k): self.per_seed[k] for k in sorted(self.per_seed)},
            "value": self.value,
        }
        return record

    def to_json_line(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def format_report_table(reports: Sequence[MetricReport]) -> str:
    """Aligned plain-text table, byte-stable for diffing."""
    header = f"{'metric':<24} {'value%':>8} {'count':>7}  per-seed"
    lines = [header, "-" * len(header)]
    for report in reports:
        seeds = " ".join(f"{report.per_seed[k]*100:.2f}" for k in sorted(report.per_seed))
        lines.append(f"{report.name:<24} {report.percent:>8.2f} {report.count:>7}  {seeds}")
    return "\n".join(lines) + "\n"
