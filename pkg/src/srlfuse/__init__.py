"""Role labeling and tag-embedding fusion for text-comprehension models."""

__version__ = "0.1.0"

from .bio import (BioTag, DecodedSpans, Span, TagAlphabet, decode_spans, encode_spans,
                  is_valid_sequence, start_mask, transition_mask)
from .embeddings import (CachedContextualEmbedder, CharCnnEmbedder, HashContextualEmbedder,
                         PredicateIndicatorEmbedding, TagEmbeddingTable, TagProvider,
                         TokenEmbedder, WordEmbeddingTable, fuse)
from .entailment import ENTAILMENT_LABELS, EntailmentExample, EsimClassifier
from .metrics import MetricReport, accuracy, exact_match, normalize_answer, srl_span_f1, token_f1
from .reader import ReadingExample, SpanReader, extract_span
from .srl import AnnotatedSentence, SrlExample, SrlTagger
from .taggers import GazetteerNeTagger, LexiconPosTagger, Token, identify_predicates
from .viterbi import DecodePath, greedy_decode, viterbi_decode

__all__ = [
    "AnnotatedSentence", "BioTag", "CachedContextualEmbedder", "CharCnnEmbedder",
    "DecodePath", "DecodedSpans", "ENTAILMENT_LABELS", "EntailmentExample",
    "EsimClassifier", "GazetteerNeTagger", "HashContextualEmbedder", "LexiconPosTagger",
    "MetricReport", "PredicateIndicatorEmbedding", "ReadingExample", "Span", "SpanReader",
    "SrlExample", "SrlTagger", "TagAlphabet", "TagEmbeddingTable", "TagProvider", "Token",
    "TokenEmbedder", "WordEmbeddingTable", "accuracy", "decode_spans", "encode_spans",
    "exact_match", "extract_span", "fuse", "greedy_decode", "identify_predicates",
    "is_valid_sequence", "normalize_answer", "srl_span_f1", "start_mask", "token_f1",
    "transition_mask", "viterbi_decode",
]
