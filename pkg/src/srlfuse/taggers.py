"""Token-level tag providers and verbal predicate identification.

The bundled POS fallback is a closed-class lexicon plus suffix
heuristics: deterministic, dependency-free, and good enough to find the
verbs in desk-scale corpora. Corpora that carry gold POS bypass it
entirely. A gazetteer-based named-entity tagger backs the alternative
tag-vocabulary experiments.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Protocol, Sequence

from .bio import TagAlphabet

# Penn treebank verb tags; auxiliaries and copulas are not filtered out.
VERB_TAGS = frozenset({"VB", "VBD", "VBG", "VBN", "VBP", "VBZ"})

PENN_TAGS = (
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD",
    "NN", "NNS", "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR",
    "RBS", "RP", "SYM", "TO", "UH", "VB", "VBD", "VBG", "VBN", "VBP",
    "VBZ", "WDT", "WP", "WP$", "WRB", ".", ",", ":",
)


class PosTaggingError(RuntimeError):
    """Raised when a POS provider fails; carries the sentence context."""


@dataclass(frozen=True)
class Token:
    """A surface token, optionally carrying a gold POS tag."""

    text: str
    pos: str | None = None

    def __post_init__(self):
        if not self.text:
            raise ValueError("token text must be non-empty")


class PosProvider(Protocol):
    def tag(self, tokens: Sequence[str]) -> list[str]: ...


def _bundled(name: str) -> str:
    return resources.files("srlfuse.data").joinpath(name).read_text(encoding="utf-8")


def _load_lexicon(text: str) -> dict[str, str]:
    lexicon = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        word, tag = line.split()
        lexicon[word.lower()] = tag
    return lexicon


class LexiconPosTagger:
    """Deterministic fallback POS tagger.

    Order of checks: lexicon, numerals, capitalization, -ly adverbs,
    inflected forms of lexicon verbs, generic suffixes, NN default.
    Stateless after construction; safe for concurrent use.
    """

    def __init__(self, lexicon_path=None):
        if lexicon_path is None:
            text = _bundled("pos_lexicon.txt")
        else:
            with open(lexicon_path, encoding="utf-8") as fh:
                text = fh.read()
        self._lexicon = _load_lexicon(text)

    def tag(self, tokens: Sequence[str]) -> list[str]:
        if not tokens:
            raise ValueError("cannot tag an empty token list")
        return [self._tag_word(t) for t in tokens]

    def _tag_word(self, word: str) -> str:
        lower = word.lower()
        if lower in self._lexicon:
            return self._lexicon[lower]
        if lower.replace(".", "", 1).replace(",", "").isdigit():
            return "CD"
        if word[0].isupper():
            return "NNP"
        if lower.endswith("ly"):
            return "RB"
        verb = self._inflected_verb(lower)
        if verb:
            return verb
        if lower.endswith("ing"):
            return "VBG"
        if lower.endswith("ed"):
            return "VBD"
        if lower.endswith("s") and not lower.endswith("ss"):
            return "NNS"
        return "NN"

    def _inflected_verb(self, word: str) -> str | None:
        """Map inflections of known VB lemmas to their Penn tag."""
        candidates = [
            ("ies", "y", "VBZ"), ("es", "", "VBZ"), ("s", "", "VBZ"),
            ("ied", "y", "VBD"), ("ed", "", "VBD"), ("ed", "e", "VBD"), ("d", "", "VBD"),
            ("ing", "", "VBG"), ("ing", "e", "VBG"),
        ]
        for suffix, replacement, tag in candidates:
            if not word.endswith(suffix) or len(word) <= len(suffix):
                continue
            stems = [word[: -len(suffix)] + replacement]
            stem = stems[0]
            if len(stem) >= 2 and stem[-1] == stem[-2]:  # doubled consonant: swimming
                stems.append(stem[:-1])
            for candidate in stems:
                if self._lexicon.get(candidate) == "VB":
                    return tag
        return None


_default_pos_tagger: LexiconPosTagger | None = None


def default_pos_tagger() -> LexiconPosTagger:
    global _default_pos_tagger
    if _default_pos_tagger is None:
        _default_pos_tagger = LexiconPosTagger()
    return _default_pos_tagger


def identify_predicates(tokens: Sequence[Token | str], tagger: PosProvider | None = None) -> list[bool]:
    """Flag every token whose POS tag is a verb tag.

    Tokens that all carry gold POS bypass the provider. Zero predicates
    is a legal outcome (the caller assigns all-O labels downstream).
    """
    if not tokens:
        raise ValueError("cannot identify predicates in an empty sentence")
    tokens = [t if isinstance(t, Token) else Token(t) for t in tokens]
    if all(t.pos is not None for t in tokens):
        tags = [t.pos for t in tokens]
    else:
        tagger = tagger or default_pos_tagger()
        texts = [t.text for t in tokens]
        try:
            tags = tagger.tag(texts)
        except Exception as exc:  # provider failures carry sentence context
            raise PosTaggingError(f"POS tagging failed for sentence {texts!r}") from exc
        if len(tags) != len(tokens):
            raise PosTaggingError(f"provider returned {len(tags)} tags for {len(tokens)} tokens: {texts!r}")
    return [t in VERB_TAGS for t in tags]


class GazetteerNeTagger:
    """Greedy longest-match named-entity tagger over a phrase gazetteer.

    Emits BIO tags over the gazetteer's label set; unmatched tokens get O.
    """

    def __init__(self, gazetteer_path=None):
        if gazetteer_path is None:
            text = _bundled("ne_gazetteer.txt")
        else:
            with open(gazetteer_path, encoding="utf-8") as fh:
                text = fh.read()
        self._phrases: dict[tuple[str, ...], str] = {}
        labels: list[str] = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            phrase, label = line.rsplit(maxsplit=1)
            self._phrases[tuple(phrase.lower().split())] = label
            if label not in labels:
                labels.append(label)
        if not self._phrases:
            raise ValueError("gazetteer is empty")
        self._max_len = max(len(p) for p in self._phrases)
        self.alphabet = TagAlphabet(sorted(labels))

    def tag(self, tokens: Sequence[str]) -> list[str]:
        if not tokens:
            raise ValueError("cannot tag an empty token list")
        lowered = [t.lower() for t in tokens]
        tags = ["O"] * len(tokens)
        i = 0
        while i < len(tokens):
            match = None
            for width in range(min(self._max_len, len(tokens) - i), 0, -1):
                label = self._phrases.get(tuple(lowered[i : i + width]))
                if label is not None:
                    match = (width, label)
                    break
            if match is None:
                i += 1
                continue
            width, label = match
            tags[i] = f"B-{label}"
            for k in range(i + 1, i + width):
                tags[k] = f"I-{label}"
            i += width
        return tags
