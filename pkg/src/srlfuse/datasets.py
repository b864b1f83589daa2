"""Corpus readers and writers for the three task formats.

Formats:
  * role-labeled sentences: three whitespace-separated columns per line
    (token, predicate flag 0/1, BIO tag), blank line between sentences;
  * sentence pairs: JSON lines with sentence1, sentence2, gold_label,
    records labeled "-" skipped with a count;
  * reading triples: the standard span-QA JSON layout (data ->
    paragraphs -> qas, answers carrying text and answer_start).

``builtin:NAME`` paths resolve to the bundled toy corpora.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from importlib import resources
from pathlib import Path

from . import bio
from .entailment import ENTAILMENT_LABELS, EntailmentExample
from .metrics import normalize_answer
from .reader import ReadingExample
from .srl import SrlExample

logger = logging.getLogger(__name__)

BUILTIN_FILES = {
    "toy_srl": "toy_srl.conll",
    "toy_nli": "toy_nli.jsonl",
    "toy_squad": "toy_squad.json",
}

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class DataError(ValueError):
    """A corpus file failed validation; the message carries the location."""


def simple_tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def tokenize_with_offsets(text: str) -> list[tuple[str, int, int]]:
    """Tokens with [start, end) character offsets into ``text``."""
    return [(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def builtin_path(name: str) -> Path:
    if name not in BUILTIN_FILES:
        raise DataError(f"unknown builtin dataset {name!r}; choose from {sorted(BUILTIN_FILES)}")
    return Path(str(resources.files("srlfuse.data").joinpath(BUILTIN_FILES[name])))


def resolve_data_path(spec: str | Path) -> Path:
    """Resolve a user-supplied data path, honoring the builtin: scheme."""
    spec = str(spec)
    if spec.startswith("builtin:"):
        return builtin_path(spec.removeprefix("builtin:"))
    path = Path(spec)
    if not path.exists():
        raise DataError(f"data file not found: {spec}")
    return path


def file_checksum(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


# -- role-labeled sentences --------------------------------------------------

def load_srl_conll(path) -> list[SrlExample]:
    path = resolve_data_path(path)
    examples: list[SrlExample] = []
    tokens: list[str] = []
    flags: list[int] = []
    tags: list[str] = []

    def flush(line_no: int):
        if not tokens:
            return
        index = len(examples)
        if sum(flags) != 1:
            raise DataError(f"{path}:{line_no}: example {index} has {sum(flags)} predicate flags, needs exactly 1")
        if not bio.is_valid_sequence(tags):
            raise DataError(f"{path}:{line_no}: example {index} gold tags are not valid BIO: {tags}")
        examples.append(SrlExample(tuple(tokens), flags.index(1), tuple(tags)))
        tokens.clear()
        flags.clear()
        tags.clear()

    with open(path, encoding="utf-8") as fh:
        line_no = 0
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                flush(line_no)
                continue
            parts = line.split()
            if len(parts) != 3:
                raise DataError(f"{path}:{line_no}: expected 'token flag tag', got {line!r}")
            token, flag, tag = parts
            if flag not in ("0", "1"):
                raise DataError(f"{path}:{line_no}: predicate flag must be 0 or 1")
            try:
                bio.BioTag.parse(tag)
            except ValueError as exc:
                raise DataError(f"{path}:{line_no}: {exc}") from None
            tokens.append(token)
            flags.append(int(flag))
            tags.append(tag)
        flush(line_no + 1)
    if not examples:
        raise DataError(f"{path}: no sentences found")
    return examples


def save_srl_conll(path, examples) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            for i, (token, tag) in enumerate(zip(ex.tokens, ex.tags)):
                fh.write(f"{token} {int(i == ex.predicate_index)} {tag}\n")
            fh.write("\n")


# -- sentence pairs ------------------------------------------------------------

def load_nli_jsonl(path) -> tuple[list[EntailmentExample], int]:
    """Returns (examples, skipped) where skipped counts unlabeled records."""
    path = resolve_data_path(path)
    examples: list[EntailmentExample] = []
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                premise, hypothesis = record["sentence1"], record["sentence2"]
                label = record["gold_label"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataError(f"{path}:{line_no}: bad record: {exc}") from None
            if label == "-":
                skipped += 1
                continue
            if label not in ENTAILMENT_LABELS:
                raise DataError(f"{path}:{line_no}: unknown label {label!r}")
            examples.append(EntailmentExample(tuple(simple_tokenize(premise)),
                                              tuple(simple_tokenize(hypothesis)), label))
    if skipped:
        logger.info("skipped %d unlabeled records in %s", skipped, path)
    if not examples:
        raise DataError(f"{path}: no labeled pairs found")
    return examples, skipped


# -- reading triples -----------------------------------------------------------

def _align_answer(context: str, answer_text: str, answer_start: int, qid: str):
    """Map a character-offset answer onto token indices.

    Prefers the tokens overlapping the official character range; falls
    back to the first token window whose normalized text matches the
    normalized answer.
    """
    spans = tokenize_with_offsets(context)
    tokens = [s[0] for s in spans]
    target = normalize_answer(answer_text)
    if 0 <= answer_start < len(context):
        answer_stop = answer_start + len(answer_text)
        covered = [i for i, (_, lo, hi) in enumerate(spans) if hi > answer_start and lo < answer_stop]
        if covered:
            start, end = covered[0], covered[-1]
            if normalize_answer(" ".join(tokens[start : end + 1])) == target:
                return tokens, start, end
    n_answer = len(simple_tokenize(answer_text))
    for width in (n_answer,) if n_answer else ():
        for start in range(0, len(tokens) - width + 1):
            if normalize_answer(" ".join(tokens[start : start + width])) == target:
                return tokens, start, start + width - 1
    raise DataError(f"question {qid}: answer {answer_text!r} could not be aligned to the document")


def load_squad(path) -> list[ReadingExample]:
    path = resolve_data_path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON: {exc}") from None
    examples: list[ReadingExample] = []
    try:
        articles = payload["data"]
    except (TypeError, KeyError):
        raise DataError(f"{path}: missing top-level 'data' list") from None
    for article in articles:
        for paragraph in article.get("paragraphs", []):
            context = paragraph["context"]
            for qa in paragraph.get("qas", []):
                qid = str(qa.get("id", f"q{len(examples)}"))
                answers = qa.get("answers", [])
                if not answers:
                    raise DataError(f"question {qid}: no answers")
                first = answers[0]
                tokens, start, end = _align_answer(context, first["text"],
                                                   int(first.get("answer_start", -1)), qid)
                examples.append(ReadingExample(
                    document=tuple(tokens),
                    question=tuple(simple_tokenize(qa["question"])),
                    answer_start=start,
                    answer_end=end,
                    answer_texts=tuple(a["text"] for a in answers),
                    qid=qid,
                ))
    if not examples:
        raise DataError(f"{path}: no questions found")
    return examples
