"""Deterministic generators for the bundled desk-scale corpora.

Run ``python -m srlfuse.toydata --out-dir src/srlfuse/data`` to
regenerate the files shipped with the package. Generation is pure
list-cycling, so the output is byte-stable.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

NAMES = ["Charlie", "Sherry", "Alice", "Bob", "Carol", "David", "Emma", "Frank"]
VERBS = ["sold", "gave", "sent", "showed", "mailed", "brought", "handed"]
VERB_BASE = {"sold": "sell", "gave": "give", "sent": "send", "showed": "show",
             "mailed": "mail", "brought": "bring", "handed": "hand"}
NOUNS = ["book", "letter", "guitar", "camera", "ball", "bicycle"]
TIMES = ["week", "month", "year"]
COLORS = ["red", "blue", "green"]

ROCK_CONTEXT = (
    "There are three major types of rock: igneous, sedimentary, and metamorphic. "
    "The rock cycle is an important concept in geology which illustrates the relationships "
    "between these three types of rock, and magma. When a rock crystallizes from melt "
    "(magma and/or lava), it is an igneous rock. This rock can be weathered and eroded, "
    "and then redeposited and lithified into a sedimentary rock, or be turned into a "
    "metamorphic rock due to heat and pressure that change the mineral content of the rock "
    "which gives it a characteristic fabric. The sedimentary rock can then be subsequently "
    "turned into a metamorphic rock due to heat and pressure and is then weathered, eroded, "
    "deposited, and lithified, ultimately becoming a sedimentary rock. Sedimentary rock may "
    "also be re-eroded and redeposited, and metamorphic rock may also undergo additional "
    "metamorphism. All three types of rocks may be re-melted; when this happens, a new magma "
    "is formed, from which an igneous rock may once again crystallize."
)
ROCK_QUESTION = "What changes the mineral content of a rock?"
ROCK_ANSWER = "heat and pressure"


def role_labeled_sentences() -> list[tuple[list[str], int, list[str]]]:
    """Thirty single-predicate sentences over a five-role inventory."""
    sentences = []

    def add(tokens, tags):
        sentences.append((tokens, tags.index("B-V"), tags))

    for i in range(12):  # agent verb theme recipient time
        name, verb = NAMES[i % 8], VERBS[i % 7]
        noun, other, time = NOUNS[i % 6], NAMES[(i + 1) % 8], TIMES[i % 3]
        add([name, verb, "a", noun, "to", other, "last", time],
            ["B-ARG0", "B-V", "B-ARG1", "I-ARG1", "B-ARG2", "I-ARG2", "B-AM-TMP", "I-AM-TMP"])
    for i in range(8):  # agent verb theme recipient
        name, verb = NAMES[(i + 1) % 8], VERBS[(i + 2) % 7]
        noun, other = NOUNS[(i + 1) % 6], NAMES[(i + 5) % 8]
        add([name, verb, "a", noun, "to", other],
            ["B-ARG0", "B-V", "B-ARG1", "I-ARG1", "B-ARG2", "I-ARG2"])
    for i in range(6):  # agent verb theme time
        name, verb, noun = NAMES[(i + 2) % 8], VERBS[(i + 4) % 7], NOUNS[(i + 2) % 6]
        add([name, verb, "a", noun, "yesterday"],
            ["B-ARG0", "B-V", "B-ARG1", "I-ARG1", "B-AM-TMP"])
    for i in range(4):  # agent verb theme
        name, verb, noun = NAMES[(i + 4) % 8], VERBS[(i + 1) % 7], NOUNS[(i + 3) % 6]
        add([name, verb, "the", noun],
            ["B-ARG0", "B-V", "B-ARG1", "I-ARG1"])
    return sentences


def write_srl(path: Path) -> None:
    lines = []
    for tokens, predicate, tags in role_labeled_sentences():
        for i, (token, tag) in enumerate(zip(tokens, tags)):
            lines.append(f"{token} {int(i == predicate)} {tag}")
        lines.append("")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


SUBJECTS = [("A man", "man"), ("A woman", "woman"), ("The boy", "boy"),
            ("The girl", "girl"), ("A swimmer", "swimmer"), ("A sailor", "sailor")]
WATER_VERBS = [("parasails", "parasailed"), ("swims", "swam"), ("surfs", "surfed"),
               ("rows", "rowed"), ("paddles", "paddled"), ("sails", "sailed")]
WATER_ADJS = [("choppy", "calm"), ("calm", "choppy")]


def sentence_pairs() -> list[dict]:
    """Two hundred labeled pairs plus three unlabeled records."""
    records = []
    for subject, noun in SUBJECTS:
        for verb3s, past in WATER_VERBS:
            for adj, anti in WATER_ADJS:
                premise = f"{subject} {verb3s} in the {adj} water."
                records.append({"sentence1": premise,
                                "sentence2": f"The water was {adj} as the {noun} {past}.",
                                "gold_label": "entailment"})
                records.append({"sentence1": premise,
                                "sentence2": f"The {noun} {past} in the {anti} water.",
                                "gold_label": "contradiction"})
                records.append({"sentence1": premise,
                                "sentence2": f"The {noun} is competing in a competition.",
                                "gold_label": "neutral"})
    records = records[:200]
    for i in range(3):
        subject, noun = SUBJECTS[i]
        records.append({"sentence1": f"{subject} rests near the calm water.",
                        "sentence2": f"The {noun} was tired.",
                        "gold_label": "-"})
    return records


def write_nli(path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for record in sentence_pairs():
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def reading_paragraphs() -> list[dict]:
    """Forty-nine template paragraphs plus the rock-cycle passage."""
    paragraphs = []
    for i in range(49):
        name, verb = NAMES[i % 8], VERBS[i % 7]
        noun, other = NOUNS[i % 6], NAMES[(i + 3) % 8]
        time, color = TIMES[i % 3], COLORS[i % 3]
        context = f"{name} {verb} a {noun} to {other} last {time}. The {noun} was {color}."
        kind = i % 3
        if kind == 0:
            question = f"What did {name} {VERB_BASE[verb]}?"
            answer = f"a {noun}"
        elif kind == 1:
            question = f"Who got the {noun}?"
            answer = other
        else:
            question = f"When did {name} {VERB_BASE[verb]} the {noun}?"
            answer = f"last {time}"
        paragraphs.append({
            "context": context,
            "qas": [{"id": f"toy-{i:03d}", "question": question,
                     "answers": [{"text": answer, "answer_start": context.index(answer)}]}],
        })
    paragraphs.append({
        "context": ROCK_CONTEXT,
        "qas": [{"id": "rock-000", "question": ROCK_QUESTION,
                 "answers": [{"text": ROCK_ANSWER, "answer_start": ROCK_CONTEXT.index(ROCK_ANSWER)}]}],
    })
    return paragraphs


def write_squad(path: Path) -> None:
    payload = {"version": "1.1",
               "data": [{"title": "toy", "paragraphs": reading_paragraphs()}]}
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="regenerate the bundled toy corpora")
    parser.add_argument("--out-dir", type=Path, default=Path("src/srlfuse/data"))
    args = parser.parse_args(argv)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_srl(args.out_dir / "toy_srl.conll")
    write_nli(args.out_dir / "toy_nli.jsonl")
    write_squad(args.out_dir / "toy_squad.json")
    print(f"wrote toy corpora to {args.out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
