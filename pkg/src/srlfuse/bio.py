"""BIO tag alphabet, span encoding/decoding, and legal-transition structure.

Tag sequences are the unit the tagger emits and the decoder constrains.
Tag id 0 is always O, so counting non-O labels reduces to counting
nonzero ids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

OUTSIDE = "O"


@dataclass(frozen=True)
class BioTag:
    """A single BIO tag: O, or B/I paired with a role name."""

    kind: str
    role: str | None = None

    def __post_init__(self):
        if self.kind not in ("B", "I", "O"):
            raise ValueError(f"tag kind must be B, I or O, got {self.kind!r}")
        if self.kind == "O":
            if self.role is not None:
                raise ValueError("O tag cannot carry a role")
        elif not self.role:
            raise ValueError(f"{self.kind} tag requires a role")

    def __str__(self) -> str:
        return self.kind if self.kind == "O" else f"{self.kind}-{self.role}"

    @classmethod
    def parse(cls, text: str) -> "BioTag":
        if text == OUTSIDE:
            return O_TAG
        if len(text) > 2 and text[0] in ("B", "I") and text[1] == "-":
            return cls(text[0], text[2:])
        raise ValueError(f"not a BIO tag: {text!r}")


O_TAG = BioTag("O")


@dataclass(frozen=True)
class Span:
    """A labeled token span, inclusive on both ends."""

    role: str
    start: int
    end: int

    def __post_init__(self):
        if not self.role:
            raise ValueError("span role must be non-empty")
        if not (0 <= self.start <= self.end):
            raise ValueError(f"bad span bounds ({self.start}, {self.end})")


@dataclass
class DecodedSpans:
    """decode_spans output: recovered spans plus positions repaired.

    A position is repaired when an I tag had no live span of the same role
    to its left; it is then treated as a span start.
    """

    spans: list[Span] = field(default_factory=list)
    repairs: list[int] = field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return not self.repairs


class TagAlphabet:
    """Role inventory with its derived tag list and tag-id bijection.

    The tag list is O followed by B-r, I-r for each role in order, so
    ``len(tags) == 2 * len(roles) + 1`` and id 0 is O.
    """

    def __init__(self, roles: Sequence[str]):
        roles = list(roles)
        if not roles:
            raise ValueError("alphabet needs at least one role")
        if any(not r for r in roles):
            raise ValueError("role names must be non-empty")
        if len(set(roles)) != len(roles):
            raise ValueError(f"duplicate roles in {roles}")
        self.roles: tuple[str, ...] = tuple(roles)
        self.tags: tuple[BioTag, ...] = (O_TAG,) + tuple(
            BioTag(kind, role) for role in roles for kind in ("B", "I")
        )
        self._ids = {str(tag): i for i, tag in enumerate(self.tags)}

    def __len__(self) -> int:
        return len(self.tags)

    def __contains__(self, tag) -> bool:
        return str(tag) in self._ids

    def __eq__(self, other) -> bool:
        return isinstance(other, TagAlphabet) and self.roles == other.roles

    def index(self, tag: BioTag | str) -> int:
        key = str(tag)
        if key not in self._ids:
            raise KeyError(f"tag {key!r} not in alphabet over roles {self.roles}")
        return self._ids[key]

    def tag(self, tag_id: int) -> BioTag:
        return self.tags[tag_id]

    def encode_ids(self, tags: Iterable[BioTag | str]) -> list[int]:
        return [self.index(t) for t in tags]

    def decode_ids(self, ids: Iterable[int]) -> list[BioTag]:
        return [self.tags[i] for i in ids]

    @classmethod
    def from_tag_strings(cls, tags: Iterable[str]) -> "TagAlphabet":
        """Build a data-driven alphabet from observed tag strings.

        Roles are ordered by first appearance, B and I occurrences both
        counting as appearances.
        """
        roles: list[str] = []
        for text in tags:
            tag = BioTag.parse(text)
            if tag.role is not None and tag.role not in roles:
                roles.append(tag.role)
        return cls(roles)

    def save(self, path) -> None:
        """Write one role per line (diffable vocab file)."""
        with open(path, "w", encoding="utf-8") as fh:
            for role in self.roles:
                fh.write(role + "\n")

    @classmethod
    def load(cls, path) -> "TagAlphabet":
        with open(path, encoding="utf-8") as fh:
            roles = [line.strip() for line in fh if line.strip()]
        return cls(roles)


def encode_spans(spans: Sequence[Span], length: int) -> list[BioTag]:
    """Encode non-overlapping spans over ``length`` tokens as BIO tags."""
    tags: list[BioTag] = [O_TAG] * length
    claimed = [False] * length
    for span in spans:
        if span.end >= length:
            raise ValueError(f"span {span} exceeds sentence length {length}")
        for i in range(span.start, span.end + 1):
            if claimed[i]:
                raise ValueError(f"span {span} overlaps an earlier span at token {i}")
            claimed[i] = True
        tags[span.start] = BioTag("B", span.role)
        for i in range(span.start + 1, span.end + 1):
            tags[i] = BioTag("I", span.role)
    return tags


def decode_spans(tags: Sequence[BioTag | str]) -> DecodedSpans:
    """Recover spans from any tag sequence, repairing dangling I tags.

    Total function: an I tag with no live same-role span to its left is
    treated as a span start and its position recorded in ``repairs``.
    """
    parsed = [t if isinstance(t, BioTag) else BioTag.parse(t) for t in tags]
    result = DecodedSpans()
    open_role: str | None = None
    open_start = 0

    def close(end: int):
        nonlocal open_role
        if open_role is not None:
            result.spans.append(Span(open_role, open_start, end))
            open_role = None

    for i, tag in enumerate(parsed):
        if tag.kind == "O":
            close(i - 1)
        elif tag.kind == "B":
            close(i - 1)
            open_role, open_start = tag.role, i
        elif open_role == tag.role:
            continue
        else:
            close(i - 1)
            result.repairs.append(i)
            open_role, open_start = tag.role, i
    close(len(parsed) - 1)
    return result


def is_valid_sequence(tags: Sequence[BioTag | str]) -> bool:
    """True iff the sequence decodes with zero repairs."""
    return decode_spans(tags).is_valid


def transition_mask(alphabet: TagAlphabet) -> np.ndarray:
    """Boolean matrix where entry (i, j) allows tag j to follow tag i.

    The only forbidden transitions are into I-r from anything other than
    B-r or I-r.
    """
    n = len(alphabet)
    mask = np.ones((n, n), dtype=bool)
    for j, to_tag in enumerate(alphabet.tags):
        if to_tag.kind != "I":
            continue
        for i, from_tag in enumerate(alphabet.tags):
            mask[i, j] = from_tag.kind in ("B", "I") and from_tag.role == to_tag.role
    return mask


def start_mask(alphabet: TagAlphabet) -> np.ndarray:
    """Boolean vector of tags a sequence may start with (no I tags)."""
    return np.array([tag.kind != "I" for tag in alphabet.tags], dtype=bool)
