"""Constrained max-score decoding over per-token log-potential matrices.

Transitions are hard constraints (0 or -inf), not learned scores: a path
either respects the mask or is excluded. All arithmetic stays in log
space. Ties between equal-score paths break toward the lowest tag id at
the latest differing position, which falls out of first-index argmax in
both the forward pass and the backtrace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class DecodePath:
    """A decoded tag-id sequence and its emission-sum score."""

    tags: list[int]
    score: float


def _check_emissions(emissions) -> np.ndarray:
    emissions = np.asarray(emissions, dtype=np.float64)
    if emissions.ndim != 2 or emissions.shape[0] == 0 or emissions.shape[1] == 0:
        raise ValueError(f"emissions must be a non-empty 2-d matrix, got shape {emissions.shape}")
    if not np.all(np.isfinite(emissions)):
        raise ValueError("emissions must be finite")
    return emissions


def viterbi_decode(emissions, mask, start) -> DecodePath:
    """Best valid path under a transition mask and a start mask.

    Args:
        emissions: [length, n_tags] log-potentials.
        mask: [n_tags, n_tags] boolean matrix; (i, j) allows j after i.
        start: [n_tags] boolean vector of permitted first tags.

    Returns:
        The maximum-score path among those the masks admit.
    """
    emissions = _check_emissions(emissions)
    mask = np.asarray(mask, dtype=bool)
    start = np.asarray(start, dtype=bool)
    length, n_tags = emissions.shape
    if mask.shape != (n_tags, n_tags):
        raise ValueError(f"transition mask shape {mask.shape} does not match {n_tags} tags")
    if start.shape != (n_tags,):
        raise ValueError(f"start mask shape {start.shape} does not match {n_tags} tags")

    trans = np.where(mask, 0.0, -np.inf)
    delta = np.where(start, emissions[0], -np.inf)
    backptr = np.zeros((length, n_tags), dtype=np.int64)
    for t in range(1, length):
        candidates = delta[:, None] + trans
        backptr[t] = np.argmax(candidates, axis=0)
        delta = emissions[t] + np.max(candidates, axis=0)

    last = int(np.argmax(delta))
    score = float(delta[last])
    if not np.isfinite(score):
        raise ValueError("no valid path exists under the given masks")
    tags = [last]
    for t in range(length - 1, 0, -1):
        tags.append(int(backptr[t, tags[-1]]))
    tags.reverse()
    return DecodePath(tags=tags, score=score)


def greedy_decode(emissions) -> DecodePath:
    """Per-token argmax, ignoring all transition structure.

    Diagnostic baseline only; the result may violate BIO validity.
    """
    emissions = _check_emissions(emissions)
    tags = [int(i) for i in np.argmax(emissions, axis=1)]
    score = float(sum(emissions[t, i] for t, i in enumerate(tags)))
    return DecodePath(tags=tags, score=score)
