"""Independent oracles and check utilities shared by the test modules."""

import numpy as np
import torch

from srlfuse.bio import TagAlphabet, start_mask, transition_mask


def brute_force_viterbi(emissions, mask, start):
    """Enumerate every tag path, filter by the masks, take the best.

    Scores accumulate position by position (same addition order as any
    left-to-right decoder), and ties resolve to the path that is
    smallest at the latest differing position. Vectorized over all
    n_tags ** length paths.
    """
    emissions = np.asarray(emissions, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    start = np.asarray(start, dtype=bool)
    length, n_tags = emissions.shape
    total = n_tags**length
    idx = np.arange(total, dtype=np.int64)
    score = np.zeros(total, dtype=np.float64)
    valid = np.ones(total, dtype=bool)
    prev = None
    for pos in range(length):
        digit = (idx // n_tags ** (length - 1 - pos)) % n_tags
        score = score + emissions[pos, digit]
        if pos == 0:
            valid &= start[digit]
        else:
            valid &= mask[prev, digit]
        prev = digit
    score[~valid] = -np.inf
    best_score = score.max()
    assert np.isfinite(best_score), "no valid path in oracle"
    ties = np.flatnonzero(score == best_score)
    columns = [((ties // n_tags ** (length - 1 - pos)) % n_tags) for pos in range(length)]
    # lexsort's last key is primary, so passing columns in order sorts by
    # the latest position first: exactly latest-differing-position order.
    winner = ties[np.lexsort(tuple(columns))[0]]
    path = [int((winner // n_tags ** (length - 1 - pos)) % n_tags) for pos in range(length)]
    return path, float(best_score)


def random_bio_instance(rng, max_len=8, max_roles=3):
    """Random (emissions, alphabet, masks) pair for decoder tests."""
    n_roles = int(rng.integers(1, max_roles + 1))
    length = int(rng.integers(1, max_len + 1))
    alphabet = TagAlphabet([f"R{i}" for i in range(n_roles)])
    if rng.random() < 0.5:
        emissions = rng.integers(0, 3, size=(length, len(alphabet))).astype(np.float64)
    else:
        emissions = rng.normal(size=(length, len(alphabet)))
    return emissions, alphabet, transition_mask(alphabet), start_mask(alphabet)


def random_valid_tag_ids(alphabet, length, rng):
    """Random walk through the transition mask from a legal start tag."""
    mask = transition_mask(alphabet)
    start = start_mask(alphabet)
    ids = [int(rng.choice(np.flatnonzero(start)))]
    for _ in range(length - 1):
        ids.append(int(rng.choice(np.flatnonzero(mask[ids[-1]]))))
    return ids


def gradient_check(loss_fn, parameters, rng, n_coords=20, step=1e-5, rtol=1e-3):
    """Central finite differences against autograd on random coordinates.

    ``loss_fn`` must be deterministic and differentiable; parameters
    must be float64 leaves.
    """
    loss = loss_fn()
    grads = torch.autograd.grad(loss, parameters, allow_unused=True)
    flat = []
    for p, g in zip(parameters, grads):
        if g is None:
            continue
        for offset in range(p.numel()):
            flat.append((p, offset, float(g.reshape(-1)[offset])))
    assert flat, "no differentiable coordinates found"
    picks = rng.choice(len(flat), size=min(n_coords, len(flat)), replace=False)
    worst = 0.0
    for k in picks:
        param, offset, analytic = flat[int(k)]
        with torch.no_grad():
            original = float(param.reshape(-1)[offset])
            param.reshape(-1)[offset] = original + step
            up = float(loss_fn())
            param.reshape(-1)[offset] = original - step
            down = float(loss_fn())
            param.reshape(-1)[offset] = original
        numeric = (up - down) / (2 * step)
        scale = max(abs(analytic), abs(numeric), 1e-8)
        rel = abs(analytic - numeric) / scale
        worst = max(worst, rel)
        assert rel <= rtol, (f"gradient mismatch at coordinate {int(k)}: "
                             f"analytic {analytic:.6g} vs numeric {numeric:.6g} (rel {rel:.2e})")
    return worst
