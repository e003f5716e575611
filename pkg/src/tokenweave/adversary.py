"""Attack harnesses used by the collusion and capture suites.

Every attacker here knows the public digests and whatever artifacts it was
handed (tokens, share rows, match sets) but never the partition layout. An
attack succeeds when some candidate bit string digest-verifies a key.
"""

from __future__ import annotations

import copy
import itertools
from typing import Iterable, Sequence

import numpy as np

from . import bitcore, gridscheme
from .codebook import fuse_blind
from .bitcore import KeySet
from .gridscheme import NodeShare


def _isolated_segments(stack: np.ndarray, length: int) -> list:
    return [stack[0, pos] for _, pos in bitcore.isolated_classes(stack, length)]


def verify_candidates(firsts: Iterable, seconds: Iterable, keys: KeySet) -> set:
    """Try every first/second pairing (both polarities of the second) against the digests."""
    found = set()
    seconds = list(seconds)
    for a in firsts:
        for b in seconds:
            for tail in (b, 1 - b):
                k = keys.identify(np.concatenate([a, tail]).astype(np.uint8))
                if k is not None:
                    found.add(k)
    return found


def segment_attack(segments: Sequence[np.ndarray], keys: KeySet) -> set:
    """Digest-check isolated segments, whole or paired into halves."""
    if keys.half_bits is None:
        return {k for s in segments if (k := keys.identify(s)) is not None}
    return verify_candidates(segments, segments, keys)


def token_stack_attack(token_rows: Sequence[np.ndarray], keys: KeySet, length: int) -> set:
    """Keys recoverable from a stack of broadcast tokens alone."""
    stack = np.vstack([np.asarray(t, dtype=np.uint8) for t in token_rows])
    return segment_attack(_isolated_segments(stack, length), keys)


def share_pool_attack(shares: Sequence[NodeShare], keys: KeySet, length: int) -> set:
    """Keys recoverable by stacking the share rows of colluding nodes, no token."""
    stack = np.vstack([s.rows for s in shares])
    return segment_attack(_isolated_segments(stack, length), keys)


def pooled_fragment_attack(shares: Sequence[NodeShare], token_row: np.ndarray, key: int,
                           number: int, keys: KeySet, positional: bool = True) -> bool:
    """Whether colluding non-privileged nodes can rebuild ``key`` from one token.

    Each node contributes the match sets its own fusion computes for the key's
    two half classes. The value-only pool combines extractions from match sets
    that already have the right size. The positional pool also intersects the
    match sets of every pair of nodes, which strips the random noise that
    blocks each node on its own.
    """
    token_row = np.asarray(token_row, dtype=np.uint8)
    lp = keys.half_bits
    xsets, ysets = [], []
    for s in shares:
        xs, ys = gridscheme.half_matches(s, token_row, number)
        xsets.append(frozenset(xs.tolist()))
        ysets.append(frozenset(ys.tolist()))

    def candidates(sets):
        pool = set(sets)
        if positional:
            pool |= {a & b for a, b in itertools.combinations(set(sets), 2)}
        return [np.array(sorted(p)) for p in pool if len(p) == lp]

    firsts = [token_row[p] for p in candidates(xsets)]
    seconds = [token_row[p] for p in candidates(ysets)]
    return key in verify_candidates(firsts, seconds, keys)


def captured_replay(share: NodeShare, token_rows: Sequence[np.ndarray], keys: KeySet,
                    v: int) -> set:
    """Keys a captured node's share yields when every past token is replayed.

    Returns only keys beyond those the node had already unlocked.
    """
    probe = copy.deepcopy(share)
    known = set(probe.unlocked)
    probe.unlocked, probe.spans = {}, {}
    for t in token_rows:
        if probe.codeword is not None:
            gridscheme.fuse_token(probe, t, keys)
        else:
            fuse_blind(probe, t, keys, v)
    return set(probe.unlocked) - known
