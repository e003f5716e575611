"""Code-word schemes with fixed partitions.

Two schemes live here. The legacy codebook stacks binary code words and looks
for columns whose pattern class occurs once. The distance scheme gives each
node one balanced code word ``[S_i | ~S_i]`` so that flipping a single bit
produces a token that unlocks exactly one key in exactly one node.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import bitcore
from .bitcore import KeySet, PartitionLayout, PatternClass
from .errors import ConstructionError, UsageError


def _matrix(rows) -> np.ndarray:
    m = np.asarray(rows, dtype=np.uint8)
    if m.ndim == 1:
        m = m[None, :]
    if m.ndim != 2 or m.shape[0] == 0:
        raise UsageError("need a non-empty list of equal-length code words")
    return m


def column_classes(rows) -> list:
    m = _matrix(rows)
    return [PatternClass.of(m[:, j]) for j in range(m.shape[1])]


def check_rule1(rows) -> bool:
    """True iff no column pattern occurs exactly once (up to complement)."""
    counts = Counter(column_classes(rows))
    return all(c > 1 for c in counts.values())


def unique_columns(rows) -> list:
    """(column index, class) for every column whose class occurs exactly once."""
    classes = column_classes(rows)
    counts = Counter(classes)
    return [(j, c) for j, c in enumerate(classes) if counts[c] == 1]


def complement_quotient(codewords) -> list:
    """Drop code words that are the complement of an earlier one."""
    out, seen = [], set()
    for w in _matrix(codewords):
        t = tuple(int(b) for b in w)
        if tuple(1 - b for b in t) in seen or t in seen:
            continue
        seen.add(t)
        out.append(t)
    return out


def token_codewords(layout_format: Sequence[int]) -> list:
    """All code words obeying a repeated-variable format, e.g. ``z1 z2 z3 z2 z3 z1``.

    Every such word satisfies Rule 1 on its own. Complements are redundant,
    so only the quotient is returned (variables sorted by first appearance,
    the first variable pinned to 1).
    """
    names = list(dict.fromkeys(layout_format))
    words = []
    for values in itertools.product((1, 0), repeat=len(names)):
        assign = dict(zip(names, values))
        words.append([assign[z] for z in layout_format])
    return complement_quotient(words)


def codeword_unlocks(share_codewords, token_codeword) -> set:
    """Key indices revealed by stacking one token code word over a node's code words."""
    stack = np.vstack([_matrix(token_codeword), _matrix(share_codewords)])
    return {j for j, _ in unique_columns(stack)}


def bit_level_unlocks(share_rows, token_row, keys: KeySet, share_codewords,
                      token_codeword) -> dict:
    """Bit-level counterpart of :func:`codeword_unlocks`.

    For every unique code-word column the matching bit pattern is searched in
    the actual rows; the token bits found there are digest-checked, which also
    identifies the key.
    """
    lp = len(token_row) // len(token_codeword)
    stack_codes = np.vstack([_matrix(token_codeword), _matrix(share_codewords)])
    stack_bits = np.vstack([token_row, share_rows])
    found = {}
    for _, cls in unique_columns(stack_codes):
        pos = bitcore.find_pattern_positions(stack_bits, cls)
        cand = bitcore.extract_key_half(token_row, pos, lp)
        k = keys.identify(cand)
        if k is not None:
            found[k] = keys.keys[k]
    return found


def legacy_fuse(node_share_codewords, token_codewords, keys: Optional[KeySet] = None,
                layout: Optional[PartitionLayout] = None) -> set:
    """Cumulative set of keys a node holds after all the given tokens.

    With ``keys`` and ``layout`` the bit-level extraction is run as well and
    must agree with the code-word analysis.
    """
    table = legacy_unlock_table([node_share_codewords], token_codewords, keys, layout)
    return table[-1][0]


def legacy_unlock_table(node_shares: Sequence, token_codewords, keys: Optional[KeySet] = None,
                        layout: Optional[PartitionLayout] = None) -> list:
    """Cumulative unlocked key sets, one row per token, one column per node."""
    tokens = _matrix(token_codewords)
    bit_level = keys is not None and layout is not None
    if bit_level:
        X, Y = bitcore.interleave_keys(keys, layout, bitcore.legacy_placement(keys.v))
        share_rows = [np.vstack([bitcore.build_row(c, X, Y, layout) for c in _matrix(s)])
                      for s in node_shares]
    held = [set() for _ in node_shares]
    table = []
    for t in tokens:
        token_row = bitcore.build_row(t, X, Y, layout) if bit_level else None
        for n, share in enumerate(node_shares):
            coded = codeword_unlocks(share, t)
            if bit_level:
                bits = bit_level_unlocks(share_rows[n], token_row, keys, share, t)
                if set(bits) != coded:
                    raise ConstructionError(
                        f"node {n}: bit-level unlocks {sorted(bits)} disagree with "
                        f"code-word unlocks {sorted(coded)}")
            held[n] |= coded
        table.append([set(h) for h in held])
    return table


# -- distance-property scheme -------------------------------------------------

def max_distance_nodes(v: int) -> int:
    """Number of nodes a v-key distance scheme supports."""
    if v < 4 or v % 4:
        raise UsageError(f"v must be a positive multiple of 4, got {v}")
    h, q = v // 2, v // 4
    return math.factorial(h) // (2 * math.factorial(q) ** 2)


def hamming(a, b) -> int:
    return int(np.count_nonzero(np.asarray(a, dtype=np.uint8) != np.asarray(b, dtype=np.uint8)))


@dataclass(frozen=True, eq=False)
class DistanceShareMatrix:
    S: np.ndarray
    N: np.ndarray

    @property
    def n(self) -> int:
        return self.S.shape[0]

    @property
    def v(self) -> int:
        return self.N.shape[1]

    def distance_range(self) -> tuple:
        d = [hamming(a, b) for a, b in itertools.combinations(self.N, 2)]
        return (min(d), max(d)) if d else (None, None)

    def check(self) -> list:
        """Violated invariants, as messages (empty when the matrix is sound)."""
        problems = []
        q = self.v // 4
        for i, row in enumerate(self.S):
            if int(row.sum()) != q:
                problems.append(f"row {i} of S is not balanced")
        for i, j in itertools.combinations(range(self.n), 2):
            a, b = self.S[i], self.S[j]
            if np.array_equal(a, b) or np.array_equal(a, 1 - b):
                problems.append(f"rows {i} and {j} of S are equal or complementary")
            d = hamming(self.N[i], self.N[j])
            if not 4 <= d <= self.v - 4:
                problems.append(f"H(N{i}, N{j}) = {d} outside [4, {self.v - 4}]")
        return problems


def gen_distance_matrix(v: int, seed_row) -> DistanceShareMatrix:
    """All non-complementary rearrangements of a balanced seed row.

    The seed row comes first, the rest follow in lexicographic order; of each
    complementary pair the earlier word is kept.
    """
    s1 = bitcore.as_bits(seed_row)
    if v % 4 or len(s1) != v // 2:
        raise UsageError(f"seed row must have v/2={v // 2} bits with v divisible by 4")
    if int(s1.sum()) != v // 4:
        raise UsageError("seed row must hold v/4 ones and v/4 zeros")
    first = tuple(int(b) for b in s1)
    words = [first] + sorted(set(itertools.permutations(first)) - {first})
    S = np.array(complement_quotient(words), dtype=np.uint8)
    N = np.hstack([S, 1 - S]).astype(np.uint8)
    S.setflags(write=False)
    N.setflags(write=False)
    return DistanceShareMatrix(S, N)


def single_key_token(share_codeword, j: int) -> np.ndarray:
    """Token code word unlocking key ``j`` (0-based) only in the owner of the share."""
    row = bitcore.as_bits(share_codeword).copy()
    if not 0 <= j < len(row):
        raise UsageError(f"key index {j} out of range for a {len(row)}-key code word")
    row[j] ^= 1
    return row


def fuse_blind(share, token_row, keys: KeySet, v: int) -> dict:
    """Node-side fusion when partitions are fixed across nodes.

    The node knows neither the layout nor the token's code word. Any column
    class covering exactly one partition's worth of positions is a candidate;
    its token bits are kept when they (or their complement) match a digest.
    """
    lp = share.length // v
    stack = np.vstack([np.asarray(token_row, dtype=np.uint8)[None, :], share.rows])
    new = {}
    for _, pos in bitcore.isolated_classes(stack, lp, share.erased):
        cand = bitcore.extract_key_half(token_row, pos, lp)
        k = keys.identify(cand)
        if k is None or k in share.unlocked:
            continue
        share.unlocked[k] = keys.keys[k]
        share.spans[k] = pos
        new[k] = keys.keys[k]
    return new
