"""Controlled simultaneous key release on a two-dimensional key grid.

Every key is split into two halves, and every node gets a digit code word of
length ``2v``: the first ``v`` digits (one row of ``C1``) say which key's first
half sits in each x-partition, the last ``v`` digits (one row of ``C2``) do the
same for the second halves in the y-partitions. A key therefore lives at a
point ``(x, y)`` in each node, and no two nodes share a point for the same key.

A token releases key ``K`` at a set of points sharing one coordinate by
filling the x-partition(s) with ``K1`` and the y-partition(s) with ``~K2``;
everything else is random.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import bitcore
from .bitcore import Fill, KeySet, PartitionLayout, PatternClass
from .errors import PlanError, UsageError


@dataclass(frozen=True)
class KeyTable:
    """Number assigned to each key; index ``k`` holds the number of key ``k``."""

    numbers: tuple
    M: int

    def __post_init__(self):
        nums = tuple(int(n) for n in self.numbers)
        object.__setattr__(self, "numbers", nums)
        top = 2 ** self.M - 1
        for n in nums:
            if not 0 <= n <= top:
                raise UsageError(f"{n} does not fit in M={self.M} bits")
        for i, a in enumerate(nums):
            for b in nums[i + 1:]:
                if a == b or a == top - b:
                    raise UsageError(f"numbers {a} and {b} are equal or complementary")

    @property
    def v(self) -> int:
        return len(self.numbers)

    def key_of(self, number: int) -> int:
        return self.numbers.index(number)

    def bits(self, number: int) -> tuple:
        """Binary digits of a number, most significant first (row 0 first)."""
        return tuple((number >> (self.M - 1 - m)) & 1 for m in range(self.M))


def build_key_table(v: int, M: int, rng: Optional[np.random.Generator] = None) -> KeyTable:
    """One number per complement pair.

    Without ``rng`` the numbers are 1, 2, ..., then the all-ones word, which
    gives {1, 2, 3, 7} for v=4, M=3. With ``rng`` both the pairs and the member
    taken from each pair are random.
    """
    if v < 1:
        raise UsageError("need at least one key")
    if v > 2 ** (M - 1):
        raise UsageError(f"only {2 ** (M - 1)} complement pairs exist for M={M}, need {v}")
    top = 2 ** M - 1
    pairs = [(k, top - k) for k in range(1, 2 ** (M - 1))] + [(top, 0)]
    if rng is None:
        return KeyTable(tuple(p[0] for p in pairs[:v]), M)
    chosen = rng.choice(len(pairs), size=v, replace=False)
    return KeyTable(tuple(int(pairs[c][rng.integers(2)]) for c in chosen), M)


def build_circulant(seed_row: Sequence[int], table: Optional[KeyTable] = None) -> np.ndarray:
    """Row ``j`` is the seed row circularly shifted right ``j`` times."""
    R = np.asarray(seed_row, dtype=np.int64)
    if R.ndim != 1 or R.size == 0:
        raise UsageError("seed row must be a non-empty sequence")
    if len(set(R.tolist())) != R.size:
        raise UsageError("seed row repeats a number")
    if table is not None and sorted(R.tolist()) != sorted(table.numbers):
        raise UsageError("seed row must contain every key-table number exactly once")
    C = np.vstack([np.roll(R, j) for j in range(R.size)])
    C.setflags(write=False)
    return C


@dataclass(frozen=True)
class DigitCodeword:
    digits: tuple

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))
        if len(self.digits) % 2:
            raise UsageError("digit code word needs an even length")

    @property
    def v(self) -> int:
        return len(self.digits) // 2

    def check(self, table: KeyTable) -> None:
        first, second = self.digits[:self.v], self.digits[self.v:]
        for half in (first, second):
            if sorted(half) != sorted(table.numbers):
                raise UsageError("each half must hold every key-table number exactly once")

    def binary_rows(self, M: int) -> np.ndarray:
        """Row m holds bit m (most significant first) of every digit."""
        d = np.asarray(self.digits, dtype=np.int64)
        return np.vstack([(d >> (M - 1 - m)) & 1 for m in range(M)]).astype(np.uint8)

    def __str__(self) -> str:
        return " ".join(map(str, self.digits))


def node_share_codeword(i: int, C1: np.ndarray, C2: np.ndarray) -> DigitCodeword:
    """Code word of node ``i``: row ``i // v`` of C1 followed by row ``i % v`` of C2."""
    v = C1.shape[0]
    if not 0 <= i < v * v:
        raise UsageError(f"node id {i} outside [0, {v * v}); at most v^2 nodes are supported")
    q, r = divmod(i, v)
    return DigitCodeword(tuple(C1[q].tolist()) + tuple(C2[r].tolist()))


def key_coordinates(codeword: DigitCodeword, table: KeyTable) -> dict:
    """Map key index -> (x, y), 1-based partition numbers with y in [v+1, 2v]."""
    v = codeword.v
    d = codeword.digits
    return {k: (d[:v].index(n) + 1, v + d[v:].index(n) + 1) for k, n in enumerate(table.numbers)}


def node_placement(codeword: DigitCodeword, table: KeyTable) -> dict:
    v = codeword.v
    return {p: Fill(table.key_of(n), 0 if p < v else 1) for p, n in enumerate(codeword.digits)}


@dataclass(eq=False)
class NodeShare:
    """Share rows held by one node plus its cumulative unlock bookkeeping.

    ``erased`` marks positions wiped by capture hardening; ``spans`` keeps, per
    unlocked key, the union of the two partitions it was found in.
    """

    rows: np.ndarray
    codeword: Optional[DigitCodeword] = None
    erased: np.ndarray = None
    unlocked: dict = field(default_factory=dict)
    spans: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=np.uint8))
        if self.erased is None:
            self.erased = np.zeros(self.rows.shape[1], dtype=bool)

    @property
    def M(self) -> int:
        return self.rows.shape[0]

    @property
    def length(self) -> int:
        return self.rows.shape[1]


def generate_node_share(codeword: DigitCodeword, keys: KeySet, table: KeyTable,
                        layout: PartitionLayout) -> NodeShare:
    """Rows carry each partition's key half directly where the digit bit is 1."""
    codeword.check(table)
    X, Y = bitcore.interleave_keys(keys, layout, node_placement(codeword, table))
    rows = np.vstack([bitcore.build_row(code, X, Y, layout)
                      for code in codeword.binary_rows(table.M)])
    return NodeShare(rows, codeword)


def half_classes(number: int, M: int) -> tuple:
    """Stack classes (token on top) of the direct first half and complemented second half."""
    bits = tuple((number >> (M - 1 - m)) & 1 for m in range(M))
    return PatternClass.of((1,) + bits), PatternClass.of((0,) + bits)


@dataclass(frozen=True, eq=False)
class GridToken:
    row: np.ndarray
    fills: dict

    def instances(self) -> dict:
        """Nodes reached per key: |filled x-partitions| * |filled y-partitions|."""
        return {k: len(pts) for k, pts in token_points(self.fills).items() if pts}

    def points(self) -> dict:
        """Key -> set of (x, y) points released by this token."""
        return token_points(self.fills)


def is_valid_subset(points: Iterable) -> bool:
    pts = list(points)
    return bool(pts) and (len({p[0] for p in pts}) == 1 or len({p[1] for p in pts}) == 1)


def random_fill(keys: KeySet, length: int, rng: np.random.Generator) -> np.ndarray:
    """Random partition content differing from every key half and its complement."""
    banned = set()
    for s in keys.segments():
        banned.add(s.tobytes())
        banned.add((1 - s).astype(np.uint8).tobytes())
    while True:
        bits = bitcore.random_bits(rng, length)
        if bits.tobytes() not in banned:
            return bits


def build_grid_token(requests: Sequence, keys: KeySet, layout: PartitionLayout,
                     rng: np.random.Generator) -> GridToken:
    """Token releasing each requested key at its points, random elsewhere.

    ``requests`` is a sequence of ``(key, points)`` with 1-based ``(x, y)``
    points. All partitions are first filled with random content, then key
    halves are written over them.
    """
    v = layout.W // 2
    fills: dict = {}
    wanted: dict = {}
    for key, points in requests:
        pts = {(int(x), int(y)) for x, y in points}
        if not is_valid_subset(pts):
            raise PlanError(f"points {sorted(pts)} for key {key} share neither x nor y")
        for x, y in pts:
            if not (1 <= x <= v and v + 1 <= y <= 2 * v):
                raise PlanError(f"point {(x, y)} outside the {v}-key grid")
            for p, f in ((x - 1, Fill(key, 0, False)), (y - 1, Fill(key, 1, True))):
                if fills.get(p, f) != f:
                    raise PlanError(f"partition {p + 1} requested for two different fills")
                fills[p] = f
        wanted.setdefault(key, set()).update(pts)
    for key, pts in token_points(fills).items():
        if pts != wanted[key]:
            extra = sorted(pts - wanted[key])
            raise PlanError(f"fills for key {key} would also release it at {extra}")
    row = np.zeros(layout.size, dtype=np.uint8)
    for p in range(layout.W):
        row[layout.positions(p)] = random_fill(keys, layout.Lp, rng)
    for p, f in fills.items():
        row[layout.positions(p)] = bitcore.segment(keys, f)
    row.setflags(write=False)
    return GridToken(row, {p: fills.get(p) for p in range(layout.W)})


def token_points(fills: Mapping) -> dict:
    xs, ys = {}, {}
    for p, f in fills.items():
        if f is None:
            continue
        (xs if f.half == 0 else ys).setdefault(f.key, set()).add(p + 1)
    return {k: {(x, y) for x in xs[k] for y in ys.get(k, ())} for k in xs}


def half_matches(share: NodeShare, token_row: np.ndarray, number: int) -> tuple:
    """Positions matching the first-half and second-half classes of ``number``."""
    stack = np.vstack([np.asarray(token_row, dtype=np.uint8)[None, :], share.rows])
    cx, cy = half_classes(number, share.M)
    return (bitcore.find_pattern_positions(stack, cx, share.erased),
            bitcore.find_pattern_positions(stack, cy, share.erased))


def fuse_token(share: NodeShare, token_row: np.ndarray, keys: KeySet) -> dict:
    """Fuse a broadcast token with a node share; returns newly unlocked keys.

    A key counts as unlocked only when both half searches isolate exactly one
    partition's worth of positions and the concatenated halves match a
    published digest. Failures are silent. ``keys`` is used for its digests
    only.
    """
    if share.codeword is None:
        raise UsageError("grid fusion needs the node's digit code word")
    lp = share.length // len(share.codeword.digits)
    new = {}
    for number in dict.fromkeys(share.codeword.digits):
        xs, ys = half_matches(share, token_row, number)
        if xs.size != lp or ys.size != lp:
            continue
        first = bitcore.extract_key_half(token_row, xs, lp)
        second = bitcore.extract_key_half(token_row, ys, lp, complemented=True)
        cand = np.concatenate([first, second])
        k = keys.identify(cand)
        if k is None or k in share.unlocked:
            continue
        if bitcore.digest(cand) != keys.digests[k]:
            cand = (1 - cand).astype(np.uint8)
        share.unlocked[k] = cand
        share.spans[k] = np.union1d(xs, ys)
        new[k] = share.unlocked[k]
    return new
