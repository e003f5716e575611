"""Bit-level MIX-SPLIT machinery.

Keys (or key halves) are interleaved into hidden partitions of a block ``X``
whose complement is ``Y``. Share and token rows select, partition by
partition, either ``X`` or ``Y`` according to a code word. Stacking rows and
scanning their columns for a pattern class isolates a partition, and the
token bits at those positions give back the key material.

Bit strings are 1-D ``numpy.uint8`` arrays holding 0/1 values.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .errors import ConstructionError, ExtractionAmbiguous, UsageError

DIGEST_DOMAIN = b"tokenweave/key-digest/v1"


class Variant(str, enum.Enum):
    LEGACY = "legacy"
    DISTANCE = "distance"
    GRID = "grid"


class RowRole(str, enum.Enum):
    SHARE = "share"
    TOKEN = "token"


def min_rows_for(v: int) -> int:
    """Smallest M with room for ``v`` pairwise non-complementary M-bit numbers."""
    m = 1
    while v > 2 ** (m - 1):
        m += 1
    return m


@dataclass(frozen=True)
class SystemParams:
    v: int
    Lp: int
    M: int
    seed: int = 0
    variant: Variant = Variant.GRID

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.v < 1:
            raise UsageError(f"need at least one key, got v={self.v}")
        if self.Lp < 8:
            raise UsageError(f"Lp must be at least 8 bits, got {self.Lp}")
        if self.M < 1:
            raise UsageError(f"M must be positive, got {self.M}")
        if not 0 <= self.seed < 2**64:
            raise UsageError("seed must fit in 64 bits")
        if self.variant is Variant.DISTANCE and self.v % 4:
            raise UsageError(f"distance variant needs v divisible by 4, got v={self.v}")
        if self.variant is Variant.GRID and self.v > 2 ** (self.M - 1):
            raise UsageError(f"M={self.M} leaves no room for {self.v} non-complementary numbers")

    @property
    def W(self) -> int:
        """Number of hidden partitions."""
        return 2 * self.v if self.variant is Variant.GRID else self.v

    @property
    def row_bits(self) -> int:
        return self.W * self.Lp

    @property
    def key_bits(self) -> int:
        # grid keys are two halves, each filling one Lp-bit partition
        return 2 * self.Lp if self.variant is Variant.GRID else self.Lp

    def rng(self, stream: int) -> np.random.Generator:
        """Independent deterministic generator for one named purpose."""
        return np.random.default_rng([self.seed, stream])


# generator stream ids
STREAM_KEYS = 1
STREAM_LAYOUT = 2
STREAM_SEEDS = 3
STREAM_TOKENS = 4
STREAM_NODES = 5


def random_bits(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.uint8)


def as_bits(value) -> np.ndarray:
    """Coerce a '0101' string or an int sequence into a bit array."""
    if isinstance(value, str):
        value = [int(c) for c in value if c in "01"]
    arr = np.asarray(value, dtype=np.uint8)
    if arr.ndim != 1 or np.any(arr > 1):
        raise UsageError("bit strings must be one-dimensional and 0/1 valued")
    return arr


def bits_to_str(bits: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in bits)


def bits_to_hex(bits: np.ndarray) -> str:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes().hex()


def hex_to_bits(text: str, n: int) -> np.ndarray:
    raw = bytes.fromhex(text)
    if len(raw) != (n + 7) // 8:
        raise ValueError(f"expected {(n + 7) // 8} bytes for {n} bits, got {len(raw)}")
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    if np.any(bits[n:]):
        raise ValueError("non-zero padding bits")
    return bits[:n].copy()


def digest(bits: np.ndarray) -> bytes:
    """Public verification digest of a key (SHA-256 over length and packed bits)."""
    bits = np.asarray(bits, dtype=np.uint8)
    h = hashlib.sha256(DIGEST_DOMAIN)
    h.update(len(bits).to_bytes(4, "big"))
    h.update(np.packbits(bits).tobytes())
    return h.digest()


@dataclass(frozen=True, eq=False)
class KeySet:
    keys: tuple
    digests: tuple
    half_bits: Optional[int] = None

    @classmethod
    def from_keys(cls, keys: Iterable, halves: bool = False) -> "KeySet":
        arrs = tuple(as_bits(k) for k in keys)
        for a in arrs:
            a.setflags(write=False)
        half = None
        if halves:
            lengths = {len(a) for a in arrs}
            if len(lengths) != 1 or next(iter(lengths)) % 2:
                raise UsageError("halved keys need a common even length")
            half = next(iter(lengths)) // 2
        return cls(arrs, tuple(digest(a) for a in arrs), half)

    @property
    def v(self) -> int:
        return len(self.keys)

    def half(self, key: int, which: int) -> np.ndarray:
        if self.half_bits is None:
            raise UsageError("this key set is not split into halves")
        h = self.half_bits
        return self.keys[key][which * h:(which + 1) * h]

    def segments(self) -> list:
        """Every unit stored in one partition: whole keys, or all halves."""
        if self.half_bits is None:
            return list(self.keys)
        return [self.half(k, w) for k in range(self.v) for w in (0, 1)]

    def identify(self, candidate: np.ndarray) -> Optional[int]:
        """Index of the key whose digest matches ``candidate`` or its complement."""
        for bits in (candidate, 1 - np.asarray(candidate, dtype=np.uint8)):
            d = digest(bits)
            for i, known in enumerate(self.digests):
                if d == known:
                    return i
        return None


def _distinct_noncomplementary(segments: Sequence[np.ndarray]) -> bool:
    seen = set()
    for s in segments:
        a, b = s.tobytes(), (1 - s).astype(np.uint8).tobytes()
        if a in seen or b in seen:
            return False
        seen.add(a)
    return True


def generate_keys(params: SystemParams, rng: Optional[np.random.Generator] = None) -> KeySet:
    """Random keys, pairwise distinct and non-complementary (grid: per half)."""
    rng = rng if rng is not None else params.rng(STREAM_KEYS)
    halves = params.variant is Variant.GRID
    count = 2 * params.v if halves else params.v
    while True:
        segs = [random_bits(rng, params.Lp) for _ in range(count)]
        if _distinct_noncomplementary(segs):
            break
    if halves:
        keys = [np.concatenate([segs[2 * k], segs[2 * k + 1]]) for k in range(params.v)]
    else:
        keys = segs
    return KeySet.from_keys(keys, halves=halves)


@dataclass(frozen=True, eq=False)
class PartitionLayout:
    """Centre-secret assignment of bit positions to hidden partitions."""

    groups: tuple
    owner: np.ndarray = field(repr=False)

    @classmethod
    def from_groups(cls, groups: Sequence[Sequence[int]]) -> "PartitionLayout":
        groups = tuple(np.sort(np.asarray(g, dtype=np.int64)) for g in groups)
        if not groups:
            raise ConstructionError("layout needs at least one partition")
        lp = len(groups[0])
        if any(len(g) != lp for g in groups):
            raise ConstructionError("partitions must all hold the same number of positions")
        total = lp * len(groups)
        owner = np.full(total, -1, dtype=np.int64)
        for j, g in enumerate(groups):
            if g.size and (g[0] < 0 or g[-1] >= total):
                raise ConstructionError("partition position out of range")
            if np.any(owner[g] != -1) or len(np.unique(g)) != len(g):
                raise ConstructionError("partitions overlap")
            owner[g] = j
        for g in groups:
            g.setflags(write=False)
        owner.setflags(write=False)
        return cls(groups, owner)

    @classmethod
    def random(cls, W: int, Lp: int, rng: np.random.Generator) -> "PartitionLayout":
        perm = rng.permutation(W * Lp)
        return cls.from_groups([perm[j * Lp:(j + 1) * Lp] for j in range(W)])

    @classmethod
    def identity(cls, W: int, Lp: int) -> "PartitionLayout":
        return cls.from_groups([range(j * Lp, (j + 1) * Lp) for j in range(W)])

    @property
    def W(self) -> int:
        return len(self.groups)

    @property
    def Lp(self) -> int:
        return len(self.groups[0])

    @property
    def size(self) -> int:
        return self.W * self.Lp

    def positions(self, partition: int) -> np.ndarray:
        return self.groups[partition]


class Fill(NamedTuple):
    """What a partition carries: a key (``half=None``) or one half of it."""

    key: int
    half: Optional[int] = None
    complemented: bool = False


def segment(keys: KeySet, fill: Fill) -> np.ndarray:
    bits = keys.keys[fill.key] if fill.half is None else keys.half(fill.key, fill.half)
    return (1 - bits).astype(np.uint8) if fill.complemented else bits


def interleave_keys(keys: KeySet, layout: PartitionLayout,
                    placement: Mapping[int, Fill]) -> tuple:
    """Build block X (and its complement Y) from a partition placement map."""
    X = np.zeros(layout.size, dtype=np.uint8)
    for p in range(layout.W):
        if p not in placement:
            raise ConstructionError(f"placement map has no entry for partition {p}")
        bits = segment(keys, placement[p])
        if len(bits) != layout.Lp:
            raise ConstructionError(
                f"partition {p} holds {layout.Lp} bits but its fill has {len(bits)}")
        X[layout.positions(p)] = bits
    return X, (1 - X).astype(np.uint8)


def legacy_placement(v: int) -> dict:
    return {j: Fill(j) for j in range(v)}


def build_row(code: Sequence[int], X: np.ndarray, Y: np.ndarray,
              layout: PartitionLayout) -> np.ndarray:
    """Row equal to X on partitions whose code bit is 1 and to Y elsewhere."""
    code = np.asarray(code, dtype=np.uint8)
    if code.shape != (layout.W,):
        raise ConstructionError(f"code word must have {layout.W} entries, got {code.size}")
    return np.where(code[layout.owner] == 1, X, Y).astype(np.uint8)


@dataclass(frozen=True)
class PatternClass:
    """Column pattern up to global complement; representative has top bit 1."""

    representative: tuple

    @classmethod
    def of(cls, column) -> "PatternClass":
        col = tuple(int(b) for b in column)
        if not col:
            raise UsageError("empty pattern")
        if col[0] == 0:
            col = tuple(1 - b for b in col)
        return cls(col)

    def __len__(self) -> int:
        return len(self.representative)

    def __str__(self) -> str:
        return "[" + " ".join(map(str, self.representative)) + "]"


def _stack(rows) -> np.ndarray:
    if len(rows) == 0:
        raise UsageError("cannot search an empty stack")
    stack = np.asarray(rows, dtype=np.uint8)
    if stack.ndim != 2:
        raise UsageError("stack rows must all have the same length")
    return stack


def canonical_columns(stack: np.ndarray) -> np.ndarray:
    """Complement every column whose top bit is 0."""
    return stack ^ (1 - stack[0])


def find_pattern_positions(stack, cls: PatternClass,
                           ignore: Optional[np.ndarray] = None) -> np.ndarray:
    """Increasing column indices whose pattern matches ``cls``.

    ``ignore`` is an optional boolean mask of positions excluded from the scan.
    """
    stack = _stack(stack)
    if len(cls) != stack.shape[0]:
        raise UsageError(f"class height {len(cls)} does not match stack height {stack.shape[0]}")
    rep = np.asarray(cls.representative, dtype=np.uint8)[:, None]
    hit = np.all(canonical_columns(stack) == rep, axis=0)
    if ignore is not None:
        hit &= ~ignore
    return np.flatnonzero(hit)


def isolated_classes(stack, length: int,
                     ignore: Optional[np.ndarray] = None) -> list:
    """Pattern classes occupying exactly ``length`` columns, with their positions.

    This is the blind form of the unique-column rule: a class confined to a
    single partition shows up exactly ``length`` times.
    """
    stack = _stack(stack)
    canon = canonical_columns(stack)
    idx = np.arange(stack.shape[1])
    if ignore is not None:
        canon, idx = canon[:, ~ignore], idx[~ignore]
    if canon.shape[1] == 0:
        return []
    uniq, inverse, counts = np.unique(canon, axis=1, return_inverse=True, return_counts=True)
    inverse = np.asarray(inverse).reshape(-1)
    out = []
    for c in np.flatnonzero(counts == length):
        out.append((PatternClass(tuple(int(b) for b in uniq[:, c])), idx[inverse == c]))
    return out


def extract_key_half(token_row: np.ndarray, positions: np.ndarray, length: int,
                     complemented: bool = False) -> np.ndarray:
    """Concatenate token bits at ``positions`` (increasing), optionally complemented."""
    positions = np.asarray(positions)
    if positions.size != length:
        raise ExtractionAmbiguous(f"{positions.size} matching positions, expected {length}")
    bits = np.asarray(token_row, dtype=np.uint8)[np.sort(positions)]
    return (1 - bits).astype(np.uint8) if complemented else bits
