"""Greedy token planning over key grids.

A target configuration is one grid per key: the ``(x, y)`` points of the
nodes where that key must be released. A token can release a key at any
*valid subset* (points sharing an x or a y coordinate) and can carry several
keys as long as their partitions do not collide. Planning walks the grids in
key order, takes the largest valid subset clear of the partitions already
used by the current token, and emits a token once nothing more fits.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .bitcore import KeySet, PartitionLayout
from .errors import PlanError
from .gridscheme import GridToken, build_grid_token, token_points


class TokenClass(str, enum.Enum):
    EFFICIENT = "Efficient"
    INEFFICIENT = "Inefficient"


@dataclass(frozen=True)
class TargetConfiguration:
    """Per-key point sets, index ``k`` holding the grid of key ``k``."""

    grids: tuple

    def __post_init__(self):
        object.__setattr__(self, "grids", tuple(frozenset((int(x), int(y)) for x, y in g)
                                                for g in self.grids))

    @classmethod
    def from_mapping(cls, v: int, grids: Mapping) -> "TargetConfiguration":
        return cls(tuple(grids.get(k, ()) for k in range(v)))

    @property
    def v(self) -> int:
        return len(self.grids)

    @property
    def total_points(self) -> int:
        return sum(len(g) for g in self.grids)

    def check(self, node_points: Optional[Sequence] = None) -> None:
        v = self.v
        for k, grid in enumerate(self.grids):
            for x, y in grid:
                if not (1 <= x <= v and v + 1 <= y <= 2 * v):
                    raise PlanError(f"key {k}: point {(x, y)} outside the {v}-key grid")
                if node_points is not None and (x, y) not in node_points[k]:
                    raise PlanError(f"key {k}: no deployed node sits at {(x, y)}")


def find_largest_valid_subset(grid: Iterable) -> set:
    """Largest subset sharing one x or one y; ties prefer x, then the smaller value."""
    by_x, by_y = {}, {}
    for p in grid:
        by_x.setdefault(p[0], set()).add(p)
        by_y.setdefault(p[1], set()).add(p)
    if not by_x:
        return set()
    bx = min(by_x, key=lambda x: (-len(by_x[x]), x))
    by = min(by_y, key=lambda y: (-len(by_y[y]), y))
    return set(by_x[bx]) if len(by_x[bx]) >= len(by_y[by]) else set(by_y[by])


def grid_span(R: Iterable, A: Iterable) -> set:
    """Points of A sharing an x or a y coordinate with some point of R."""
    xs = {c[0] for c in R}
    ys = {c[1] for c in R}
    return {p for p in A if p[0] in xs or p[1] in ys}


def star(A: Iterable, B: Iterable) -> set:
    """A minus its grid span with respect to B."""
    A = set(A)
    return A - grid_span(B, A)


def classify_token(fills: Mapping, v: int) -> tuple:
    """Total released instances |K| and the efficiency class of a token."""
    total = sum(len(pts) for pts in token_points(fills).values())
    return total, TokenClass.EFFICIENT if total >= v else TokenClass.INEFFICIENT


@dataclass
class TokenPlan:
    tokens: list = field(default_factory=list)
    requests: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)

    def summary(self, v: int) -> list:
        """(|K|, class) for every token in order."""
        return [classify_token(t.fills, v) for t in self.tokens]


def plan_requests(target: TargetConfiguration) -> list:
    """Greedy grouping of grid points into per-token request lists."""
    remaining = [set(g) for g in target.grids]
    batches = []
    while any(remaining):
        used: set = set()
        batch = []
        for k, grid in enumerate(remaining):
            if not grid:
                continue
            chosen = find_largest_valid_subset(star(grid, used))
            if not chosen:
                continue
            grid -= chosen
            used |= chosen
            batch.append((k, frozenset(chosen)))
        batches.append(batch)
    return batches


def token_construction(target: TargetConfiguration, keys: KeySet, layout: PartitionLayout,
                       rng: np.random.Generator,
                       node_points: Optional[Sequence] = None) -> TokenPlan:
    """Build the token sequence realising ``target``.

    ``node_points`` (per key, the set of points occupied by deployed nodes) is
    used to reject targets that name a point no node sits at.
    """
    if target.v != keys.v or layout.W != 2 * keys.v:
        raise PlanError("target, keys and layout disagree on the number of keys")
    target.check(node_points)
    plan = TokenPlan()
    for batch in plan_requests(target):
        plan.tokens.append(build_grid_token(batch, keys, layout, rng))
        plan.requests.append(batch)
    return plan


def realised_points(tokens: Sequence[GridToken], v: int) -> TargetConfiguration:
    """Union of points released by a token sequence, as a configuration."""
    grids = [set() for _ in range(v)]
    for t in tokens:
        for k, pts in token_points(t.fills).items():
            grids[k] |= pts
    return TargetConfiguration(tuple(grids))
