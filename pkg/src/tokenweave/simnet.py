"""Deterministic simulated broadcast network.

A :class:`CentreState` owns every secret (keys, layout, code words) and
issues one :class:`~tokenweave.gridscheme.NodeShare` per node. A
:class:`Network` broadcasts token rows to all nodes, each of which fuses the
token with its share and accumulates unlocked keys. Nodes derive combination
keys ``H(Ka, Kb, ...)`` over their unlocked keys; group tables and revocation
are computed from that material.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import bitcore, codebook, gridscheme
from .bitcore import STREAM_LAYOUT, STREAM_SEEDS, KeySet, PartitionLayout, SystemParams, Variant
from .errors import SpecError, UsageError
from .gridscheme import KeyTable, NodeShare
from .planner import TargetConfiguration

GROUP_DOMAIN = b"tokenweave/group-key/v1"
DEFAULT_COMBINATION_CAP = 3


def expr_name(expr: Sequence[int]) -> str:
    """Human label of a key expression, 1-based: K3 or H(K1,K3)."""
    names = ",".join(f"K{k + 1}" for k in expr)
    return names if len(expr) == 1 else f"H({names})"


def parse_expr(text: str) -> tuple:
    body = text.strip()
    if body.startswith("H(") and body.endswith(")"):
        body = body[2:-1]
    try:
        return tuple(sorted(int(p.strip().lstrip("Kk")) - 1 for p in body.split(",")))
    except ValueError:
        raise UsageError(f"cannot parse key expression {text!r}") from None


def combination_key(expr: Sequence[int], unlocked: Mapping) -> bytes:
    """Value of a key expression; multi-key hashes use ascending key order."""
    expr = tuple(sorted(expr))
    if len(expr) == 1:
        return np.packbits(unlocked[expr[0]]).tobytes()
    h = hashlib.sha256(GROUP_DOMAIN)
    for k in expr:
        bits = unlocked[k]
        h.update(k.to_bytes(4, "big") + len(bits).to_bytes(4, "big"))
        h.update(np.packbits(bits).tobytes())
    return h.digest()


@dataclass
class CentreState:
    params: SystemParams
    keys: KeySet
    layout: PartitionLayout
    node_ids: tuple
    codewords: list
    table: Optional[KeyTable] = None
    seeds: tuple = ()
    token_log: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @classmethod
    def grid(cls, params: SystemParams, node_ids: Optional[Sequence[int]] = None,
             n: Optional[int] = None, table: Optional[KeyTable] = None,
             seeds: Optional[tuple] = None, keys: Optional[KeySet] = None,
             layout: Optional[PartitionLayout] = None) -> "CentreState":
        """Grid-scheme centre. Circulant seeds and node ids default to seeded choices."""
        if params.variant is not Variant.GRID:
            raise UsageError("grid centre needs variant=grid")
        v = params.v
        table = table or gridscheme.build_key_table(v, params.M)
        if table.v != v or table.M != params.M:
            raise UsageError("key table does not match v and M")
        if seeds is None:
            rng = params.rng(STREAM_SEEDS)
            seeds = (tuple(int(x) for x in rng.permutation(table.numbers)),
                     tuple(int(x) for x in rng.permutation(table.numbers)))
        C1 = gridscheme.build_circulant(seeds[0], table)
        C2 = gridscheme.build_circulant(seeds[1], table)
        if node_ids is None:
            node_ids = range(v * v if n is None else n)
        node_ids = tuple(int(i) for i in node_ids)
        if len(set(node_ids)) != len(node_ids):
            raise UsageError("node ids must be distinct")
        codewords = [gridscheme.node_share_codeword(i, C1, C2) for i in node_ids]
        keys = keys or bitcore.generate_keys(params)
        layout = layout or PartitionLayout.random(params.W, params.Lp, params.rng(STREAM_LAYOUT))
        return cls(params, keys, layout, node_ids, codewords, table,
                   (tuple(seeds[0]), tuple(seeds[1])))

    @classmethod
    def legacy(cls, params: SystemParams, N, node_rows: Sequence[Sequence[int]],
               keys: Optional[KeySet] = None,
               layout: Optional[PartitionLayout] = None) -> "CentreState":
        """Legacy codebook centre; node ``i`` receives rows ``node_rows[i]`` of N."""
        N = np.asarray(N, dtype=np.uint8)
        if N.shape[1] != params.v:
            raise UsageError("node-share matrix needs v columns")
        codewords = [N[list(rows)] for rows in node_rows]
        keys = keys or bitcore.generate_keys(params)
        layout = layout or PartitionLayout.random(params.W, params.Lp, params.rng(STREAM_LAYOUT))
        return cls(params, keys, layout, tuple(range(len(codewords))), codewords)

    @classmethod
    def distance(cls, params: SystemParams, seed_row, n: Optional[int] = None) -> "CentreState":
        matrix = codebook.gen_distance_matrix(params.v, seed_row)
        count = matrix.n if n is None else n
        if not 1 <= count <= matrix.n:
            raise UsageError(f"distance scheme supports at most {matrix.n} nodes")
        codewords = [matrix.N[i:i + 1] for i in range(count)]
        keys = bitcore.generate_keys(params)
        layout = PartitionLayout.random(params.W, params.Lp, params.rng(STREAM_LAYOUT))
        return cls(params, keys, layout, tuple(range(count)), codewords, seeds=(tuple(seed_row),))

    # -- share issuance -------------------------------------------------------

    def issue_share(self, i: int) -> NodeShare:
        if self.params.variant is Variant.GRID:
            return gridscheme.generate_node_share(self.codewords[i], self.keys, self.table,
                                                  self.layout)
        X, Y = bitcore.interleave_keys(self.keys, self.layout,
                                       bitcore.legacy_placement(self.params.v))
        rows = np.vstack([bitcore.build_row(c, X, Y, self.layout) for c in self.codewords[i]])
        return NodeShare(rows)

    def token_row(self, codeword) -> np.ndarray:
        """Token row for a binary code word (legacy and distance schemes)."""
        X, Y = bitcore.interleave_keys(self.keys, self.layout,
                                       bitcore.legacy_placement(self.params.v))
        return bitcore.build_row(codeword, X, Y, self.layout)

    # -- grid coordinates -----------------------------------------------------

    def coordinates(self, i: int) -> dict:
        return gridscheme.key_coordinates(self.codewords[i], self.table)

    def node_points(self) -> list:
        """Per key, the set of points occupied by deployed nodes."""
        pts = [set() for _ in range(self.params.v)]
        for i in range(self.n):
            for k, p in self.coordinates(i).items():
                pts[k].add(p)
        return pts

    def node_at(self, key: int, point: tuple) -> Optional[int]:
        for i in range(self.n):
            if self.coordinates(i)[key] == tuple(point):
                return i
        return None

    def grids_for(self, holders: Mapping[int, Iterable[int]]):
        """Target configuration releasing key ``k`` at nodes ``holders[k]``."""
        grids = [set() for _ in range(self.params.v)]
        for k, nodes in holders.items():
            for i in nodes:
                grids[k].add(self.coordinates(i)[k])
        return TargetConfiguration(tuple(grids))


@dataclass
class NodeState:
    index: int
    share: NodeShare
    cap: int = DEFAULT_COMBINATION_CAP
    material: dict = field(default_factory=dict)

    @property
    def unlocked(self) -> dict:
        return self.share.unlocked

    def refresh_material(self) -> None:
        """Recompute every combination key over at most ``cap`` unlocked keys."""
        held = sorted(self.unlocked)
        self.material = {}
        for size in range(1, min(self.cap, len(held)) + 1):
            for expr in itertools.combinations(held, size):
                self.material[expr] = combination_key(expr, self.unlocked)


def fuse(share: NodeShare, token_row: np.ndarray, keys: KeySet, v: int) -> dict:
    """Node-side fusion for either family of schemes."""
    if share.codeword is not None:
        return gridscheme.fuse_token(share, token_row, keys)
    return codebook.fuse_blind(share, token_row, keys, v)


class Network:
    """Loss-free ordered broadcast from the centre to every node."""

    def __init__(self, centre: CentreState, cap: int = DEFAULT_COMBINATION_CAP):
        self.centre = centre
        self.nodes = [NodeState(i, centre.issue_share(i), cap) for i in range(centre.n)]
        self.log: list = []

    def broadcast(self, token_row: np.ndarray, order: Optional[Sequence[int]] = None) -> dict:
        """Deliver one token; returns node index -> set of newly unlocked keys."""
        token_row = np.asarray(token_row, dtype=np.uint8)
        if token_row.shape != (self.centre.layout.size,):
            raise UsageError(f"token must have {self.centre.layout.size} bits")
        order = range(len(self.nodes)) if order is None else order
        deltas = {}
        for i in order:
            node = self.nodes[i]
            new = fuse(node.share, token_row, self.centre.keys, self.centre.params.v)
            if new:
                deltas[i] = set(new)
            node.refresh_material()
        self.log.append(token_row.copy())
        return dict(sorted(deltas.items()))

    def holders(self, key: int) -> set:
        return {n.index for n in self.nodes if key in n.unlocked}

    def unlocked_sets(self) -> list:
        return [set(n.unlocked) for n in self.nodes]


@dataclass
class GroupTable:
    groups: dict

    def rows(self) -> list:
        """(sorted members, expression) ordered by group size then members."""
        return sorted(((tuple(sorted(m)), e) for m, e in self.groups.items()),
                      key=lambda r: (len(r[0]), r[0]))


def derive_groups(nodes: Sequence[NodeState], spec: Iterable) -> GroupTable:
    """Check and key every (members, expression) group of a specification.

    Each member must be able to derive the expression, and no listed node
    outside the group may.
    """
    groups = {}
    values = {}
    for members, expr in spec:
        members = frozenset(members)
        expr = tuple(sorted(expr))
        for i in sorted(members):
            if expr not in nodes[i].material:
                raise SpecError(f"node {i} cannot derive {expr_name(expr)}")
            values.setdefault(expr, nodes[i].material[expr])
            if nodes[i].material[expr] != values[expr]:
                raise SpecError(f"members disagree on the value of {expr_name(expr)}")
        outsiders = [n.index for n in nodes if n.index not in members and expr in n.material]
        if outsiders:
            raise SpecError(f"{expr_name(expr)} is also derivable by non-members {outsiders}")
        groups[members] = expr
    return GroupTable(groups)


@dataclass
class Revocation:
    leaving: int
    retained: dict
    groups: GroupTable


def _simplest(exprs: Iterable) -> tuple:
    return min(exprs, key=lambda e: (len(e), e))


def revoke(nodes: Sequence[NodeState], leaving: int) -> Revocation:
    """Discard everything the leaver can derive and regroup the rest.

    Every expression still held by two or more remaining nodes keys the group
    of its holders; when several expressions key the same group the one with
    the fewest keys wins.
    """
    if not 0 <= leaving < len(nodes):
        raise UsageError(f"no node {leaving}")
    burnt = set(nodes[leaving].material)
    retained = {n.index: {e for e in n.material if e not in burnt}
                for n in nodes if n.index != leaving}
    holders: dict = {}
    for i, exprs in retained.items():
        for e in exprs:
            holders.setdefault(e, set()).add(i)
    by_members: dict = {}
    for e, members in holders.items():
        if len(members) >= 2:
            by_members.setdefault(frozenset(members), []).append(e)
    groups = GroupTable({m: _simplest(es) for m, es in by_members.items()})
    return Revocation(leaving, retained, groups)


def capture_harden(node: NodeState, key: int) -> NodeShare:
    """Erase the share bits in the union of an unlocked key's two partitions."""
    share = node.share
    if key not in share.unlocked:
        raise UsageError(f"key {key} is not unlocked at node {node.index}")
    span = share.spans[key]
    share.rows[:, span] = 0
    share.erased[span] = True
    return share


def state_document(net: Network) -> dict:
    """Canonical serialisable form of every node's state."""
    nodes = []
    for n in net.nodes:
        s = n.share
        nodes.append({
            "index": n.index,
            "rows": [bitcore.bits_to_hex(r) for r in s.rows],
            "erased": bitcore.bits_to_hex(s.erased.astype(np.uint8)),
            "unlocked": {str(k): bitcore.bits_to_hex(s.unlocked[k]) for k in sorted(s.unlocked)},
            "spans": {str(k): [int(p) for p in s.spans[k]] for k in sorted(s.spans)},
            "material": {expr_name(e): n.material[e].hex() for e in sorted(n.material)},
        })
    log = hashlib.sha256(b"".join(np.packbits(t).tobytes() for t in net.log)).hexdigest()
    return {"nodes": nodes, "tokens": len(net.log), "token_log_sha256": log}
