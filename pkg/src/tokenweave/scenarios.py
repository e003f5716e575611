"""Worked configurations used by the demos, the CLI fixtures and the tests.

Node and key labels here are 1-based, as shown in group tables; helpers
convert them to the 0-based indices used everywhere else.
"""

import numpy as np

# three-node legacy codebook over six keys
LEGACY_N = np.array([
    [1, 1, 0, 0, 0, 1],
    [0, 1, 1, 1, 0, 0],
    [1, 0, 0, 1, 1, 0],
], dtype=np.uint8)
LEGACY_NODE_ROWS = ((0, 1), (1, 2), (0, 2))
LEGACY_TOKEN_FORMAT = ("z1", "z2", "z3", "z2", "z3", "z1")
LEGACY_T = np.array([
    [1, 1, 0, 1, 0, 1],
    [1, 0, 1, 0, 1, 1],
    [1, 1, 1, 1, 1, 1],
    [1, 0, 0, 0, 0, 1],
], dtype=np.uint8)

# four-key grid example
KEY_TABLE_4 = (1, 2, 3, 7)
R1_4 = (7, 1, 2, 3)
R2_4 = (3, 2, 1, 7)

# distance scheme with twelve keys
DISTANCE_S1_12 = (0, 0, 0, 1, 1, 1)

# seven keys, five nodes: every pair, triple and quadruple gets a group key
PAIR_GROUPS = [
    ((1, 2), "H(K1,K2)"), ((1, 3), "H(K1,K3)"), ((1, 4), "H(K1,K4)"), ((1, 5), "H(K2,K4)"),
    ((2, 3), "H(K1,K5)"), ((2, 4), "H(K1,K6)"), ((2, 5), "H(K2,K5)"), ((3, 4), "H(K1,K7)"),
    ((3, 5), "H(K5,K7)"), ((4, 5), "H(K4,K7)"),
]
TRIPLE_GROUPS = [
    ((1, 2, 3), "H(K1,K2)"), ((1, 2, 4), "H(K1,K3)"), ((1, 2, 5), "H(K2,K3)"),
    ((1, 3, 4), "H(K1,K4)"), ((1, 3, 5), "H(K2,K4)"), ((1, 4, 5), "H(K3,K4)"),
    ((2, 3, 4), "H(K1,K5)"), ((2, 3, 5), "H(K2,K5)"), ((2, 4, 5), "H(K3,K5)"),
    ((3, 4, 5), "H(K4,K5)"),
]
QUAD_GROUPS = [
    ((1, 2, 3, 4), "K1"), ((1, 2, 3, 5), "K2"), ((1, 2, 4, 5), "K3"),
    ((1, 3, 4, 5), "K4"), ((2, 3, 4, 5), "K5"),
]
SEVEN_KEY_SCENARIOS = {"pairs": PAIR_GROUPS, "triples": TRIPLE_GROUPS, "quads": QUAD_GROUPS}

# four nodes, three keys, before node 1 leaves
REVOCATION_GROUPS = [((1, 2, 3), "K1"), ((1, 3, 4), "K2"), ((2, 3, 4), "K3")]


def zero_based(groups):
    """Convert 1-based (members, expression) pairs to 0-based node sets and key tuples."""
    from .simnet import parse_expr
    return [(frozenset(m - 1 for m in members), parse_expr(expr)) for members, expr in groups]


def holders(groups) -> dict:
    """Key -> 0-based nodes that must hold it for every group to be keyable."""
    out: dict = {}
    for members, expr in zero_based(groups):
        for k in expr:
            out.setdefault(k, set()).update(members)
    return out


def _groups_target(groups) -> dict:
    return {"groups": [{"members": list(m), "key": k} for m, k in groups]}


def legacy_config(Lp: int = 16, seed: int = 0) -> dict:
    return {
        "variant": "legacy", "v": 6, "Lp": Lp, "seed": seed,
        "legacy": {"N": LEGACY_N.tolist(),
                   "node_rows": [[r + 1 for r in rows] for rows in LEGACY_NODE_ROWS],
                   "tokens": LEGACY_T.tolist()},
    }


def key_table_config(Lp: int = 16, seed: int = 0) -> dict:
    return {"variant": "grid", "v": 4, "M": 3, "Lp": Lp, "seed": seed,
            "key_table": list(KEY_TABLE_4), "circulant_seeds": [list(R1_4), list(R2_4)]}


def distance_config(Lp: int = 16, seed: int = 0) -> dict:
    return {"variant": "distance", "v": 12, "Lp": Lp, "seed": seed,
            "distance": {"seed_row": list(DISTANCE_S1_12)}}


def seven_key_config(scenario: str = "pairs", Lp: int = 32, seed: int = 0) -> dict:
    return {"variant": "grid", "v": 7, "Lp": Lp, "seed": seed, "nodes": 5,
            "target": _groups_target(SEVEN_KEY_SCENARIOS[scenario])}


def revocation_config(Lp: int = 32, seed: int = 0) -> dict:
    return {"variant": "grid", "v": 3, "Lp": Lp, "seed": seed, "nodes": 4,
            "combination_cap": 3, "target": _groups_target(REVOCATION_GROUPS)}
