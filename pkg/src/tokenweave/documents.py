"""JSON documents exchanged by the command-line driver.

Bit blocks are stored as hex of the packed bits (MSB first, zero padded).
Node and key labels inside documents are 1-based, matching the report
tables; everything in memory is 0-based.
"""

from __future__ import annotations

import hashlib
import json
from typing import Optional

import jsonschema
import numpy as np

from . import bitcore, codebook
from .bitcore import Fill, KeySet, PartitionLayout, SystemParams, Variant
from .errors import UsageError
from .gridscheme import KeyTable
from .planner import TargetConfiguration, TokenClass, classify_token
from .simnet import CentreState, parse_expr

STATE_FORMAT = "tokenweave/state/v1"
PLAN_FORMAT = "tokenweave/plan/v1"
TRANSCRIPT_FORMAT = "tokenweave/transcript/v1"

_bits_matrix = {"type": "array", "items": {"type": "array", "items": {"enum": [0, 1]}}}
_expr = {"type": "string", "pattern": r"^(K\d+|H\(K\d+(,\s*K\d+)*\))$"}

TARGET_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "groups": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["members", "key"],
                "additionalProperties": False,
                "properties": {
                    "members": {"type": "array", "items": {"type": "integer", "minimum": 1},
                                "minItems": 1},
                    "key": _expr,
                },
            },
        },
        "holders": {
            "type": "object",
            "patternProperties": {r"^K\d+$": {"type": "array",
                                              "items": {"type": "integer", "minimum": 1}}},
            "additionalProperties": False,
        },
        "grids": {
            "type": "object",
            "patternProperties": {r"^K\d+$": {
                "type": "array",
                "items": {"type": "array", "items": {"type": "integer"},
                          "minItems": 2, "maxItems": 2}}},
            "additionalProperties": False,
        },
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["variant", "v", "Lp"],
    "additionalProperties": False,
    "properties": {
        "variant": {"enum": [v.value for v in Variant]},
        "v": {"type": "integer", "minimum": 1},
        "Lp": {"type": "integer", "minimum": 8},
        "M": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "nodes": {"type": "integer", "minimum": 1},
        "node_ids": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "key_table": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "circulant_seeds": {"type": "array", "minItems": 2, "maxItems": 2,
                            "items": {"type": "array", "items": {"type": "integer"}}},
        "combination_cap": {"type": "integer", "minimum": 1},
        "legacy": {
            "type": "object",
            "required": ["N", "node_rows"],
            "additionalProperties": False,
            "properties": {
                "N": _bits_matrix,
                "node_rows": {"type": "array",
                              "items": {"type": "array", "items": {"type": "integer",
                                                                   "minimum": 1}}},
                "tokens": _bits_matrix,
                "token_format": {"type": "array", "items": {"type": "string"}},
            },
        },
        "distance": {
            "type": "object",
            "required": ["seed_row"],
            "additionalProperties": False,
            "properties": {"seed_row": {"type": "array", "items": {"enum": [0, 1]}}},
        },
        "target": TARGET_SCHEMA,
    },
}

_token_entry = {
    "type": "object",
    "required": ["row"],
    "properties": {
        "row": {"type": "string", "pattern": "^[0-9a-f]*$"},
        "codeword": {"type": "array", "items": {"enum": [0, 1]}},
        "fills": {"type": "object"},
    },
}

PLAN_SCHEMA = {
    "type": "object",
    "required": ["format", "tokens", "rows_sha256"],
    "properties": {
        "format": {"enum": [PLAN_FORMAT, TRANSCRIPT_FORMAT]},
        "tokens": {"type": "array", "items": _token_entry},
        "rows_sha256": {"type": "string"},
    },
}


class DocumentError(UsageError):
    """A document is malformed, fails its schema, or does not match its checksum."""


def validate(doc, schema) -> None:
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise DocumentError(f"{where}: {exc.message}") from None


def load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: not valid JSON ({exc})") from None


def dump_json(doc, path=None) -> str:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def _key_index(label: str) -> int:
    return int(label.lstrip("K")) - 1


# -- centre state -------------------------------------------------------------

def build_centre(config: dict, seed: Optional[int] = None) -> CentreState:
    validate(config, CONFIG_SCHEMA)
    variant = Variant(config["variant"])
    v = config["v"]
    M = config.get("M", bitcore.min_rows_for(v))
    params = SystemParams(v, config["Lp"], M, config.get("seed", 0) if seed is None else seed,
                          variant)
    if variant is Variant.GRID:
        table = KeyTable(tuple(config["key_table"]), M) if "key_table" in config else None
        return CentreState.grid(params, node_ids=config.get("node_ids"), n=config.get("nodes"),
                                table=table, seeds=config.get("circulant_seeds"))
    if variant is Variant.LEGACY:
        leg = config.get("legacy")
        if leg is None:
            raise DocumentError("legacy variant needs a 'legacy' block")
        rows = [[r - 1 for r in rs] for rs in leg["node_rows"]]
        return CentreState.legacy(params, leg["N"], rows)
    dist = config.get("distance")
    if dist is None:
        raise DocumentError("distance variant needs a 'distance' block")
    return CentreState.distance(params, dist["seed_row"], config.get("nodes"))


def state_to_doc(centre: CentreState, config: dict) -> dict:
    p = centre.params
    doc = {
        "format": STATE_FORMAT,
        "params": {"variant": p.variant.value, "v": p.v, "Lp": p.Lp, "M": p.M, "seed": p.seed},
        "keys": [bitcore.bits_to_hex(k) for k in centre.keys.keys],
        "digests": [d.hex() for d in centre.keys.digests],
        "layout": [[int(x) for x in g] for g in centre.layout.groups],
        "node_ids": list(centre.node_ids),
        "combination_cap": config.get("combination_cap", 3),
        "target": config.get("target", {}),
    }
    if p.variant is Variant.GRID:
        doc["key_table"] = list(centre.table.numbers)
        doc["circulant_seeds"] = [list(s) for s in centre.seeds]
        doc["codewords"] = [list(cw.digits) for cw in centre.codewords]
    else:
        doc["codewords"] = [np.asarray(cw).tolist() for cw in centre.codewords]
    if p.variant is Variant.LEGACY:
        leg = config["legacy"]
        doc["legacy_tokens"] = legacy_token_words(leg)
    if p.variant is Variant.DISTANCE:
        doc["distance_seed_row"] = list(centre.seeds[0])
    return doc


def legacy_token_words(leg: dict) -> list:
    if "tokens" in leg:
        return [list(map(int, t)) for t in leg["tokens"]]
    if "token_format" in leg:
        return [list(t) for t in codebook.token_codewords(leg["token_format"])]
    return []


def centre_from_doc(doc: dict) -> CentreState:
    if doc.get("format") != STATE_FORMAT:
        raise DocumentError("not a centre state document")
    p = doc["params"]
    params = SystemParams(p["v"], p["Lp"], p["M"], p["seed"], p["variant"])
    key_len = params.key_bits
    keys = KeySet.from_keys([bitcore.hex_to_bits(h, key_len) for h in doc["keys"]],
                            halves=params.variant is Variant.GRID)
    if [d.hex() for d in keys.digests] != doc["digests"]:
        raise DocumentError("key digests do not match the stored keys")
    layout = PartitionLayout.from_groups(doc["layout"])
    if params.variant is Variant.GRID:
        table = KeyTable(tuple(doc["key_table"]), params.M)
        centre = CentreState.grid(params, node_ids=doc["node_ids"], table=table,
                                  seeds=tuple(tuple(s) for s in doc["circulant_seeds"]),
                                  keys=keys, layout=layout)
        if [list(cw.digits) for cw in centre.codewords] != doc["codewords"]:
            raise DocumentError("stored code words disagree with the circulant seeds")
        return centre
    codewords = [np.asarray(cw, dtype=np.uint8) for cw in doc["codewords"]]
    seeds = (tuple(doc["distance_seed_row"]),) if "distance_seed_row" in doc else ()
    return CentreState(params, keys, layout, tuple(doc["node_ids"]), codewords, seeds=seeds)


def shares_doc(centre: CentreState) -> dict:
    """Node-visible material only: share rows, digit code words and digests."""
    nodes = []
    for i in range(centre.n):
        share = centre.issue_share(i)
        entry = {"node": i + 1, "rows": [bitcore.bits_to_hex(r) for r in share.rows]}
        if share.codeword is not None:
            entry["codeword"] = list(share.codeword.digits)
        nodes.append(entry)
    return {"format": "tokenweave/shares/v1", "row_bits": centre.layout.size,
            "digests": [d.hex() for d in centre.keys.digests], "nodes": nodes}


# -- targets ------------------------------------------------------------------

def group_spec(target: dict) -> list:
    """0-based (members, key expression) pairs of a target's group list."""
    return [(frozenset(m - 1 for m in g["members"]), parse_expr(g["key"]))
            for g in target.get("groups", [])]


def target_holders(target: dict, v: int, n: int) -> dict:
    """Key -> 0-based node set from a group list or an explicit holder map."""
    out: dict = {}
    for members, expr in group_spec(target):
        for k in expr:
            out.setdefault(k, set()).update(members)
    for label, nodes in target.get("holders", {}).items():
        out.setdefault(_key_index(label), set()).update(i - 1 for i in nodes)
    for k, nodes in out.items():
        if not 0 <= k < v:
            raise DocumentError(f"target names key K{k + 1} but only {v} keys exist")
        bad = sorted(i + 1 for i in nodes if not 0 <= i < n)
        if bad:
            raise DocumentError(f"target names nodes {bad} but only {n} nodes exist")
    return out


def compile_target(target: dict, centre: CentreState) -> TargetConfiguration:
    v = centre.params.v
    grids = [set() for _ in range(v)]
    for k, nodes in target_holders(target, v, centre.n).items():
        grids[k] |= {centre.coordinates(i)[k] for i in nodes}
    for label, pts in target.get("grids", {}).items():
        k = _key_index(label)
        if not 0 <= k < v:
            raise DocumentError(f"target names key {label} but only {v} keys exist")
        grids[k] |= {tuple(p) for p in pts}
    return TargetConfiguration(tuple(grids))


# -- tokens -------------------------------------------------------------------

def _fill_to_doc(f: Optional[Fill]):
    if f is None:
        return None
    return {"key": f"K{f.key + 1}", "half": f.half, "complemented": bool(f.complemented)}


def _fill_from_doc(d) -> Optional[Fill]:
    if d is None:
        return None
    return Fill(_key_index(d["key"]), d["half"], bool(d["complemented"]))


def token_entry(row: np.ndarray, v: int, fills: Optional[dict] = None,
                codeword=None) -> dict:
    entry = {"row": bitcore.bits_to_hex(row)}
    if fills is not None:
        entry["fills"] = {str(p + 1): _fill_to_doc(f) for p, f in sorted(fills.items())}
        total, cls = classify_token(fills, v)
        entry["instances"] = total
        entry["class"] = cls.value
    if codeword is not None:
        entry["codeword"] = [int(b) for b in codeword]
    return entry


def rows_checksum(entries) -> str:
    h = hashlib.sha256()
    for e in entries:
        h.update(e["row"].encode() + b"\n")
    return h.hexdigest()


def read_tokens(doc: dict, centre: CentreState) -> list:
    """Token rows (and grid tokens where fills are present) from a plan or transcript."""
    validate(doc, PLAN_SCHEMA)
    if rows_checksum(doc["tokens"]) != doc["rows_sha256"]:
        raise DocumentError("token rows do not match the recorded checksum")
    size = centre.layout.size
    out = []
    for n, e in enumerate(doc["tokens"], 1):
        try:
            row = bitcore.hex_to_bits(e["row"], size)
        except ValueError as exc:
            raise DocumentError(f"token {n}: {exc}") from None
        fills = None
        if "fills" in e:
            try:
                fills = {int(p) - 1: _fill_from_doc(f) for p, f in e["fills"].items()}
            except (KeyError, TypeError, ValueError):
                raise DocumentError(f"token {n}: malformed fill map") from None
        out.append((row, fills, e.get("codeword")))
    return out


def plan_doc(entries: list, variant: Variant, v: int) -> dict:
    classes = [e.get("class") for e in entries]
    return {
        "format": PLAN_FORMAT,
        "variant": variant.value,
        "tokens": entries,
        "rows_sha256": rows_checksum(entries),
        "summary": {
            "tokens": len(entries),
            "efficient": classes.count(TokenClass.EFFICIENT.value),
            "inefficient": classes.count(TokenClass.INEFFICIENT.value),
            "max_instances": 2 * v - 2,
        },
    }
