"""Command-line driver: setup, share issuance, planning, simulation and reports.

Exit codes: 0 success, 1 internal error, 2 bad config or document,
3 infeasible target, 4 corrupted plan or transcript, 5 verification failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__, adversary, bitcore, codebook, documents, gridscheme, simnet
from .bitcore import STREAM_TOKENS, Variant
from .documents import DocumentError
from .errors import PlanError, SpecError, TokenweaveError
from .planner import token_construction

EXIT_INTERNAL = 1
EXIT_SCHEMA = 2
EXIT_INFEASIBLE = 3
EXIT_CORRUPT = 4
EXIT_VERIFY = 5

SEED_ENV = "TOKENWEAVE_SEED"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# -- output -------------------------------------------------------------------

def render(header: Sequence[str], rows: Sequence[Sequence], fmt: str) -> str:
    if fmt == "json":
        return documents.dump_json([dict(zip(header, r)) for r in rows])
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    cells = [list(map(str, header))] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(header))]
    return "".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n"
                   for r in cells)


def _members(nodes) -> str:
    return "{" + ",".join(str(i + 1) for i in sorted(nodes)) + "}"


# -- loading ------------------------------------------------------------------

def _need(path, flag):
    if path is None:
        raise CliError(f"{flag} is required for this command", EXIT_SCHEMA)
    return path


def _load(path, flag, code=EXIT_SCHEMA) -> dict:
    try:
        return documents.load_json(_need(path, flag))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", code) from None
    except DocumentError as exc:
        raise CliError(str(exc), code) from None


def _centre(args):
    doc = _load(args.state, "--state")
    try:
        return documents.centre_from_doc(doc), doc
    except (DocumentError, KeyError, ValueError) as exc:
        raise CliError(f"bad state document: {exc}", EXIT_SCHEMA) from None


def _seed(args, config) -> Optional[int]:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env, 0)
        except ValueError:
            raise CliError(f"{SEED_ENV}={env!r} is not an integer", EXIT_SCHEMA) from None
    return None


# -- simulation core ----------------------------------------------------------

def _check_fills(centre, row, fills, n):
    for p, f in fills.items():
        if f is None:
            continue
        if not 0 <= p < centre.layout.W:
            raise DocumentError(f"token {n}: partition {p + 1} out of range")
        if not np.array_equal(row[centre.layout.positions(p)], bitcore.segment(centre.keys, f)):
            raise DocumentError(f"token {n}: partition {p + 1} does not carry its declared fill")


def run_episode(centre, doc, tokens, order=None) -> tuple:
    """Broadcast every token; returns (network, transcript document)."""
    net = simnet.Network(centre, doc.get("combination_cap", simnet.DEFAULT_COMBINATION_CAP))
    broadcasts, table = [], []
    for n, (row, fills, _) in enumerate(tokens, 1):
        if fills is not None:
            _check_fills(centre, row, fills, n)
        deltas = net.broadcast(row, order)
        broadcasts.append({"token": n, "deltas": {str(i + 1): [f"K{k + 1}" for k in sorted(d)]
                                                  for i, d in deltas.items()}})
        table.append([[f"K{k + 1}" for k in sorted(s)] for s in net.unlocked_sets()])
    groups, group_error = [], None
    spec = documents.group_spec(doc.get("target", {}))
    if spec:
        try:
            gt = simnet.derive_groups(net.nodes, spec)
            groups = [{"members": [i + 1 for i in m], "key": simnet.expr_name(e)}
                      for m, e in gt.rows()]
        except SpecError as exc:
            group_error = str(exc)
    return net, {"broadcasts": broadcasts, "unlock_table": table, "groups": groups,
                 "group_error": group_error, "final_state": simnet.state_document(net)}


def _read_plan(centre, path, flag):
    plan = _load(path, flag, EXIT_CORRUPT)
    try:
        return plan, documents.read_tokens(plan, centre)
    except DocumentError as exc:
        raise CliError(f"corrupted {flag[2:]}: {exc}", EXIT_CORRUPT) from None


# -- commands -----------------------------------------------------------------

def cmd_setup(args) -> str:
    config = _load(args.config, "--config")
    try:
        centre = documents.build_centre(config, _seed(args, config))
        state = documents.state_to_doc(centre, config)
        if state["target"]:
            documents.target_holders(state["target"], centre.params.v, centre.n)
    except (DocumentError, TokenweaveError) as exc:
        raise CliError(f"invalid config: {exc}", EXIT_SCHEMA) from None
    documents.dump_json(state, _need(args.state, "--state"))
    rows = [("variant", centre.params.variant.value), ("keys", centre.params.v),
            ("key_bits", centre.params.key_bits), ("nodes", centre.n),
            ("seed", centre.params.seed)]
    if centre.table is not None:
        rows.append(("key_table", " ".join(f"K{k + 1}:{n}" for k, n in
                                           enumerate(centre.table.numbers))))
    return render(("field", "value"), rows, args.format)


def cmd_shares(args) -> str:
    centre, _ = _centre(args)
    doc = documents.shares_doc(centre)
    if args.format == "json":
        return documents.dump_json(doc)
    rows = [(n["node"], " ".join(map(str, n.get("codeword", []))) or "-", len(n["rows"]))
            for n in doc["nodes"]]
    return render(("node", "codeword", "rows"), rows, args.format)


def build_plan(centre, state, target) -> dict:
    v = centre.params.v
    variant = centre.params.variant
    entries = []
    if variant is Variant.GRID:
        config = documents.compile_target(target, centre)
        plan = token_construction(config, centre.keys, centre.layout,
                                  centre.params.rng(STREAM_TOKENS), centre.node_points())
        entries = [documents.token_entry(t.row, v, t.fills) for t in plan.tokens]
    elif variant is Variant.LEGACY:
        entries = [documents.token_entry(centre.token_row(cw), v, codeword=cw)
                   for cw in state.get("legacy_tokens", [])]
    else:
        holders = documents.target_holders(target, v, centre.n)
        for k in sorted(holders):
            for i in sorted(holders[k]):
                cw = codebook.single_key_token(centre.codewords[i][0], k)
                entries.append(documents.token_entry(centre.token_row(cw), v, codeword=cw))
    return documents.plan_doc(entries, variant, v)


def cmd_plan(args) -> str:
    centre, state = _centre(args)
    target = state.get("target", {})
    if args.target is not None:
        tdoc = _load(args.target, "--target")
        target = tdoc.get("target", tdoc)
    try:
        documents.validate(target, documents.TARGET_SCHEMA)
    except DocumentError as exc:
        raise CliError(f"invalid target: {exc}", EXIT_SCHEMA) from None
    try:
        plan = build_plan(centre, state, target)
    except (PlanError, DocumentError) as exc:
        raise CliError(f"infeasible target: {exc}", EXIT_INFEASIBLE) from None
    documents.dump_json(plan, _need(args.plan, "--plan"))
    rows = [(n, e.get("instances", "-"), e.get("class", "-"))
            for n, e in enumerate(plan["tokens"], 1)]
    out = render(("token", "instances", "class"), rows, args.format)
    if args.format == "text":
        out += f"tokens: {len(rows)}\n"
    return out


def simulate(centre, state, plan_doc, tokens, order=None) -> tuple:
    try:
        net, result = run_episode(centre, state, tokens, order)
    except DocumentError as exc:
        raise CliError(f"corrupted plan: {exc}", EXIT_CORRUPT) from None
    transcript = {"format": documents.TRANSCRIPT_FORMAT,
                  "variant": centre.params.variant.value,
                  "tokens": plan_doc["tokens"],
                  "rows_sha256": plan_doc["rows_sha256"],
                  **result}
    return net, transcript


def cmd_simulate(args) -> str:
    centre, state = _centre(args)
    plan, tokens = _read_plan(centre, args.plan, "--plan")
    _, transcript = simulate(centre, state, plan, tokens)
    documents.dump_json(transcript, _need(args.transcript, "--transcript"))
    return report_tables(transcript, args.format)


def _suite(name, ok, detail=""):
    return (name, "PASS" if ok else "FAIL", detail)


def verify_state(centre) -> list:
    out = []
    variant = centre.params.variant
    if variant is Variant.GRID:
        bad = [i + 1 for i in range(centre.n)
               if not codebook.check_rule1(centre.codewords[i].binary_rows(centre.params.M))]
        out.append(_suite("rule1-per-node", not bad, f"violations at nodes {bad}" if bad else ""))
        clashes = 0
        for k in range(centre.params.v):
            pts = [centre.coordinates(i)[k] for i in range(centre.n)]
            clashes += len(pts) - len(set(pts))
        out.append(_suite("unique-mapping", clashes == 0, f"{clashes} coordinate clashes"))
    elif variant is Variant.LEGACY:
        N = np.unique(np.vstack(centre.codewords), axis=0)
        out.append(_suite("rule1-node-block", codebook.check_rule1(N),
                          f"unique columns {[j + 1 for j, _ in codebook.unique_columns(N)]}"))
    else:
        N = np.vstack(centre.codewords)
        out.append(_suite("rule1-node-block", codebook.check_rule1(N)))
        matrix = codebook.DistanceShareMatrix(N[:, :centre.params.v // 2], N)
        problems = matrix.check()
        lo, hi = matrix.distance_range()
        out.append(_suite("distance-bounds", not problems, f"range [{lo}, {hi}]"))
    return out


def _intended(centre, fills, codeword) -> dict:
    """Key -> nodes a token is meant to reach."""
    if fills is not None:
        return {k: {centre.node_at(k, p) for p in pts} - {None}
                for k, pts in gridscheme.token_points(fills).items()}
    if centre.params.variant is Variant.DISTANCE and codeword is not None:
        for i, cw in enumerate(centre.codewords):
            diff = np.flatnonzero(cw[0] != np.asarray(codeword, dtype=np.uint8))
            if diff.size == 1:
                return {int(diff[0]): {i}}
        return {}
    return None


def verify_transcript(centre, state, transcript) -> list:
    out = []
    tokens = documents.read_tokens(transcript, centre)
    if centre.params.variant is Variant.LEGACY:
        words = [t[2] for t in tokens]
        try:
            table = codebook.legacy_unlock_table(centre.codewords, words, centre.keys,
                                                 centre.layout)
            expect = [[[f"K{k + 1}" for k in sorted(c)] for c in row] for row in table]
            out.append(_suite("bit-level-agreement", True))
            out.append(_suite("unlock-table", expect == transcript["unlock_table"]))
        except TokenweaveError as exc:
            out.append(_suite("bit-level-agreement", False, str(exc)))
    else:
        privileged: dict = {}
        unknown = False
        for row, fills, cw in tokens:
            meant = _intended(centre, fills, cw)
            if meant is None:
                unknown = True
                continue
            for k, nodes in meant.items():
                privileged.setdefault(k, set()).update(nodes)
        _, result = run_episode(centre, state, tokens)
        final = result["unlock_table"][-1] if result["unlock_table"] else [[]] * centre.n
        holders: dict = {}
        for i, labels in enumerate(final):
            for lab in labels:
                holders.setdefault(int(lab[1:]) - 1, set()).add(i)
        bad = sorted(k + 1 for k in set(holders) | set(privileged)
                     if holders.get(k, set()) != privileged.get(k, set()))
        out.append(_suite("exclusivity", not bad and not unknown,
                          f"mismatched keys {bad}" if bad else ""))
    if centre.params.variant is Variant.GRID:
        # only grid tokens carry random fill; the other variants' tokens are pure code words
        rows = [t[0] for t in tokens]
        leaked = set()
        for start in range(0, max(len(rows) - 1, 1)):
            window = rows[start:start + 10]
            if len(window) >= 2:
                leaked |= adversary.token_stack_attack(window, centre.keys, centre.params.Lp)
        out.append(_suite("collusion-token-stack", not leaked,
                          f"keys {sorted(k + 1 for k in leaked)}" if leaked else ""))
    _, again = run_episode(centre, state, tokens)
    out.append(_suite("replay-determinism", again["final_state"] == transcript["final_state"]))
    if transcript.get("group_error"):
        out.append(_suite("group-table", False, transcript["group_error"]))
    return out


def cmd_verify(args) -> str:
    centre, state = _centre(args)
    results = verify_state(centre)
    if args.transcript is not None:
        transcript = _load(args.transcript, "--transcript", EXIT_CORRUPT)
        try:
            results += verify_transcript(centre, state, transcript)
        except (DocumentError, KeyError) as exc:
            raise CliError(f"corrupted transcript: {exc}", EXIT_CORRUPT) from None
    sys.stdout.write(render(("suite", "result", "detail"), results, args.format))
    failed = [r[0] for r in results if r[1] == "FAIL"]
    if failed:
        raise CliError(f"failed suites: {', '.join(failed)}", EXIT_VERIFY)
    return ""


def replay(centre, state, transcript_path):
    _, tokens = _read_plan(centre, transcript_path, "--transcript")
    net, _ = run_episode(centre, state, tokens)
    return net


def cmd_revoke(args) -> str:
    centre, state = _centre(args)
    net = replay(centre, state, args.transcript)
    if args.node is None or not 1 <= args.node <= centre.n:
        raise CliError(f"--node must name a node in 1..{centre.n}", EXIT_SCHEMA)
    rev = simnet.revoke(net.nodes, args.node - 1)
    if args.format == "json":
        return documents.dump_json({
            "leaving": args.node,
            "retained": {str(i + 1): sorted(simnet.expr_name(e) for e in es)
                         for i, es in rev.retained.items()},
            "groups": [{"members": [i + 1 for i in m], "key": simnet.expr_name(e)}
                       for m, e in rev.groups.rows()],
        })
    rows = [(i + 1, " ".join(simnet.expr_name(e) for e in sorted(es, key=lambda e: (len(e), e)))
             or "-") for i, es in rev.retained.items()]
    out = render(("node", "retained"), rows, args.format)
    out += "\n" + render(("group", "key"), [(_members(m), simnet.expr_name(e))
                                            for m, e in rev.groups.rows()], args.format)
    return out


def report_tables(transcript: dict, fmt: str) -> str:
    table = transcript["unlock_table"]
    n = len(table[0]) if table else 0
    if fmt == "json":
        return documents.dump_json({
            "unlock_table": table,
            "tokens": [{"token": i, "instances": e.get("instances"), "class": e.get("class")}
                       for i, e in enumerate(transcript["tokens"], 1)],
            "groups": transcript.get("groups", []),
        })
    header = ["token"] + [f"node{i}" for i in range(1, n + 1)]
    rows = [[i] + [" ".join(c) or "-" for c in row] for i, row in enumerate(table, 1)]
    out = render(header, rows, fmt)
    summary = [(i, e.get("instances", "-"), e.get("class", "-"))
               for i, e in enumerate(transcript["tokens"], 1)]
    out += "\n" + render(("token", "instances", "class"), summary, fmt)
    if transcript.get("groups"):
        groups = [("{" + ",".join(map(str, g["members"])) + "}", g["key"])
                  for g in transcript["groups"]]
        out += "\n" + render(("group", "key"), groups, fmt)
    return out


def cmd_report(args) -> str:
    transcript = _load(args.transcript, "--transcript", EXIT_CORRUPT)
    if transcript.get("format") != documents.TRANSCRIPT_FORMAT:
        raise CliError("not a transcript document", EXIT_CORRUPT)
    return report_tables(transcript, args.format)


COMMANDS = {
    "setup": (cmd_setup, "build a deterministic centre state from a config"),
    "shares": (cmd_shares, "list the node shares a centre issues"),
    "plan": (cmd_plan, "plan broadcast tokens for the target configuration"),
    "simulate": (cmd_simulate, "broadcast a plan and record a transcript"),
    "verify": (cmd_verify, "run invariant suites over a state and transcript"),
    "revoke": (cmd_revoke, "drop one node and report retained material and groups"),
    "report": (cmd_report, "print unlock, token and group tables of a transcript"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tokenweave", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config")
        p.add_argument("--state")
        p.add_argument("--target")
        p.add_argument("--plan")
        p.add_argument("--transcript")
        p.add_argument("--seed", type=int)
        p.add_argument("--format", choices=("text", "csv", "json"), default="text")
        if name == "revoke":
            p.add_argument("--node", type=int, help="1-based index of the leaving node")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handler = COMMANDS[args.command][0]
    try:
        sys.stdout.write(handler(args))
    except CliError as exc:
        print(f"tokenweave {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:  # noqa: BLE001
        print(f"tokenweave {args.command}: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
