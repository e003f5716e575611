import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tokenweave import adversary, bitcore, gridscheme, planner, scenarios, simnet
from tokenweave.bitcore import SystemParams, Variant
from tokenweave.errors import SpecError, UsageError

from conftest import DATA


def legacy_net(seed=0):
    params = SystemParams(6, 16, 2, seed, Variant.LEGACY)
    c = simnet.CentreState.legacy(params, scenarios.LEGACY_N, scenarios.LEGACY_NODE_ROWS)
    return c, simnet.Network(c)


def grid_centre(v, seed=0, n=None):
    params = SystemParams(v, 32, bitcore.min_rows_for(v), seed, Variant.GRID)
    return simnet.CentreState.grid(params, n=n)


def run_plan(c, holders, cap=3):
    target = c.grids_for(holders)
    plan = planner.token_construction(target, c.keys, c.layout,
                                      c.params.rng(bitcore.STREAM_TOKENS), c.node_points())
    net = simnet.Network(c, cap)
    for t in plan.tokens:
        net.broadcast(t.row)
    return net, plan


# -- expressions ------------------------------------------------------------------

def test_expression_labels_round_trip():
    assert simnet.expr_name((0, 2)) == "H(K1,K3)"
    assert simnet.parse_expr("H(K3, K1)") == (0, 2)
    assert simnet.parse_expr("K5") == (4,)
    with pytest.raises(UsageError):
        simnet.parse_expr("H(K1,x)")


def test_combination_key_is_order_independent():
    unlocked = {0: np.array([1, 0, 1], np.uint8), 2: np.array([0, 0, 1], np.uint8)}
    assert simnet.combination_key((2, 0), unlocked) == simnet.combination_key((0, 2), unlocked)
    assert simnet.combination_key((0,), unlocked) != simnet.combination_key((0, 2), unlocked)


# -- broadcasts -------------------------------------------------------------------

def test_legacy_first_token_deltas():
    c, net = legacy_net()
    deltas = net.broadcast(c.token_row(scenarios.LEGACY_T[0]))
    # node 2 also opens K4: its column 4 is the only [1 1 1] column
    assert deltas == {0: {3}, 1: {3, 5}, 2: {3}}


@pytest.mark.parametrize("seed", range(3))
def test_legacy_blind_fusion_matches_codeword_table(seed):
    from tokenweave.codebook import legacy_unlock_table
    c, net = legacy_net(seed)
    expected = legacy_unlock_table(c.codewords, scenarios.LEGACY_T)
    for t, row in zip(scenarios.LEGACY_T, expected):
        net.broadcast(c.token_row(t))
        assert net.unlocked_sets() == row


def test_random_token_changes_nothing():
    c = grid_centre(5)
    net = simnet.Network(c)
    row = gridscheme.build_grid_token([], c.keys, c.layout, np.random.default_rng(0)).row
    assert net.broadcast(row) == {}


def test_wrong_length_token_rejected():
    c = grid_centre(4)
    with pytest.raises(UsageError):
        simnet.Network(c).broadcast(np.zeros(5, np.uint8))


@given(st.integers(4, 6), st.integers(0, 5000))
def test_privileged_set_is_exactly_reached(v, seed):
    c = grid_centre(v, seed)
    rng = np.random.default_rng(seed)
    k = int(rng.integers(v))
    y = int(rng.integers(v + 1, 2 * v + 1))
    xs = rng.choice(np.arange(1, v + 1), size=int(rng.integers(1, v + 1)), replace=False)
    pts = {(int(x), y) for x in xs}
    t = gridscheme.build_grid_token([(k, pts)], c.keys, c.layout, rng)
    net = simnet.Network(c)
    deltas = net.broadcast(t.row)
    assert {i for i, d in deltas.items() if k in d} == {c.node_at(k, p) for p in pts}


def test_exclusivity_and_monotonicity_over_episodes():
    for seed in range(20):
        c = grid_centre(5, seed)
        rng = np.random.default_rng(seed)
        net = simnet.Network(c)
        privileged = {}
        before = net.unlocked_sets()
        for _ in range(6):
            k = int(rng.integers(5))
            x = int(rng.integers(1, 6))
            pts = {(x, int(y)) for y in rng.choice(np.arange(6, 11), 2, replace=False)}
            t = gridscheme.build_grid_token([(k, pts)], c.keys, c.layout, rng)
            net.broadcast(t.row)
            privileged.setdefault(k, set()).update(c.node_at(k, p) for p in pts)
            after = net.unlocked_sets()
            assert all(b <= a for b, a in zip(before, after))
            before = after
            for key in range(5):
                assert net.holders(key) == privileged.get(key, set())


def test_shuffled_fusion_order_gives_identical_state():
    c = grid_centre(6, 3)
    holders = {0: {1, 2, 7}, 3: {0, 9, 20}, 5: set(range(10))}
    target = c.grids_for(holders)
    plan = planner.token_construction(target, c.keys, c.layout, np.random.default_rng(0))
    docs = []
    for seed in (None, 1, 2):
        net = simnet.Network(c)
        for t in plan.tokens:
            order = None if seed is None else np.random.default_rng(seed).permutation(c.n)
            net.broadcast(t.row, order)
        docs.append(json.dumps(simnet.state_document(net), sort_keys=True))
    assert docs[0] == docs[1] == docs[2]


# -- groups -----------------------------------------------------------------------

@pytest.mark.parametrize("name", ["pairs", "triples", "quads"])
def test_seven_key_group_tables(name):
    groups = scenarios.SEVEN_KEY_SCENARIOS[name]
    c = grid_centre(7, n=5)
    net, plan = run_plan(c, scenarios.holders(groups))
    table = simnet.derive_groups(net.nodes, scenarios.zero_based(groups))
    golden = (DATA / f"groups_{name}.csv").read_text().split("\n")[1:-1]
    rows = [" ".join(str(i + 1) for i in m) + "," + simnet.expr_name(e) for m, e in table.rows()]
    assert rows == golden
    assert len(rows) == len(groups)


def test_member_without_material_is_an_error():
    c = grid_centre(7, n=5)
    groups = scenarios.QUAD_GROUPS
    net, _ = run_plan(c, scenarios.holders(groups[:-1]))
    with pytest.raises(SpecError):
        simnet.derive_groups(net.nodes, scenarios.zero_based(groups))


def test_non_member_able_to_derive_is_an_error():
    c = grid_centre(4, n=4)
    net, _ = run_plan(c, {0: {0, 1, 2}})
    with pytest.raises(SpecError):
        simnet.derive_groups(net.nodes, [({0, 1}, (0,))])


def test_whole_network_group_on_one_key():
    c = grid_centre(4, n=4)
    net, _ = run_plan(c, {2: {0, 1, 2, 3}})
    table = simnet.derive_groups(net.nodes, [({0, 1, 2, 3}, (2,))])
    assert table.rows() == [((0, 1, 2, 3), (2,))]


# -- revocation -------------------------------------------------------------------

def _revocation_net(seed=0):
    c = grid_centre(3, seed, n=4)
    return run_plan(c, scenarios.holders(scenarios.REVOCATION_GROUPS))[0]


def test_initial_associations():
    net = _revocation_net()
    names = [sorted(simnet.expr_name(e) for e in n.material) for n in net.nodes]
    assert names[0] == ["H(K1,K2)", "K1", "K2"]
    assert names[1] == ["H(K1,K3)", "K1", "K3"]
    assert names[2] == ["H(K1,K2)", "H(K1,K2,K3)", "H(K1,K3)", "H(K2,K3)", "K1", "K2", "K3"]
    assert names[3] == ["H(K2,K3)", "K2", "K3"]


def test_revoking_first_node():
    printed = json.loads((DATA / "revocation_printed.json").read_text())
    rev = simnet.revoke(_revocation_net().nodes, 0)
    got = {str(i + 1): sorted(simnet.expr_name(e) for e in es) for i, es in rev.retained.items()}
    assert got["2"] == sorted(printed["retained"]["2"])
    assert got["4"] == sorted(printed["retained"]["4"])
    # K2 was unlocked at the leaving node, so it cannot survive at node 3
    assert got["3"] == sorted(set(printed["retained"]["3"]) - {"K2"})
    groups = [{"members": [i + 1 for i in m], "key": simnet.expr_name(e)}
              for m, e in rev.groups.rows()]
    assert groups == printed["groups"]


def test_revoking_an_empty_node_changes_nothing():
    c = grid_centre(3, n=5)
    net, _ = run_plan(c, scenarios.holders(scenarios.REVOCATION_GROUPS))
    rev = simnet.revoke(net.nodes, 4)
    for i in range(4):
        assert rev.retained[i] == set(net.nodes[i].material)


def test_combination_cap_limits_material():
    c = grid_centre(3, n=4)
    net, _ = run_plan(c, scenarios.holders(scenarios.REVOCATION_GROUPS), cap=2)
    assert max(len(e) for e in net.nodes[2].material) == 2


# -- capture ----------------------------------------------------------------------

def _captured(seed=0):
    c = grid_centre(5, seed)
    net, plan = run_plan(c, {0: {3, 8}, 1: {3}, 2: {3, 11, 12}})
    return c, net, [t.row for t in plan.tokens]


def test_hardening_erases_both_partitions_of_the_key():
    c, net, rows = _captured()
    node = net.nodes[3]
    simnet.capture_harden(node, 1)
    assert node.share.erased.sum() == 2 * c.params.Lp
    assert not node.share.rows[:, node.share.erased].any()


def test_hardening_keeps_other_partitions_working():
    c, net, rows = _captured()
    node = net.nodes[3]
    before = {}
    for r in rows:
        probe = gridscheme.NodeShare(node.share.rows.copy(), node.share.codeword)
        before.update(gridscheme.fuse_token(probe, r, c.keys))
    simnet.capture_harden(node, 1)
    after = {}
    for r in rows:
        probe = gridscheme.NodeShare(node.share.rows.copy(), node.share.codeword,
                                     node.share.erased.copy())
        after.update(gridscheme.fuse_token(probe, r, c.keys))
    assert set(before) == {0, 1, 2}
    assert set(after) == {0, 2}


def test_captured_node_replay_yields_nothing_new():
    for seed in range(5):
        c, net, rows = _captured(seed)
        node = net.nodes[3]
        for k in list(node.unlocked):
            simnet.capture_harden(node, k)
        assert adversary.captured_replay(node.share, rows, c.keys, c.params.v) == set()


def test_hardening_twice_is_idempotent():
    c, net, rows = _captured()
    node = net.nodes[3]
    simnet.capture_harden(node, 0)
    snapshot = (node.share.rows.copy(), node.share.erased.copy())
    simnet.capture_harden(node, 0)
    assert np.array_equal(node.share.rows, snapshot[0])
    assert np.array_equal(node.share.erased, snapshot[1])


def test_hardening_needs_an_unlocked_key():
    c, net, rows = _captured()
    with pytest.raises(UsageError):
        simnet.capture_harden(net.nodes[0], 4)


# -- collusion ----------------------------------------------------------------------

def _single_key_trials(count):
    rng = np.random.default_rng(2024)
    for trial in range(count):
        v = int(rng.integers(4, 8))
        c = grid_centre(v, trial)
        k = int(rng.integers(v))
        x = int(rng.integers(1, v + 1))
        ys = rng.choice(np.arange(v + 1, 2 * v + 1), int(rng.integers(1, v)), replace=False)
        pts = {(x, int(y)) for y in ys}
        t = gridscheme.build_grid_token([(k, pts)], c.keys, c.layout, rng)
        privileged = {c.node_at(k, p) for p in pts}
        outsiders = [c.issue_share(i) for i in range(c.n) if i not in privileged]
        yield c, k, t, outsiders


def test_value_only_pooling_never_verifies():
    for c, k, t, outsiders in _single_key_trials(100):
        assert not adversary.pooled_fragment_attack(outsiders, t.row, k, c.table.numbers[k],
                                                    c.keys, positional=False)


def test_positional_pooling_is_a_known_gap():
    # intersecting match sets across outsiders strips the noise; this documents that
    hits = sum(adversary.pooled_fragment_attack(o, t.row, k, c.table.numbers[k], c.keys)
               for c, k, t, o in _single_key_trials(20))
    assert hits > 0


def test_token_stacks_alone_reveal_nothing():
    rng = np.random.default_rng(8)
    for trial in range(30):
        v = int(rng.integers(4, 8))
        c = grid_centre(v, trial)
        rows = []
        for _ in range(int(rng.integers(2, 11))):
            k = int(rng.integers(v))
            p = (int(rng.integers(1, v + 1)), int(rng.integers(v + 1, 2 * v + 1)))
            rows.append(gridscheme.build_grid_token([(k, {p})], c.keys, c.layout, rng).row)
        assert adversary.token_stack_attack(rows, c.keys, c.params.Lp) == set()


def test_distance_tokens_leak_when_stacked():
    # distance tokens are bare code words with no random fill, so an eavesdropper
    # holding a few of them can isolate partitions; grid tokens are the ones meant to resist this
    params = SystemParams(12, 16, 1, 0, Variant.DISTANCE)
    c = simnet.CentreState.distance(params, scenarios.DISTANCE_S1_12)
    from tokenweave import codebook
    rows = [c.token_row(codebook.single_key_token(c.codewords[i][0], k))
            for i, k in ((0, 1), (2, 1), (5, 4))]
    assert adversary.token_stack_attack(rows, c.keys, params.Lp)
