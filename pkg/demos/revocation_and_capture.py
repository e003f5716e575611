"""
A node leaves, another is captured
==================================

Four nodes share three keys. When node 1 leaves, everything it could read
is dropped and the rest regroup on what is left. A captured node wipes the
share bits behind its keys so replaying old tokens gains an attacker nothing.
"""

from tokenweave import adversary, bitcore, planner, scenarios, simnet
from tokenweave.bitcore import SystemParams, Variant

params = SystemParams(3, 32, bitcore.min_rows_for(3), seed=0, variant=Variant.GRID)
centre = simnet.CentreState.grid(params, n=4)
target = centre.grids_for(scenarios.holders(scenarios.REVOCATION_GROUPS))
plan = planner.token_construction(target, centre.keys, centre.layout,
                                  params.rng(bitcore.STREAM_TOKENS), centre.node_points())
net = simnet.Network(centre)
for t in plan.tokens:
    net.broadcast(t.row)

for i, node in enumerate(net.nodes, 1):
    print(i, sorted(simnet.expr_name(e) for e in node.material))

rev = simnet.revoke(net.nodes, 0)
for i, kept in rev.retained.items():
    print("node", i + 1, "keeps", sorted(simnet.expr_name(e) for e in kept))
for members, expr in rev.groups.rows():
    print("group", sorted(m + 1 for m in members), simnet.expr_name(expr))

# capture node 3 after hardening
node = net.nodes[2]
for k in list(node.unlocked):
    simnet.capture_harden(node, k)
rows = [t.row for t in plan.tokens]
print("replay recovers:", adversary.captured_replay(node.share, rows, centre.keys, 3))
