"""
Planning tokens for group keys
==============================

Seven keys, five nodes. Every pair of nodes should share a group key
built from keys both of them hold. The planner packs the needed grid
points into as few tokens as it can.
"""

from tokenweave import bitcore, planner, scenarios, simnet
from tokenweave.bitcore import SystemParams, Variant

for name, groups in scenarios.SEVEN_KEY_SCENARIOS.items():
    params = SystemParams(7, 32, 4, seed=0, variant=Variant.GRID)
    centre = simnet.CentreState.grid(params, n=5)
    target = centre.grids_for(scenarios.holders(groups))
    plan = planner.token_construction(target, centre.keys, centre.layout,
                                      params.rng(bitcore.STREAM_TOKENS), centre.node_points())
    print(name, "tokens:", len(plan), [(total, cls.value) for total, cls in plan.summary(7)])

    net = simnet.Network(centre)
    for t in plan.tokens:
        net.broadcast(t.row)
    for members, expr in simnet.derive_groups(net.nodes,
                                              scenarios.zero_based(groups)).rows():
        print("   ", sorted(m + 1 for m in members), simnet.expr_name(expr))
