"""
Releasing a key along a grid line
=================================

In the grid scheme every node sits at one point per key. A single token
can open a key at every node on one row or one column of that grid.
"""

from tokenweave import adversary, bitcore, gridscheme, scenarios, simnet
from tokenweave.bitcore import SystemParams, Variant

params = SystemParams(4, 16, 3, seed=1, variant=Variant.GRID)
table = gridscheme.KeyTable(scenarios.KEY_TABLE_4, 3)
centre = simnet.CentreState.grid(params, table=table, seeds=(scenarios.R1_4, scenarios.R2_4))

# node code words are circular shifts of two seed rows
print(centre.codewords[7])
print(centre.coordinates(7))

# ask for K2 at every node with x = 2
k = 1
points = {(2, y) for y in range(5, 9)}
rng = params.rng(bitcore.STREAM_TOKENS)
token = gridscheme.build_grid_token([(k, points)], centre.keys, centre.layout, rng)

net = simnet.Network(centre)
net.broadcast(token.row)
print("holders of K2:", sorted(net.holders(k)))
print("expected:     ", sorted(centre.node_at(k, p) for p in points))

# a stack of tokens without any share verifies no key
rows = [token.row] + [gridscheme.build_grid_token([], centre.keys, centre.layout, rng).row
                      for _ in range(9)]
print("keys from stacked tokens:", adversary.token_stack_attack(rows, centre.keys, 16))
