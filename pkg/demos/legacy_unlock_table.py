"""
Cumulative unlocking with a three-node codebook
===============================================

Three nodes each hold two rows of a 3x6 code matrix. Four broadcast tokens
are fused one after another and we watch which keys every node can read.
"""

import numpy as np

from tokenweave import codebook, scenarios, simnet
from tokenweave.bitcore import SystemParams, Variant

# the node matrix; no column is unique, so a node share alone reveals nothing
N = scenarios.LEGACY_N
print(N)
print("rule 1 holds:", codebook.check_rule1(N))

# every token repeats the format z1 z2 z3 z2 z3 z1
T = scenarios.LEGACY_T
print(T)

# code-word level: stack a token over a share and look for lone columns
shares = [N[list(rows)] for rows in scenarios.LEGACY_NODE_ROWS]
table = codebook.legacy_unlock_table(shares, T)
for n, row in enumerate(table, 1):
    cells = ["{" + ",".join(f"K{k + 1}" for k in sorted(c)) + "}" for c in row]
    print(f"after token {n}:", *cells)

# the same thing on real bits: 16-bit keys hidden in partitions of the shares
params = SystemParams(6, 16, 2, seed=7, variant=Variant.LEGACY)
centre = simnet.CentreState.legacy(params, N, scenarios.LEGACY_NODE_ROWS)
net = simnet.Network(centre)
for t in T:
    net.broadcast(centre.token_row(t))
print("bit level agrees:", net.unlocked_sets() == table[-1])

# node 2 opens two keys from the first token: columns 4 and 6 both stand alone
stack = np.vstack([T[0], shares[1]])
print(stack)
print(codebook.unique_columns(stack))
