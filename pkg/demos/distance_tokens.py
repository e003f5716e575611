"""
Single-node tokens in the distance scheme
=========================================

With twelve keys the row block S holds every balanced half-row up to
complement, giving ten nodes. Flipping one bit of a node's code word
yields a token that opens one key at that node only.
"""

import itertools

from tokenweave import codebook, scenarios, simnet
from tokenweave.bitcore import SystemParams, Variant

m = codebook.gen_distance_matrix(12, scenarios.DISTANCE_S1_12)
print(m.S)
print("pairwise distance range:", m.distance_range())

# the token for key 5 at node 6
t = codebook.single_key_token(m.N[5], 4)
print("".join(map(str, t)))

# check all 120 tokens at the bit level
params = SystemParams(12, 16, 1, seed=3, variant=Variant.DISTANCE)
centre = simnet.CentreState.distance(params, scenarios.DISTANCE_S1_12)
wrong = 0
for i, j in itertools.product(range(centre.n), range(12)):
    row = centre.token_row(codebook.single_key_token(centre.codewords[i][0], j))
    wrong += simnet.Network(centre).broadcast(row) != {i: {j}}
print("tokens reaching anyone else:", wrong)
