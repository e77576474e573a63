"""
Filtered ranking by hand
========================

A four-entity graph with one relation, where the mixing matrix is the score
table itself. Known answers other than the gold are removed before ranking,
and tied candidates share ranks according to the tie policy.
"""

import numpy as np

from reltucker.evaluation import evaluate, filtered_rank
from reltucker.kgdata import build_filter_index
from reltucker.rtucker import CoreTensor, RTModel

scores = np.array([
    [0.0, 0.9, 0.5, 0.5],
    [0.1, 0.2, 0.3, 0.4],
    [0.7, 0.6, 0.5, 0.4],
    [0.2, 0.8, 0.8, 0.1],
])
model = RTModel(E=np.eye(4), R=np.ones((1, 1)), core=CoreTensor(scores[None]))

# object query (0, r, ?) with gold 2; entity 1 is also a known answer
for policy in ("optimistic", "mean", "pessimistic"):
    print(policy, filtered_rank(scores[0], 2, filter={1}, policy=policy))

train = np.array([[0, 0, 1], [0, 0, 2]])
test = np.array([[0, 0, 2], [3, 0, 1]])
print(evaluate(model, test, build_filter_index([train, test])).human_text())
