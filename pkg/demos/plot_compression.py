"""
Sharing a core across relations
===============================

In the family graph, ``parent`` is the union of ``mother`` and ``father``.
A dense relational Tucker model with only two relation dimensions for three
relations can still fit it, because the parent mixing matrix can be the sum
of the other two.
"""

import numpy as np

from reltucker import synthetic
from reltucker.evaluation import evaluate
from reltucker.kgdata import build_filter_index
from reltucker.rtucker import init_model
from reltucker.training import TrainConfig, fit

ds = synthetic.family_kg(seed=0)
print(f"train/valid/test: {len(ds.train)}/{len(ds.valid)}/{len(ds.test)}")

model = init_model("drt", 50, 3, 8, 2, rng=np.random.default_rng([0, 1]), scale=0.5)
res = fit(model, ds, TrainConfig(lr=0.1, batch_size=120, max_epochs=200, patience=50))
print(f"best epoch {res.best_epoch}, valid MRR {res.best.mrr:.3f}")

index = build_filter_index([ds.train, ds.valid, ds.test])
print(evaluate(res.model, ds.test, index).human_text())

###############################################################################
# The learned relation embeddings: parent points roughly along mother + father.

R = res.model.R
print("mother + father:", np.round(R[0] + R[1], 3))
print("parent         :", np.round(R[2], 3))
