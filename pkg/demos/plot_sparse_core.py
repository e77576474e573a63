"""
Learning a sparse core
======================

Gating each core entry with a hard-concrete variable and penalising the
expected number of open gates drives parts of the core to exactly zero.
Larger penalties give sparser cores.
"""

import numpy as np

from reltucker import params, synthetic
from reltucker.rtucker import init_model
from reltucker.training import TrainConfig, fit

ds = synthetic.family_kg(seed=0)

for lam in (0.01, 0.1, 0.5):
    model = init_model("srt", 50, 3, 8, 2, rng=np.random.default_rng([0, 1]), scale=0.5)
    cfg = TrainConfig(lr=0.1, batch_size=30, max_epochs=150, patience=150, l0_lambda=lam, l0_warmup=25)
    res = fit(model, ds, cfg)
    last = res.history[-1]
    print(f"lambda={lam:<5} sparsity {100 * last.sparsity:5.1f}%  valid MRR {last.mrr:.3f}  "
          f"effective relation size {params.effective_relation_size(model):.1f}")
