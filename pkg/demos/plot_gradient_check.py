"""
Checking gradients with finite differences
==========================================

With dropout masks, negatives and gate noise held fixed, the training loss
is a smooth function of the parameters and the analytic gradients can be
compared with central differences.
"""

import numpy as np

from reltucker.rtucker import init_model
from reltucker.training import TrainConfig, draw_noise, loss_and_grads

rng = np.random.default_rng(0)
model = init_model("srt", 6, 2, 4, 3, rng=rng, scale=1.0)
batch = np.array([[0, 0, 1], [2, 1, 3], [4, 0, 5]])
cfg = TrainConfig(num_negatives=3, dropout=0.2, l0_lambda=0.1, l0_warmup=0)
noise = draw_noise(model, batch, cfg, rng)

_, grads = loss_and_grads(model, batch, cfg, noise, epoch=1)


def numeric(x, h=1e-5):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + h
        up = loss_and_grads(model, batch, cfg, noise, epoch=1)[0]
        x[idx] = orig - h
        down = loss_and_grads(model, batch, cfg, noise, epoch=1)[0]
        x[idx] = orig
        g[idx] = (up - down) / (2 * h)
    return g


for name, x, g in (("E", model.E, grads.E), ("R", model.R, grads.R),
                   ("G", model.core.slices, grads.G), ("log_alpha", model.gates.log_alpha, grads.log_alpha)):
    num = numeric(x)
    print(f"{name:10s} relative error {np.linalg.norm(g - num) / np.linalg.norm(num):.2e}")
