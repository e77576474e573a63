"""Training RT models with softmax cross-entropy over sampled negatives.

Every positive triple yields an object-corruption list and a subject-
corruption list, each headed by the positive.  Gradients are computed in
closed form through the bilinear score, the mode-3 product, dropout masks
and (for SRT) the hard-concrete gates, then applied with AdaGrad.
"""

from __future__ import annotations

import copy
import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import log_softmax, softmax

from . import bilinear, kgdata, sparsity
from .rtucker import RTModel, mode3_product

log = logging.getLogger(__name__)

SOFTMAX_MODES = ("per_slot", "joint")


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    lr: float = 0.1
    weight_decay: float = 0.0
    dropout: float = 0.0
    num_negatives: int = 24
    batch_size: int = 500
    l0_lambda: float = 0.0
    l0_warmup: int = 25
    patience: int = 10
    max_epochs: int = 100
    seed: int = 0
    softmax: str = "per_slot"
    adagrad_eps: float = 1e-10
    filter_splits: str = "train,valid,test"
    tie_policy: str = "mean"

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.num_negatives < 1:
            raise ValueError("num_negatives must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.softmax not in SOFTMAX_MODES:
            raise ValueError(f"softmax must be one of {SOFTMAX_MODES}, got {self.softmax!r}")
        kgdata.parse_filter_splits(self.filter_splits)
        sparsity.L0Config(self.l0_lambda, self.l0_warmup)

    @property
    def l0(self) -> sparsity.L0Config:
        return sparsity.L0Config(self.l0_lambda, self.l0_warmup)


@dataclass
class Gradients:
    E: np.ndarray
    R: np.ndarray | None = None
    G: np.ndarray | None = None
    log_alpha: np.ndarray | None = None


@dataclass
class BatchNoise:
    """All randomness of one training step, so a step can be replayed exactly.

    Dropout masks are stored pre-scaled (entries are 0 or ``1/(1-eta)``).
    """

    neg_objects: np.ndarray
    neg_subjects: np.ndarray
    relations: np.ndarray  # unique relation ids in the batch
    rel_inverse: np.ndarray  # batch position -> index into ``relations``
    mask_subject: np.ndarray
    mask_object: np.ndarray
    mask_neg_objects: np.ndarray
    mask_neg_subjects: np.ndarray
    mask_mixing: np.ndarray
    gate_u: np.ndarray | None = None


def apply_dropout(x, eta: float, rng: np.random.Generator | None = None, training: bool = True):
    """Inverted dropout.  Returns ``(dropped, mask)``; ``mask`` is pre-scaled."""
    x = np.asarray(x, dtype=np.float64)
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {eta}")
    if not training or eta == 0.0:
        return x, np.ones_like(x)
    mask = (rng.random(x.shape) >= eta) / (1.0 - eta)
    return x * mask, mask


def _dropout_mask(shape, eta, rng):
    if eta == 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= eta) / (1.0 - eta)


def draw_noise(model: RTModel, batch, config: TrainConfig, rng: np.random.Generator) -> BatchNoise:
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    B, n, d, eta = len(batch), config.num_negatives, model.d_e, config.dropout
    if B == 0:
        raise ValueError("empty batch")
    neg_o = kgdata.corrupt_batch(batch[:, 2], n, model.N, rng)
    neg_s = kgdata.corrupt_batch(batch[:, 0], n, model.N, rng)
    rels, inv = np.unique(batch[:, 1], return_inverse=True)
    return BatchNoise(
        neg_objects=neg_o,
        neg_subjects=neg_s,
        relations=rels,
        rel_inverse=inv.reshape(-1),
        mask_subject=_dropout_mask((B, d), eta, rng),
        mask_object=_dropout_mask((B, d), eta, rng),
        mask_neg_objects=_dropout_mask((B, n, d), eta, rng),
        mask_neg_subjects=_dropout_mask((B, n, d), eta, rng),
        mask_mixing=_dropout_mask((len(rels), d, d), eta, rng),
        gate_u=None if model.gates is None else sparsity.draw_uniform(model.gates.shape, rng),
    )


def _list_losses(scores_o, scores_s, mode):
    """Loss and per-score gradients for the candidate lists (positive at column 0)."""
    B = scores_o.shape[0]
    if mode == "per_slot":
        lists = 2 * B
        loss = -(log_softmax(scores_o, axis=1)[:, 0].sum() + log_softmax(scores_s, axis=1)[:, 0].sum()) / lists
        g_o = softmax(scores_o, axis=1)
        g_s = softmax(scores_s, axis=1)
        g_o[:, 0] -= 1.0
        g_s[:, 0] -= 1.0
        return loss, g_o / lists, g_s / lists
    # one list per positive: the positive, then object and subject corruptions
    joint = np.concatenate([scores_o, scores_s[:, 1:]], axis=1)
    loss = -log_softmax(joint, axis=1)[:, 0].sum() / B
    g = softmax(joint, axis=1)
    g[:, 0] -= 1.0
    g /= B
    n1 = scores_o.shape[1]
    g_s = np.zeros_like(scores_s)
    g_s[:, 1:] = g[:, n1:]
    return loss, g[:, :n1], g_s


def loss_and_grads(model: RTModel, batch, config: TrainConfig, noise: BatchNoise, epoch: int = 0):
    """Loss of one batch under fixed noise, with exact gradients.

    ``epoch`` is the 0-based epoch index; it decides whether the L0 penalty
    is active.
    """
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    if len(batch) == 0:
        raise ValueError("empty batch")
    subj, obj = batch[:, 0], batch[:, 2]
    E = model.E

    sample = None
    if model.core is None:
        M_u = bilinear.mixing_matrix(model.bilinear, model.R[noise.relations])
    else:
        if model.gates is not None:
            sample = sparsity.sample_gates(model.gates, u=noise.gate_u)
            G_eff = model.core.slices * sample.z
        else:
            G_eff = model.core.slices
        M_u = mode3_product(G_eff, model.R[noise.relations])
    Md_u = M_u * noise.mask_mixing
    M = Md_u[noise.rel_inverse]

    e_s = E[subj] * noise.mask_subject
    e_o = E[obj] * noise.mask_object
    cand_o = np.concatenate([e_o[:, None], E[noise.neg_objects] * noise.mask_neg_objects], axis=1)
    cand_s = np.concatenate([e_s[:, None], E[noise.neg_subjects] * noise.mask_neg_subjects], axis=1)
    v = np.einsum("bx,bxy->by", e_s, M)  # e_s^T M
    w = np.einsum("bxy,by->bx", M, e_o)  # M e_o
    scores_o = np.einsum("bcy,by->bc", cand_o, v)
    scores_s = np.einsum("bcx,bx->bc", cand_s, w)

    loss, g_o, g_s = _list_losses(scores_o, scores_s, config.softmax)

    g_cand_o = g_o[:, :, None] * v[:, None, :]
    g_cand_s = g_s[:, :, None] * w[:, None, :]
    g_v = np.einsum("bc,bcy->by", g_o, cand_o)
    g_w = np.einsum("bc,bcx->bx", g_s, cand_s)
    g_es = np.einsum("bxy,by->bx", M, g_v) + g_cand_s[:, 0]
    g_eo = np.einsum("bxy,bx->by", M, g_w) + g_cand_o[:, 0]
    g_M = e_s[:, :, None] * g_v[:, None, :] + g_w[:, :, None] * e_o[:, None, :]

    gE = np.zeros_like(E)
    np.add.at(gE, subj, g_es * noise.mask_subject)
    np.add.at(gE, obj, g_eo * noise.mask_object)
    np.add.at(gE, noise.neg_objects.reshape(-1), (g_cand_o[:, 1:] * noise.mask_neg_objects).reshape(-1, model.d_e))
    np.add.at(gE, noise.neg_subjects.reshape(-1), (g_cand_s[:, 1:] * noise.mask_neg_subjects).reshape(-1, model.d_e))

    # sum per-triple mixing gradients into their relation
    onehot = np.zeros((len(noise.relations), len(batch)))
    onehot[noise.rel_inverse, np.arange(len(batch))] = 1.0
    g_Mu = (onehot @ g_M.reshape(len(batch), -1)).reshape(M_u.shape) * noise.mask_mixing

    grads = Gradients(E=gE)
    gR = np.zeros_like(model.R)
    if model.core is None:
        gR[noise.relations] = bilinear.mixing_adjoint(model.bilinear, g_Mu)
    else:
        gR[noise.relations] = np.einsum("uxy,lxy->ul", g_Mu, G_eff)
        g_Geff = np.einsum("ul,uxy->lxy", model.R[noise.relations], g_Mu)
        if sample is not None:
            grads.G = g_Geff * sample.z
            grads.log_alpha = sparsity.gate_grad(model.gates, sample, g_Geff * model.core.slices)
        else:
            grads.G = g_Geff
        if model.bilinear is not None:
            # constrained view: keep tied entries tied
            grads.G = bilinear.mixing_matrix(model.bilinear, bilinear.mixing_adjoint(model.bilinear, grads.G))
        if model.core.fixed is not None:
            grads.G = np.where(model.core.fixed, 0.0, grads.G)
    grads.R = None if model.r_fixed else gR

    lam = config.l0.weight(epoch)
    if model.gates is not None and lam > 0.0:
        loss += lam * sparsity.expected_l0(model.gates)
        grads.log_alpha = grads.log_alpha + lam * sparsity.expected_l0_grad(model.gates)
    return float(loss), grads


def batch_loss_and_grads(model: RTModel, batch, config: TrainConfig, rng: np.random.Generator, epoch: int = 0):
    """Draw fresh noise for ``batch`` and return ``(loss, gradients)``."""
    return loss_and_grads(model, batch, config, draw_noise(model, batch, config, rng), epoch)


@dataclass
class AdaGradState:
    accumulators: dict[str, np.ndarray] = field(default_factory=dict)
    eps: float = 1e-10


def adagrad_update(param: np.ndarray, grad, acc: np.ndarray, lr: float, weight_decay: float, eps: float, fixed=None):
    """In-place AdaGrad step with weight decay folded into the gradient."""
    if grad.shape != param.shape or acc.shape != param.shape:
        raise ValueError(f"shape mismatch: param {param.shape}, grad {grad.shape}, acc {acc.shape}")
    g = grad + weight_decay * param if weight_decay else grad
    if fixed is not None:
        g = np.where(fixed, 0.0, g)
    acc += g * g
    param -= lr * g / (np.sqrt(acc) + eps)


def adagrad_step(model: RTModel, grads: Gradients, state: AdaGradState, lr: float, weight_decay: float = 0.0):
    """Apply one AdaGrad update to every free parameter of ``model``."""
    targets = [("E", model.E, grads.E, weight_decay, None)]
    if grads.R is not None and not model.r_fixed:
        targets.append(("R", model.R, grads.R, weight_decay, None))
    if grads.G is not None and model.core is not None:
        targets.append(("G", model.core.slices, grads.G, weight_decay, model.core.fixed))
    if grads.log_alpha is not None and model.gates is not None:
        # gate locations are not decayed
        targets.append(("log_alpha", model.gates.log_alpha, grads.log_alpha, 0.0, None))
    for name, param, grad, wd, fixed in targets:
        acc = state.accumulators.setdefault(name, np.zeros_like(param))
        adagrad_update(param, grad, acc, lr, wd, state.eps, fixed)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    mrr: float
    hits1: float
    hits3: float
    hits10: float
    sparsity: float | None
    seconds: float

    def log_line(self, with_time: bool = True) -> str:
        sp = "" if self.sparsity is None else repr(100.0 * self.sparsity)
        fields = [str(self.epoch), repr(self.loss), repr(self.mrr), repr(self.hits1), repr(self.hits3), repr(self.hits10), sp]
        if with_time:
            fields.append(f"{self.seconds:.3f}")
        return "\t".join(fields)


@dataclass
class FitResult:
    model: RTModel
    history: list[EpochRecord]
    best_epoch: int

    @property
    def best(self) -> EpochRecord:
        return next(r for r in self.history if r.epoch == self.best_epoch)


def default_evaluator(splits: kgdata.SplitDataset, config: TrainConfig) -> Callable:
    from .evaluation import evaluate

    names = kgdata.parse_filter_splits(config.filter_splits)
    index = kgdata.build_filter_index([splits.split(n) for n in names])
    return lambda model: evaluate(model, splits.valid, index, tie_policy=config.tie_policy)


def fit(
    model: RTModel,
    splits: kgdata.SplitDataset,
    config: TrainConfig,
    evaluator: Callable | None = None,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> FitResult:
    """Train until validation MRR stops improving for ``patience`` epochs.

    ``model`` is updated in place; the returned model is a copy taken at
    the best validation epoch.
    """
    if len(splits.valid) == 0 and evaluator is None:
        raise ValueError("early stopping needs a nonempty validation split")
    if len(splits.train) == 0:
        raise ValueError("empty training split")
    evaluator = evaluator or default_evaluator(splits, config)
    rng = np.random.default_rng(config.seed)
    state = AdaGradState(eps=config.adagrad_eps)
    history: list[EpochRecord] = []
    best_mrr, best_model, best_epoch, stale = -np.inf, model.copy(), 0, 0
    start = time.perf_counter()

    for epoch in range(config.max_epochs):
        total, count = 0.0, 0
        for batch in kgdata.iter_batches(splits.train, config.batch_size, rng):
            loss, grads = batch_loss_and_grads(model, batch, config, rng, epoch)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss {loss} in epoch {epoch + 1}")
            adagrad_step(model, grads, state, config.lr, config.weight_decay)
            total += loss * len(batch)
            count += len(batch)
        report = evaluator(model)
        record = EpochRecord(
            epoch=epoch + 1,
            loss=total / count,
            mrr=report.mrr,
            hits1=report.hits1,
            hits3=report.hits3,
            hits10=report.hits10,
            sparsity=None if model.gates is None else sparsity.sparsity_report(model.gates),
            seconds=time.perf_counter() - start,
        )
        history.append(record)
        log.info(record.log_line())
        if on_epoch is not None:
            on_epoch(record)
        if report.mrr > best_mrr:
            best_mrr, best_model, best_epoch, stale = report.mrr, copy.deepcopy(model), epoch + 1, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return FitResult(best_model, history, best_epoch)
