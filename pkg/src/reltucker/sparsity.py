"""Hard-concrete L0 gates for sparsifying the core tensor.

Each core entry ``g`` is multiplied by a gate ``z`` in ``[0, 1]``.  During
training ``z`` is a stretched, clamped concrete sample; at evaluation it is
the deterministic clamped stretch of ``sigmoid(log_alpha)``.  The expected
number of nonzero gates is a smooth function of ``log_alpha`` and serves as
the L0 penalty.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit

BETA = 2.0 / 3.0
ZETA = 1.1
GAMMA = -0.1
LOC_MEAN = 3.0
LOC_STD = 1.0


@dataclass
class HardConcreteGates:
    log_alpha: np.ndarray
    beta: float = BETA
    zeta: float = ZETA
    gamma: float = GAMMA
    loc_mean: float = LOC_MEAN
    loc_std: float = LOC_STD

    def __post_init__(self):
        self.log_alpha = np.asarray(self.log_alpha, dtype=np.float64)
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"temperature beta must lie in (0, 1), got {self.beta}")
        if not (self.gamma < 0.0 and self.zeta > 1.0):
            raise ValueError(f"need gamma < 0 < 1 < zeta, got gamma={self.gamma}, zeta={self.zeta}")
        if not np.all(np.isfinite(self.log_alpha)):
            raise ValueError("log_alpha must be finite")

    @classmethod
    def initialize(cls, shape, rng: np.random.Generator, **constants) -> "HardConcreteGates":
        """Draw ``log_alpha ~ Normal(loc_mean, loc_std)``: gates start mostly open."""
        loc_mean = constants.get("loc_mean", LOC_MEAN)
        loc_std = constants.get("loc_std", LOC_STD)
        return cls(rng.normal(loc_mean, loc_std, size=shape), **constants)

    @property
    def shape(self):
        return self.log_alpha.shape

    def copy(self) -> "HardConcreteGates":
        return HardConcreteGates(
            self.log_alpha.copy(), self.beta, self.zeta, self.gamma, self.loc_mean, self.loc_std
        )


@dataclass
class L0Config:
    lam: float = 0.0
    warmup_epochs: int = 25

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"L0 weight must be non-negative, got {self.lam}")
        if self.warmup_epochs < 0:
            raise ValueError("warmup_epochs must be non-negative")

    def weight(self, epoch: int) -> float:
        """Penalty weight for a 0-based epoch index."""
        return self.lam if epoch >= self.warmup_epochs else 0.0


class GateSample(NamedTuple):
    z: np.ndarray
    u: np.ndarray
    s: np.ndarray  # sigmoid output before stretching
    stretched: np.ndarray  # before clamping


def draw_uniform(shape, rng: np.random.Generator) -> np.ndarray:
    """Uniform(0, 1) noise with the endpoints excluded."""
    u = rng.random(shape)
    tiny = np.finfo(np.float64).tiny
    return np.clip(u, tiny, 1.0 - np.finfo(np.float64).epsneg)


def sample_gates(gates: HardConcreteGates, rng: np.random.Generator | None = None, u=None) -> GateSample:
    """Draw stochastic gates.  Pass ``u`` to reuse fixed noise."""
    if u is None:
        if rng is None:
            raise ValueError("need either an rng or fixed noise u")
        u = draw_uniform(gates.shape, rng)
    u = np.asarray(u, dtype=np.float64)
    s = expit((np.log(u) - np.log1p(-u) + gates.log_alpha) / gates.beta)
    stretched = s * (gates.zeta - gates.gamma) + gates.gamma
    z = np.clip(stretched, 0.0, 1.0)
    return GateSample(z, u, s, stretched)


def gate_grad(gates: HardConcreteGates, sample: GateSample, grad_z) -> np.ndarray:
    """Chain a gradient w.r.t. sampled gates back to ``log_alpha``.

    The clamp has zero slope outside ``(0, 1)``.
    """
    inside = (sample.stretched > 0.0) & (sample.stretched < 1.0)
    dz = (gates.zeta - gates.gamma) * sample.s * (1.0 - sample.s) / gates.beta
    return np.where(inside, grad_z * dz, 0.0)


def deterministic_gates(gates: HardConcreteGates) -> np.ndarray:
    stretched = expit(gates.log_alpha) * (gates.zeta - gates.gamma) + gates.gamma
    return np.clip(stretched, 0.0, 1.0)


def _l0_shift(gates: HardConcreteGates) -> float:
    return gates.beta * np.log(-gates.gamma / gates.zeta)


def prob_nonzero(gates: HardConcreteGates) -> np.ndarray:
    """Per-gate probability that a sampled gate is nonzero."""
    return expit(gates.log_alpha - _l0_shift(gates))


def expected_l0(gates: HardConcreteGates) -> float:
    """Expected number of nonzero gates (unweighted L0 penalty)."""
    return float(prob_nonzero(gates).sum())


def expected_l0_grad(gates: HardConcreteGates) -> np.ndarray:
    p = prob_nonzero(gates)
    return p * (1.0 - p)


def apply_gates(free_core, z) -> np.ndarray:
    free_core = np.asarray(free_core, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if free_core.shape != z.shape:
        raise ValueError(f"core shape {free_core.shape} does not match gate shape {z.shape}")
    return free_core * z


def sparsity_report(gates: HardConcreteGates) -> float:
    """Fraction of entries whose deterministic gate is exactly zero."""
    z = deterministic_gates(gates)
    return float(np.count_nonzero(z == 0.0)) / z.size
