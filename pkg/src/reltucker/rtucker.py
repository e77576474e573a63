"""Relational Tucker3 decomposition.

A model holds entity embeddings ``E`` (N x d_e), relation embeddings ``R``
(K x d_r) and a core tensor stored as ``d_r`` frontal slices of shape
``d_e x d_e``.  Relation ``k`` uses the mixing matrix
``M_k = sum_l R[k, l] * G_l`` and scores ``s(i, k, j) = E[i] @ M_k @ E[j]``.

Bilinear models fit in two ways.  In the fixed-core view the core is a
constant 0/+-1 tensor and only ``E`` and ``R`` are learned; we keep that
core implicit (``core is None``) and build mixing matrices through
:mod:`reltucker.bilinear`, which is equivalent to materializing
:func:`fixed_core`.  In the constrained view ``R`` is the identity and the
slices are the mixing matrices themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import bilinear
from .bilinear import BilinearModelKind
from .sparsity import HardConcreteGates, deterministic_gates

MODEL_KINDS = ("drt", "srt", "constrained") + bilinear.KINDS


@dataclass
class CoreTensor:
    slices: np.ndarray
    fixed: np.ndarray | None = None

    def __post_init__(self):
        self.slices = np.asarray(self.slices, dtype=np.float64)
        if self.slices.ndim != 3 or self.slices.shape[1] != self.slices.shape[2]:
            raise ValueError(f"core must have shape (d_r, d_e, d_e), got {self.slices.shape}")
        if self.slices.shape[0] == 0:
            raise ValueError("core tensor needs at least one frontal slice (d_r >= 1)")
        if self.fixed is not None:
            self.fixed = np.asarray(self.fixed, dtype=bool)
            if self.fixed.shape != self.slices.shape:
                raise ValueError(f"fixed mask shape {self.fixed.shape} != core shape {self.slices.shape}")

    @property
    def d_r(self) -> int:
        return self.slices.shape[0]

    @property
    def d_e(self) -> int:
        return self.slices.shape[1]

    def copy(self) -> "CoreTensor":
        return CoreTensor(self.slices.copy(), None if self.fixed is None else self.fixed.copy())


def mode3_product(core, r) -> np.ndarray:
    """Weighted sum of frontal slices; ``r`` may be a stack ``(..., d_r)``."""
    slices = core.slices if isinstance(core, CoreTensor) else np.asarray(core, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if r.shape[-1:] != (slices.shape[0],):
        raise ValueError(f"relation vector length {r.shape[-1:]} does not match d_r={slices.shape[0]}")
    return np.tensordot(r, slices, axes=([-1], [0]))


@dataclass
class RTModel:
    """Parameters of an RT decomposition plus the structure that constrains them.

    ``bilinear`` is the fixed-core model family when ``core`` is None, or
    the slice constraint of a constrained-view model.  ``r_fixed`` marks the
    whole relation matrix as structural (constrained view).
    """

    E: np.ndarray
    R: np.ndarray
    core: CoreTensor | None = None
    bilinear: BilinearModelKind | None = None
    r_fixed: bool = False
    gates: HardConcreteGates | None = None

    def __post_init__(self):
        self.E = np.asarray(self.E, dtype=np.float64)
        self.R = np.asarray(self.R, dtype=np.float64)
        if self.E.ndim != 2 or self.E.shape[0] < 1 or self.E.shape[1] < 1:
            raise ValueError(f"entity embeddings must be a nonempty N x d_e matrix, got {self.E.shape}")
        if self.R.ndim != 2 or self.R.shape[0] < 1:
            raise ValueError(f"relation embeddings must be a nonempty K x d_r matrix, got {self.R.shape}")
        if self.core is None:
            if self.bilinear is None:
                raise ValueError("a model without an explicit core needs a bilinear kind")
            if self.bilinear.d_e != self.d_e or self.bilinear.d_r != self.d_r:
                raise ValueError(
                    f"{self.bilinear.name} with d_e={self.bilinear.d_e} needs E cols {self.bilinear.d_e} "
                    f"and R cols {self.bilinear.d_r}; got {self.d_e} and {self.d_r}"
                )
            if self.gates is not None:
                raise ValueError("gates require an explicit core tensor")
        else:
            if self.core.d_e != self.d_e:
                raise ValueError(f"core slice size {self.core.d_e} != entity embedding size {self.d_e}")
            if self.core.d_r != self.d_r:
                raise ValueError(f"core has {self.core.d_r} slices but relation embeddings have {self.d_r} columns")
            if self.gates is not None and self.gates.shape != self.core.slices.shape:
                raise ValueError("gate shape must match the core tensor")

    @property
    def N(self) -> int:
        return self.E.shape[0]

    @property
    def K(self) -> int:
        return self.R.shape[0]

    @property
    def d_e(self) -> int:
        return self.E.shape[1]

    @property
    def d_r(self) -> int:
        return self.R.shape[1]

    @property
    def kind(self) -> str:
        if self.core is None:
            return self.bilinear.name
        if self.r_fixed:
            return "constrained"
        return "srt" if self.gates is not None else "drt"

    def copy(self) -> "RTModel":
        return replace(
            self,
            E=self.E.copy(),
            R=self.R.copy(),
            core=None if self.core is None else self.core.copy(),
            gates=None if self.gates is None else self.gates.copy(),
        )

    def effective_core(self, z=None) -> np.ndarray:
        """Core slices after gating; deterministic gates unless ``z`` is given."""
        if self.core is None:
            return fixed_core(self.bilinear).slices
        if self.gates is None:
            return self.core.slices
        if z is None:
            z = deterministic_gates(self.gates)
        return self.core.slices * z

    def mixing_matrices(self, relations, z=None) -> np.ndarray:
        """Stack of mixing matrices for the given relation indices."""
        relations = np.asarray(relations)
        _check_index(relations, self.K, "relation")
        r = self.R[relations]
        if self.core is None:
            return bilinear.mixing_matrix(self.bilinear, r)
        return mode3_product(self.effective_core(z), r)


def _check_index(idx, n, what):
    idx = np.asarray(idx)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"{what} index out of range [0, {n})")


def score_rt(model: RTModel, i: int, k: int, j: int) -> float:
    _check_index(i, model.N, "subject")
    _check_index(j, model.N, "object")
    m = model.mixing_matrices(k)
    return float(model.E[i] @ m @ model.E[j])


def score_all(model: RTModel, k: int, entity: int, slot: str) -> np.ndarray:
    """Scores of every entity placed in the open ``slot`` ('subject' or 'object')."""
    _check_index(entity, model.N, "entity")
    m = model.mixing_matrices(k)
    if slot == "object":
        return model.E @ (model.E[entity] @ m)
    if slot == "subject":
        return model.E @ (m @ model.E[entity])
    raise ValueError(f"slot must be 'subject' or 'object', got {slot!r}")


def fixed_core(kind: BilinearModelKind) -> CoreTensor:
    """The 0/+-1 core tensor that turns RT into the given bilinear model.

    Every entry is marked fixed.  Slice ``l`` says where (and with which
    sign) relation entry ``l`` lands in the mixing matrix.
    """
    d, d_r = kind.d_e, kind.d_r
    g = np.zeros((d_r, d, d))
    if kind.name == "rescal":
        for l in range(d_r):
            g[l, l // d, l % d] = 1.0
    elif kind.name == "distmult":
        for l in range(d):
            g[l, l, l] = 1.0
    elif kind.name == "cp":
        h = d // 2
        for l in range(h):
            g[l, l, l + h] = 1.0
    elif kind.name == "complex":
        h = d // 2
        for l in range(h):
            g[l, l, l] = 1.0
            g[l, l + h, l + h] = 1.0
        for l in range(h, d):
            g[l, l - h, l] = 1.0
            g[l, l, l - h] = -1.0
    else:
        p = 0
        for block in kind.layout:
            g[p, p, p] = 1.0
            if block == "2":
                g[p, p + 1, p + 1] = 1.0
                g[p + 1, p + 1, p] = 1.0
                g[p + 1, p, p + 1] = -1.0
            p += int(block)
    return CoreTensor(g, np.ones(g.shape, dtype=bool))


def constrained_view(E, matrices, constraint: BilinearModelKind | None = None) -> RTModel:
    """RT model with ``R = I_K`` (fixed) and the mixing matrices as core slices.

    With a ``constraint`` the slices must be mixing matrices of that kind;
    entries outside its sparsity pattern are fixed at zero.
    """
    matrices = np.asarray(matrices, dtype=np.float64)
    if matrices.ndim != 3 or matrices.shape[1] != matrices.shape[2]:
        raise ValueError(f"expected a stack of square mixing matrices, got shape {matrices.shape}")
    K = matrices.shape[0]
    fixed = None
    if constraint is not None:
        rebuilt = bilinear.mixing_matrix(constraint, bilinear.relation_vector(constraint, matrices))
        if not np.array_equal(rebuilt, matrices):
            raise ValueError(f"matrices are not {constraint.name} mixing matrices")
        fixed = np.broadcast_to(~bilinear.pattern(constraint), matrices.shape).copy()
    return RTModel(
        E=np.asarray(E, dtype=np.float64),
        R=np.eye(K),
        core=CoreTensor(matrices.copy(), fixed),
        bilinear=constraint,
        r_fixed=True,
    )


def tucker3_to_rt(A, B, C, H) -> RTModel:
    """Embed a Tucker3 decomposition with equal first two modes into RT.

    ``E = [A B]``, ``R = C`` and each slice puts ``H_l`` in the upper-right
    block, so ``score_rt(i, k, j) == a_i^T (H x_3 c_k) b_j``.
    """
    A, B, C, H = (np.asarray(x, dtype=np.float64) for x in (A, B, C, H))
    if A.ndim != 2 or B.ndim != 2 or C.ndim != 2 or H.ndim != 3:
        raise ValueError("A, B, C must be matrices and H a 3-way tensor")
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"first two modes must share entities: {A.shape[0]} != {B.shape[0]}")
    d_a, d_b, d_c = A.shape[1], B.shape[1], C.shape[1]
    if H.shape != (d_a, d_b, d_c):
        raise ValueError(f"core shape {H.shape} does not match factor ranks {(d_a, d_b, d_c)}")
    d_e = d_a + d_b
    g = np.zeros((d_c, d_e, d_e))
    g[:, :d_a, d_a:] = np.moveaxis(H, 2, 0)
    return RTModel(E=np.hstack([A, B]), R=C.copy(), core=CoreTensor(g))


def init_model(
    kind: str,
    N: int,
    K: int,
    d_e: int,
    d_r: int | None = None,
    *,
    rng: np.random.Generator,
    scale: float = 0.1,
    layout: str | None = None,
) -> RTModel:
    """Randomly initialized model of the given kind.

    All free parameters are drawn from ``Normal(0, scale)``; SRT gate
    locations follow :meth:`HardConcreteGates.initialize`.
    """
    kind = kind.lower()
    if kind in bilinear.KINDS:
        bk = BilinearModelKind(kind, d_e, layout)
        if d_r is not None and d_r != bk.d_r:
            raise ValueError(f"{kind} with d_e={d_e} has d_r={bk.d_r}, got d_r={d_r}")
        return RTModel(
            E=rng.normal(0.0, scale, (N, d_e)),
            R=rng.normal(0.0, scale, (K, bk.d_r)),
            bilinear=bk,
        )
    if kind in ("drt", "srt"):
        if d_r is None:
            raise ValueError(f"{kind} needs an explicit d_r")
        E = rng.normal(0.0, scale, (N, d_e))
        R = rng.normal(0.0, scale, (K, d_r))
        core = CoreTensor(rng.normal(0.0, scale, (d_r, d_e, d_e)))
        gates = HardConcreteGates.initialize(core.slices.shape, rng) if kind == "srt" else None
        return RTModel(E=E, R=R, core=core, gates=gates)
    if kind == "constrained":
        return constrained_view(rng.normal(0.0, scale, (N, d_e)), rng.normal(0.0, scale, (K, d_e, d_e)))
    raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
