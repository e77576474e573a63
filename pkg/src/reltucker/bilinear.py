"""Bilinear knowledge-graph embedding models.

Every model here scores a triple as ``e_i^T M_k e_j`` where the mixing
matrix ``M_k`` is built from the relation vector ``r_k`` by a
model-specific map.  All maps accept stacked relation vectors of shape
``(..., d_r)`` and return stacked mixing matrices ``(..., d_e, d_e)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("rescal", "distmult", "cp", "complex", "analogy")


def default_analogy_layout(d_e: int) -> str:
    """All 2x2 blocks, plus a trailing scalar block when ``d_e`` is odd."""
    return "2" * (d_e // 2) + "1" * (d_e % 2)


@dataclass(frozen=True)
class BilinearModelKind:
    """A bilinear model family at a given entity embedding size.

    ``layout`` only matters for Analogy: a string of ``'1'`` (scalar block)
    and ``'2'`` (2x2 rotation-scaling block) characters, read top-left to
    bottom-right, whose block sizes sum to ``d_e``.
    """

    name: str
    d_e: int
    layout: str | None = None

    def __post_init__(self):
        name = self.name.lower()
        object.__setattr__(self, "name", name)
        if name not in KINDS:
            raise ValueError(f"unknown bilinear model {self.name!r}; expected one of {KINDS}")
        if self.d_e < 1:
            raise ValueError(f"d_e must be positive, got {self.d_e}")
        if name in ("cp", "complex") and self.d_e % 2:
            raise ValueError(f"{name} requires an even d_e, got {self.d_e}")
        if name == "analogy":
            layout = self.layout or default_analogy_layout(self.d_e)
            if set(layout) - {"1", "2"}:
                raise ValueError(f"analogy layout may only contain '1' and '2', got {layout!r}")
            if sum(int(c) for c in layout) != self.d_e:
                raise ValueError(f"analogy layout {layout!r} does not cover d_e={self.d_e}")
            object.__setattr__(self, "layout", layout)
        elif self.layout is not None:
            raise ValueError(f"layout is only meaningful for analogy, not {name}")

    @property
    def d_r(self) -> int:
        if self.name == "rescal":
            return self.d_e * self.d_e
        if self.name == "cp":
            return self.d_e // 2
        return self.d_e


def _check_r(kind: BilinearModelKind, r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.ndim == 0 or r.shape[-1] != kind.d_r:
        raise ValueError(
            f"{kind.name} with d_e={kind.d_e} needs relation vectors of length "
            f"{kind.d_r}, got shape {r.shape}"
        )
    return r


def _check_m(kind: BilinearModelKind, m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim < 2 or m.shape[-2:] != (kind.d_e, kind.d_e):
        raise ValueError(f"expected mixing matrices of shape (..., {kind.d_e}, {kind.d_e}), got {m.shape}")
    return m


def _analogy_blocks(layout: str):
    """Yield ``(block, offset)``; rows and relation entries share the offset."""
    pos = 0
    for block in layout:
        yield block, pos
        pos += int(block)


def mixing_matrix(kind: BilinearModelKind, r) -> np.ndarray:
    """Build the mixing matrix (or a stack of them) for relation vector(s) ``r``.

    RESCAL un-vectorizes row by row, which is the placement the fixed
    RESCAL core tensor encodes (``r_l`` lands at row ``l // d_e``, column
    ``l % d_e``).
    """
    r = _check_r(kind, r)
    d = kind.d_e
    batch = r.shape[:-1]
    if kind.name == "rescal":
        return r.reshape(*batch, d, d).copy()

    m = np.zeros(batch + (d, d))
    if kind.name == "distmult":
        idx = np.arange(d)
        m[..., idx, idx] = r
    elif kind.name == "cp":
        h = d // 2
        idx = np.arange(h)
        m[..., idx, idx + h] = r
    elif kind.name == "complex":
        h = d // 2
        idx = np.arange(h)
        left, right = r[..., :h], r[..., h:]
        m[..., idx, idx] = left
        m[..., idx + h, idx + h] = left
        m[..., idx, idx + h] = right
        m[..., idx + h, idx] = -right
    else:
        for block, p in _analogy_blocks(kind.layout):
            if block == "1":
                m[..., p, p] = r[..., p]
            else:
                x, y = r[..., p], r[..., p + 1]
                m[..., p, p] = x
                m[..., p + 1, p + 1] = x
                m[..., p, p + 1] = -y
                m[..., p + 1, p] = y
    return m


def mixing_adjoint(kind: BilinearModelKind, grad_m) -> np.ndarray:
    """Pull a gradient w.r.t. the mixing matrix back to the relation vector.

    This is the transpose of the linear map :func:`mixing_matrix`, i.e.
    ``<grad_m, mixing_matrix(r)> == <mixing_adjoint(grad_m), r>``.
    """
    g = _check_m(kind, grad_m)
    d = kind.d_e
    batch = g.shape[:-2]
    if kind.name == "rescal":
        return g.reshape(*batch, d * d).copy()
    if kind.name == "distmult":
        return np.diagonal(g, axis1=-2, axis2=-1).copy()
    idx = np.arange(d // 2)
    h = d // 2
    if kind.name == "cp":
        return g[..., idx, idx + h].copy()
    if kind.name == "complex":
        left = g[..., idx, idx] + g[..., idx + h, idx + h]
        right = g[..., idx, idx + h] - g[..., idx + h, idx]
        return np.concatenate([left, right], axis=-1)
    out = np.zeros(batch + (d,))
    for block, p in _analogy_blocks(kind.layout):
        if block == "1":
            out[..., p] = g[..., p, p]
        else:
            out[..., p] = g[..., p, p] + g[..., p + 1, p + 1]
            out[..., p + 1] = g[..., p + 1, p] - g[..., p, p + 1]
    return out


def relation_vector(kind: BilinearModelKind, m) -> np.ndarray:
    """Read the relation vector back off a mixing matrix of this kind.

    Inverse of :func:`mixing_matrix` on its image.  Entries that appear
    more than once are read from their first (upper-left) occurrence.
    """
    m = _check_m(kind, m)
    d = kind.d_e
    batch = m.shape[:-2]
    if kind.name == "rescal":
        return m.reshape(*batch, d * d).copy()
    if kind.name == "distmult":
        return np.diagonal(m, axis1=-2, axis2=-1).copy()
    h = d // 2
    idx = np.arange(h)
    if kind.name == "cp":
        return m[..., idx, idx + h].copy()
    if kind.name == "complex":
        return np.concatenate([m[..., idx, idx], m[..., idx, idx + h]], axis=-1)
    out = np.zeros(batch + (d,))
    for block, p in _analogy_blocks(kind.layout):
        out[..., p] = m[..., p, p]
        if block == "2":
            out[..., p + 1] = m[..., p + 1, p]
    return out


def pattern(kind: BilinearModelKind) -> np.ndarray:
    """Boolean ``d_e x d_e`` mask of the entries a mixing matrix may use."""
    return mixing_matrix(kind, np.ones(kind.d_r)) != 0


def score_direct(e_i, m_k, e_j) -> float:
    """``e_i^T M_k e_j``."""
    e_i = np.asarray(e_i, dtype=np.float64)
    e_j = np.asarray(e_j, dtype=np.float64)
    m_k = np.asarray(m_k, dtype=np.float64)
    if e_i.ndim != 1 or e_j.ndim != 1 or m_k.shape != (e_i.size, e_j.size):
        raise ValueError(
            f"dimension mismatch: e_i {e_i.shape}, M_k {m_k.shape}, e_j {e_j.shape}"
        )
    return float(e_i @ m_k @ e_j)


def score_grad_direct(e_i, m_k, e_j):
    """Gradients of :func:`score_direct` w.r.t. ``e_i``, ``e_j`` and ``M_k``."""
    e_i = np.asarray(e_i, dtype=np.float64)
    e_j = np.asarray(e_j, dtype=np.float64)
    m_k = np.asarray(m_k, dtype=np.float64)
    if e_i.ndim != 1 or e_j.ndim != 1 or m_k.shape != (e_i.size, e_j.size):
        raise ValueError(
            f"dimension mismatch: e_i {e_i.shape}, M_k {m_k.shape}, e_j {e_j.shape}"
        )
    return m_k @ e_j, m_k.T @ e_i, np.outer(e_i, e_j)
