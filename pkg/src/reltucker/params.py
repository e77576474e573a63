"""Counting the parameters a model actually uses.

``nnfp`` is the number of non-zero free parameters of an array: entries
that are neither structurally fixed nor exactly zero.  The effective
relation size averages the relation-side parameters (core plus relation
embeddings) over relations, which gives the same value for a bilinear
model whether it is viewed with a fixed core or a constrained one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bilinear
from .rtucker import RTModel
from .sparsity import deterministic_gates


def nnfp(values, fixed=None, gate=None) -> int:
    values = np.asarray(values)
    if gate is not None:
        values = values * np.asarray(gate)
    nonzero = values != 0
    if fixed is not None:
        nonzero &= ~np.asarray(fixed, dtype=bool)
    return int(np.count_nonzero(nonzero))


def core_nnfp(model: RTModel) -> int:
    if model.core is None:
        return 0
    if model.bilinear is not None:
        # tied entries count once
        return nnfp(bilinear.relation_vector(model.bilinear, model.core.slices))
    gate = None if model.gates is None else deterministic_gates(model.gates)
    return nnfp(model.core.slices, model.core.fixed, gate)


def relation_nnfp(model: RTModel) -> int:
    return 0 if model.r_fixed else nnfp(model.R)


def effective_relation_size_from_counts(nnfp_core: int, nnfp_relations: int, num_relations: int) -> float:
    if num_relations < 1:
        raise ValueError("need at least one relation")
    return (nnfp_core + nnfp_relations) / num_relations


@dataclass(frozen=True)
class ParamReport:
    nnfp_E: int
    nnfp_R: int
    nnfp_G: int
    num_relations: int

    @property
    def effective_relation_size(self) -> float:
        return effective_relation_size_from_counts(self.nnfp_G, self.nnfp_R, self.num_relations)

    @property
    def effective_total(self) -> int:
        return self.nnfp_E + self.nnfp_R + self.nnfp_G

    def lines(self) -> list[str]:
        return [
            f"nnfp(E): {self.nnfp_E}",
            f"nnfp(R): {self.nnfp_R}",
            f"nnfp(G): {self.nnfp_G}",
            f"relations: {self.num_relations}",
            f"effective relation size: {self.effective_relation_size:g}",
            f"effective parameters: {self.effective_total}",
        ]


def param_report(model: RTModel) -> ParamReport:
    return ParamReport(
        nnfp_E=nnfp(model.E),
        nnfp_R=relation_nnfp(model),
        nnfp_G=core_nnfp(model),
        num_relations=model.K,
    )


def effective_relation_size(model: RTModel) -> float:
    return param_report(model).effective_relation_size


def effective_num_params(model: RTModel) -> int:
    return param_report(model).effective_total
