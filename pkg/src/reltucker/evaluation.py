"""Filtered entity ranking: MRR and HITS@k."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kgdata import FilterIndex
from .rtucker import RTModel

TIE_POLICIES = ("mean", "optimistic", "pessimistic")


@dataclass(frozen=True)
class RankResult:
    triple: tuple[int, int, int]
    slot: str
    rank: float

    @property
    def reciprocal_rank(self) -> float:
        return 1.0 / self.rank


@dataclass(frozen=True)
class MetricsReport:
    mrr: float
    hits1: float
    hits3: float
    hits10: float
    num_queries: int

    def machine_line(self) -> str:
        return f"{self.mrr!r}\t{self.hits1!r}\t{self.hits3!r}\t{self.hits10!r}\t{self.num_queries}"

    def human_text(self) -> str:
        return (
            f"queries: {self.num_queries}\n"
            f"MRR:     {100 * self.mrr:.1f}\n"
            f"HITS@1:  {100 * self.hits1:.1f}\n"
            f"HITS@3:  {100 * self.hits3:.1f}\n"
            f"HITS@10: {100 * self.hits10:.1f}"
        )


def _tie_offset(ties: np.ndarray, policy: str):
    if policy == "mean":
        return (ties - 1) / 2.0
    if policy == "pessimistic":
        return ties - 1
    if policy == "optimistic":
        return np.zeros_like(ties)
    raise ValueError(f"tie policy must be one of {TIE_POLICIES}, got {policy!r}")


def filtered_rank(scores, gold: int, filter=(), policy: str = "mean") -> float:
    """Rank of ``gold`` among all candidates not in ``filter`` (1 = best).

    Candidates scoring equal to the gold share ranks according to
    ``policy``: their mean rank, the worst, or the best.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    if gold in filter:
        raise ValueError(f"gold entity {gold} must not be filtered")
    keep = np.ones(scores.shape, dtype=bool)
    if len(filter):
        keep[list(filter)] = False
    g = scores[gold]
    higher = np.count_nonzero(keep & (scores > g))
    ties = np.count_nonzero(keep & (scores == g))
    return float(1 + higher + _tie_offset(np.array(ties), policy))


def _rank_rows(scores, gold, masks, policy):
    g = scores[np.arange(len(gold)), gold][:, None]
    higher = np.count_nonzero(masks & (scores > g), axis=1)
    ties = np.count_nonzero(masks & (scores == g), axis=1)
    return 1 + higher + _tie_offset(ties, policy)


def rank_queries(
    model: RTModel,
    triples,
    filter_index: FilterIndex | None,
    tie_policy: str = "mean",
    chunk: int = 256,
) -> tuple[np.ndarray, np.ndarray]:
    """Filtered ranks of each test triple's object and subject.

    Returns ``(object_ranks, subject_ranks)``, each aligned with ``triples``.
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if tie_policy not in TIE_POLICIES:
        raise ValueError(f"tie policy must be one of {TIE_POLICIES}, got {tie_policy!r}")
    if triples.size and (triples[:, [0, 2]].max() >= model.N or triples[:, 1].max() >= model.K):
        raise IndexError("test triples reference entities or relations outside the model")
    obj_ranks = np.empty(len(triples))
    subj_ranks = np.empty(len(triples))
    E = model.E
    for k in np.unique(triples[:, 1]):
        M = model.mixing_matrices(k)
        rows = np.flatnonzero(triples[:, 1] == k)
        for start in range(0, len(rows), chunk):
            idx = rows[start : start + chunk]
            s, o = triples[idx, 0], triples[idx, 2]
            for slot, fixed, gold, out, scores in (
                ("object", s, o, obj_ranks, (E[s] @ M) @ E.T),
                ("subject", o, s, subj_ranks, (E[o] @ M.T) @ E.T),
            ):
                if not np.all(np.isfinite(scores)):
                    raise ValueError("model produced non-finite scores")
                masks = np.ones(scores.shape, dtype=bool)
                if filter_index is not None:
                    for q, (f, g) in enumerate(zip(fixed.tolist(), gold.tolist())):
                        known = filter_index.answers(int(k), f, slot) - {g}
                        if known:
                            masks[q, list(known)] = False
                out[idx] = _rank_rows(scores, gold, masks, tie_policy)
    return obj_ranks, subj_ranks


def metrics_from_ranks(ranks) -> MetricsReport:
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        return MetricsReport(0.0, 0.0, 0.0, 0.0, 0)
    return MetricsReport(
        mrr=float(np.mean(1.0 / ranks)),
        hits1=float(np.mean(ranks <= 1)),
        hits3=float(np.mean(ranks <= 3)),
        hits10=float(np.mean(ranks <= 10)),
        num_queries=int(ranks.size),
    )


def evaluate(model: RTModel, triples, filter_index: FilterIndex | None, tie_policy: str = "mean") -> MetricsReport:
    """Pool subject and object queries of every triple into one report."""
    obj_ranks, subj_ranks = rank_queries(model, triples, filter_index, tie_policy)
    return metrics_from_ranks(np.concatenate([obj_ranks, subj_ranks]))
