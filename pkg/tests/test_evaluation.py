import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reltucker import kgdata
from reltucker.evaluation import evaluate, filtered_rank, metrics_from_ranks, rank_queries
from reltucker.rtucker import RTModel, init_model


def sort_oracle(scores, gold, filter, policy):
    """Rank via explicit sorting of the surviving candidates."""
    cands = [(s, i) for i, s in enumerate(scores) if i == gold or i not in filter]
    g = scores[gold]
    ordered = sorted(cands, key=lambda c: -c[0])
    positions = [p + 1 for p, c in enumerate(ordered) if c[0] == g]
    return {"optimistic": min(positions), "pessimistic": max(positions),
            "mean": sum(positions) / len(positions)}[policy]


class TestFilteredRank:
    def test_examples(self):
        assert filtered_rank([0.9, 0.5, 0.7, 0.1], 1) == 3
        assert filtered_rank([0.9, 0.5, 0.7, 0.1], 1, filter={0}) == 2
        assert filtered_rank([0.5, 0.5, 0.5], 0, policy="mean") == 2
        assert filtered_rank([0.5, 0.5, 0.5], 0, policy="optimistic") == 1
        assert filtered_rank([0.5, 0.5, 0.5], 0, policy="pessimistic") == 3

    def test_rejects_filtered_gold(self):
        with pytest.raises(ValueError):
            filtered_rank([1.0, 2.0], 0, filter={0})

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            filtered_rank([1.0, np.nan], 0)

    def test_bad_policy(self):
        with pytest.raises(ValueError):
            filtered_rank([1.0, 2.0], 0, policy="random")

    @settings(max_examples=200, deadline=None)
    @given(
        scores=st.lists(st.integers(-3, 3), min_size=1, max_size=12),
        data=st.data(),
        policy=st.sampled_from(["mean", "optimistic", "pessimistic"]),
    )
    def test_matches_sort_oracle(self, scores, data, policy):
        scores = [float(s) for s in scores]
        gold = data.draw(st.integers(0, len(scores) - 1))
        others = [i for i in range(len(scores)) if i != gold]
        filt = set(data.draw(st.lists(st.sampled_from(others), unique=True)) if others else [])
        assert filtered_rank(scores, gold, filt, policy) == sort_oracle(scores, gold, filt, policy)
        # filtering can only help
        assert filtered_rank(scores, gold, filt, policy) <= filtered_rank(scores, gold, (), policy)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(-50, 50), min_size=2, max_size=10), st.data())
    def test_monotone_invariance(self, scores, data):
        gold = data.draw(st.integers(0, len(scores) - 1))
        s = np.array(scores, dtype=float)
        assert filtered_rank(s, gold) == filtered_rank(s**3 * 2 + 7, gold)


class TestMetrics:
    def test_from_ranks(self):
        m = metrics_from_ranks([1, 2, 4, 20])
        assert m.mrr == pytest.approx((1 + 0.5 + 0.25 + 0.05) / 4)
        assert (m.hits1, m.hits3, m.hits10, m.num_queries) == (0.25, 0.5, 0.75, 4)

    def test_empty(self):
        assert metrics_from_ranks([]).num_queries == 0

    def test_human_text_percent(self):
        assert "MRR:     50.0" in metrics_from_ranks([2, 2]).human_text()


def brute_force_metrics(model, triples, known, policy="mean"):
    ranks = []
    for s, k, o in triples:
        M = model.mixing_matrices(k)
        obj_scores = [model.E[s] @ M @ model.E[j] for j in range(model.N)]
        subj_scores = [model.E[i] @ M @ model.E[o] for i in range(model.N)]
        ranks.append(sort_oracle(obj_scores, o, {j for j in range(model.N) if (s, k, j) in known and j != o}, policy))
        ranks.append(sort_oracle(subj_scores, s, {i for i in range(model.N) if (i, k, o) in known and i != s}, policy))
    return metrics_from_ranks(ranks)


class TestEvaluate:
    def test_enumerated_kg(self, rng):
        N, K = 4, 2
        every = np.array(list(itertools.product(range(N), range(K), range(N))))
        chosen = every[rng.random(len(every)) < 0.4]
        train, test = chosen[: len(chosen) // 2], chosen[len(chosen) // 2 :]
        index = kgdata.build_filter_index([train, test])
        known = {tuple(t) for t in chosen.tolist()}
        for kind in ("drt", "complex", "srt"):
            model = init_model(kind, N, K, 4, 3 if kind != "complex" else None, rng=rng, scale=1.0)
            for policy in ("mean", "optimistic", "pessimistic"):
                got = evaluate(model, test, index, policy)
                want = brute_force_metrics(model, test.tolist(), known, policy)
                assert got.mrr == pytest.approx(want.mrr, abs=1e-12)
                assert (got.hits1, got.hits3, got.hits10) == (want.hits1, want.hits3, want.hits10)

    def test_ties_with_zero_model(self):
        model = RTModel(E=np.zeros((5, 2)), R=np.zeros((1, 2)), core=init_model("drt", 5, 1, 2, 2, rng=np.random.default_rng(0)).core)
        obj, subj = rank_queries(model, [[0, 0, 1]], None, "mean")
        assert obj[0] == 3 and subj[0] == 3

    def test_out_of_range(self, rng):
        model = init_model("drt", 3, 1, 2, 2, rng=rng)
        with pytest.raises(IndexError):
            evaluate(model, [[0, 0, 5]], None)

    def test_chunking_invariant(self, rng):
        model = init_model("drt", 20, 3, 4, 2, rng=rng, scale=1.0)
        triples = np.column_stack([rng.integers(0, 20, 50), rng.integers(0, 3, 50), rng.integers(0, 20, 50)])
        index = kgdata.build_filter_index([triples])
        a = rank_queries(model, triples, index, chunk=7)
        b = rank_queries(model, triples, index, chunk=1000)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])
