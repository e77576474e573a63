import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from reltucker.kgdata import (
    FilterIndex,
    SplitDataset,
    Triple,
    TripleFormatError,
    Vocabulary,
    build_filter_index,
    build_vocab,
    corrupt,
    corrupt_batch,
    iter_batches,
    load_dataset,
    load_triples,
    parse_filter_splits,
    sample_positive_batch,
    write_triples,
)


@pytest.fixture
def two_files(tmp_path):
    a = tmp_path / "a.txt"
    b = tmp_path / "b.txt"
    a.write_text("a\tr\tb\n")
    b.write_text("b\ts\tc\n")
    return a, b


class TestVocab:
    def test_first_appearance(self, two_files):
        v = build_vocab(two_files)
        assert v.entities == ["a", "b", "c"]
        assert v.relations == ["r", "s"]

    def test_roundtrip(self, two_files):
        v = build_vocab(two_files)
        assert all(v.entity_index[v.entities[i]] == i for i in range(v.num_entities))
        assert all(v.relation_index[v.relations[k]] == k for k in range(v.num_relations))

    def test_malformed(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("a\tr\tb\nx\ty\n")
        with pytest.raises(TripleFormatError, match=r"bad.txt:2"):
            build_vocab([p])

    def test_empty_input(self):
        with pytest.raises(ValueError):
            build_vocab([])

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError):
            Vocabulary(["a", "a"], ["r"])

    def test_save_load(self, two_files, tmp_path):
        v = build_vocab(two_files)
        v.save(tmp_path / "vocab")
        w = Vocabulary.load(tmp_path / "vocab")
        assert (w.entities, w.relations) == (v.entities, v.relations)


class TestLoad:
    def test_order_and_count(self, tmp_path):
        p = tmp_path / "t.txt"
        p.write_text("a\tr\tb\nb\tr\ta\na\ts\ta\n")
        v = build_vocab([p])
        t = load_triples(p, v)
        np.testing.assert_array_equal(t, [[0, 0, 1], [1, 0, 0], [0, 1, 0]])
        assert Triple(*t[0]) == Triple(0, 0, 1)

    def test_empty_file(self, tmp_path, two_files):
        p = tmp_path / "empty.txt"
        p.write_text("")
        assert load_triples(p, build_vocab(two_files)).shape == (0, 3)

    def test_unknown_token(self, tmp_path, two_files):
        p = tmp_path / "t.txt"
        p.write_text("a\tr\tzzz\n")
        with pytest.raises(TripleFormatError, match="zzz"):
            load_triples(p, build_vocab(two_files))

    def test_reserialize_identical(self, tmp_path):
        text = "x y\tlives in\tz\nz\tknows\tx y\n"
        p = tmp_path / "t.txt"
        p.write_text(text)
        v = build_vocab([p])
        q = tmp_path / "u.txt"
        write_triples(q, load_triples(p, v), v)
        assert q.read_bytes() == p.read_bytes()

    def test_load_dataset(self, tmp_path):
        for name, body in (("train", "a\tr\tb\n"), ("valid", "b\tr\tc\n"), ("test", "c\ts\ta\n")):
            (tmp_path / f"{name}.txt").write_text(body)
        ds = load_dataset(tmp_path)
        assert ds.vocab.entities == ["a", "b", "c"]
        np.testing.assert_array_equal(ds.test, [[2, 1, 0]])

    def test_load_dataset_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="valid.txt"):
            (tmp_path / "train.txt").write_text("a\tr\tb\n")
            load_dataset(tmp_path)

    def test_split_validation(self):
        with pytest.raises(ValueError):
            SplitDataset(Vocabulary(["a"], ["r"]), [[0, 0, 1]], [], [])


def brute_force_answers(triples, r, e, slot):
    if slot == "object":
        return {o for s, k, o in triples if k == r and s == e}
    return {s for s, k, o in triples if k == r and o == e}


class TestFilterIndex:
    def test_subjects(self):
        idx = build_filter_index([[(0, 0, 1), (2, 0, 1)]])
        assert idx.subjects(0, 1) == {0, 2}

    def test_union_of_splits(self):
        idx = build_filter_index([[(0, 0, 1)], [(0, 0, 2)]])
        assert idx.objects(0, 0) == {1, 2}

    def test_unseen_key(self):
        assert build_filter_index([[(0, 0, 1)]]).objects(5, 5) == frozenset()

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 2), st.integers(0, 6)), max_size=60))
    def test_brute_force(self, triples):
        idx = build_filter_index([triples])
        for r in range(3):
            for e in range(7):
                for slot in ("subject", "object"):
                    assert idx.answers(r, e, slot) == brute_force_answers(triples, r, e, slot)

    def test_random_20(self, rng):
        triples = [tuple(x) for x in rng.integers(0, 5, size=(20, 3))]
        idx = build_filter_index([triples[:10], triples[10:]])
        for r in range(5):
            for e in range(5):
                assert idx.objects(r, e) == brute_force_answers(triples, r, e, "object")
                assert idx.subjects(r, e) == brute_force_answers(triples, r, e, "subject")

    def test_filter_splits_parsing(self):
        assert parse_filter_splits("train,valid") == ("train", "valid")
        with pytest.raises(ValueError):
            parse_filter_splits("train,dev")


class TestBatches:
    def test_full_batch_is_permutation(self, rng):
        train = np.arange(30).reshape(10, 3)
        batch = sample_positive_batch(train, 10, rng)
        assert sorted(map(tuple, batch)) == sorted(map(tuple, train))

    def test_too_large(self, rng):
        with pytest.raises(ValueError):
            sample_positive_batch(np.zeros((3, 3)), 4, rng)

    def test_epoch_partition(self, rng):
        train = np.column_stack([np.arange(1234), np.zeros(1234, int), np.arange(1234)])
        batches = list(iter_batches(train, 500, rng))
        assert [len(b) for b in batches] == [500, 500, 234]
        seen = np.concatenate(batches)[:, 0]
        np.testing.assert_array_equal(np.sort(seen), np.arange(1234))

    def test_first_batch_uniform(self):
        rng = np.random.default_rng(7)
        train = np.column_stack([np.arange(10)] * 3)
        counts = np.zeros(10)
        for _ in range(10_000):
            counts[sample_positive_batch(train, 3, rng)[:, 0]] += 1
        assert stats.chisquare(counts).pvalue > 0.001


class TestCorrupt:
    def test_only_possibility(self, rng):
        assert sorted(corrupt((0, 0, 1), "object", 2, 3, rng)) == [0, 2]

    def test_distinct_not_original(self, rng):
        neg = corrupt((5, 0, 99), "object", 24, 14_505, rng)
        assert len(set(neg)) == 24 and 99 not in neg

    def test_subject_slot(self, rng):
        for _ in range(50):
            neg = corrupt((3, 0, 4), "subject", 4, 5, rng)
            assert sorted(neg) == [0, 1, 2, 4]

    def test_too_many(self, rng):
        with pytest.raises(ValueError):
            corrupt((0, 0, 1), "object", 3, 3, rng)

    def test_marginal_uniform(self):
        rng = np.random.default_rng(11)
        N, draws = 20, 100_000
        neg = corrupt_batch(np.full(draws, 7), 1, N, rng).ravel()
        counts = np.bincount(neg, minlength=N)
        assert counts[7] == 0
        p = 1 / (N - 1)
        sigma = np.sqrt(draws * p * (1 - p))
        others = np.delete(counts, 7)
        assert np.all(np.abs(others - draws * p) <= 3 * sigma + 1)

    def test_batch_rows(self, rng):
        orig = rng.integers(0, 30, size=200)
        neg = corrupt_batch(orig, 5, 30, rng)
        for o, row in zip(orig, neg):
            assert len(set(row)) == 5 and o not in row
