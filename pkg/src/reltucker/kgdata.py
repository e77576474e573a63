"""Triple files, vocabularies, batching and negative sampling.

Triples are held as ``(n, 3)`` int64 arrays with columns
(subject, relation, object); :class:`Triple` is the row type when a single
fact is handled on its own.
"""

from __future__ import annotations

import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

SPLITS = ("train", "valid", "test")


class Triple(NamedTuple):
    subject: int
    relation: int
    object: int


class TripleFormatError(ValueError):
    pass


@dataclass
class Vocabulary:
    entities: list[str]
    relations: list[str]
    entity_index: dict[str, int] = field(init=False, repr=False)
    relation_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.entity_index = {name: i for i, name in enumerate(self.entities)}
        self.relation_index = {name: i for i, name in enumerate(self.relations)}
        if len(self.entity_index) != len(self.entities):
            raise ValueError("duplicate entity names")
        if len(self.relation_index) != len(self.relations):
            raise ValueError("duplicate relation names")

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    def save(self, directory) -> None:
        os.makedirs(directory, exist_ok=True)
        for fname, names in (("entities.txt", self.entities), ("relations.txt", self.relations)):
            with open(os.path.join(directory, fname), "w", encoding="utf-8") as f:
                f.writelines(name + "\n" for name in names)

    @classmethod
    def load(cls, directory) -> "Vocabulary":
        def read(fname):
            with open(os.path.join(directory, fname), encoding="utf-8") as f:
                return [line.rstrip("\n") for line in f]

        return cls(read("entities.txt"), read("relations.txt"))


def _read_fields(path):
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 3:
                raise TripleFormatError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}"
                )
            yield lineno, fields


def build_vocab(paths) -> Vocabulary:
    """Collect entity and relation names in order of first appearance."""
    paths = list(paths)
    if not paths:
        raise ValueError("build_vocab needs at least one triple file")
    entities: dict[str, None] = {}
    relations: dict[str, None] = {}
    for path in paths:
        for _, (s, r, o) in _read_fields(path):
            entities.setdefault(s)
            relations.setdefault(r)
            entities.setdefault(o)
    return Vocabulary(list(entities), list(relations))


def load_triples(path, vocab: Vocabulary) -> np.ndarray:
    rows = []
    for lineno, (s, r, o) in _read_fields(path):
        try:
            rows.append((vocab.entity_index[s], vocab.relation_index[r], vocab.entity_index[o]))
        except KeyError as exc:
            raise TripleFormatError(f"{path}:{lineno}: unknown token {exc.args[0]!r}") from None
    return np.array(rows, dtype=np.int64).reshape(-1, 3)


def write_triples(path, triples, vocab: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s, r, o in np.asarray(triples).reshape(-1, 3):
            f.write(f"{vocab.entities[s]}\t{vocab.relations[r]}\t{vocab.entities[o]}\n")


@dataclass
class SplitDataset:
    vocab: Vocabulary
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in SPLITS:
            t = np.asarray(getattr(self, name), dtype=np.int64).reshape(-1, 3)
            if t.size and (
                t.min() < 0
                or t[:, [0, 2]].max() >= self.vocab.num_entities
                or t[:, 1].max() >= self.vocab.num_relations
            ):
                raise ValueError(f"{name} split has indices outside the vocabulary")
            setattr(self, name, t)

    def split(self, name: str) -> np.ndarray:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}; expected one of {SPLITS}")
        return getattr(self, name)

    def save(self, directory) -> None:
        os.makedirs(directory, exist_ok=True)
        for name in SPLITS:
            write_triples(os.path.join(directory, f"{name}.txt"), self.split(name), self.vocab)


def load_dataset(directory) -> SplitDataset:
    """Load ``train.txt``, ``valid.txt`` and ``test.txt`` under one vocabulary."""
    paths = [os.path.join(directory, f"{name}.txt") for name in SPLITS]
    for p in paths:
        if not os.path.isfile(p):
            raise FileNotFoundError(f"missing triple file: {p}")
    vocab = build_vocab(paths)
    return SplitDataset(vocab, *(load_triples(p, vocab) for p in paths))


class FilterIndex:
    """Known answers per query, for filtered ranking.

    ``objects(r, s)`` is the set of ``o`` with ``(s, r, o)`` known and
    ``subjects(r, o)`` the set of ``s`` with ``(s, r, o)`` known.
    """

    def __init__(self, triples):
        self._objects = defaultdict(set)
        self._subjects = defaultdict(set)
        for s, r, o in np.asarray(triples, dtype=np.int64).reshape(-1, 3).tolist():
            self._objects[r, s].add(o)
            self._subjects[r, o].add(s)

    def objects(self, relation: int, subject: int) -> frozenset:
        return frozenset(self._objects.get((relation, subject), ()))

    def subjects(self, relation: int, obj: int) -> frozenset:
        return frozenset(self._subjects.get((relation, obj), ()))

    def answers(self, relation: int, entity: int, slot: str) -> frozenset:
        """Known entities for the open ``slot`` given the other one."""
        if slot == "object":
            return self.objects(relation, entity)
        if slot == "subject":
            return self.subjects(relation, entity)
        raise ValueError(f"slot must be 'subject' or 'object', got {slot!r}")


def build_filter_index(splits) -> FilterIndex:
    arrays = [np.asarray(s, dtype=np.int64).reshape(-1, 3) for s in splits]
    return FilterIndex(np.concatenate(arrays) if arrays else np.empty((0, 3), np.int64))


def parse_filter_splits(spec: str) -> tuple[str, ...]:
    names = tuple(s.strip() for s in spec.split(",") if s.strip())
    bad = [n for n in names if n not in SPLITS]
    if bad or not names:
        raise ValueError(f"filter splits must be a comma list drawn from {SPLITS}, got {spec!r}")
    return names


def iter_batches(train, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """One epoch: a shuffled partition of ``train`` into batches."""
    train = np.asarray(train)
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    order = rng.permutation(len(train))
    for start in range(0, len(train), batch_size):
        yield train[order[start : start + batch_size]]


def sample_positive_batch(train, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    train = np.asarray(train)
    if batch_size > len(train):
        raise ValueError(f"batch_size {batch_size} exceeds training set size {len(train)}")
    return train[rng.permutation(len(train))[:batch_size]]


def corrupt(triple, slot: str, num_negatives: int, N: int, rng: np.random.Generator) -> np.ndarray:
    """Distinct random replacements for one slot, never the original entity.

    Corrupted triples are not checked against known facts.
    """
    s, _, o = triple
    original = {"subject": s, "object": o}.get(slot)
    if original is None:
        raise ValueError(f"slot must be 'subject' or 'object', got {slot!r}")
    return corrupt_batch(np.array([original]), num_negatives, N, rng)[0]


def corrupt_batch(originals, num_negatives: int, N: int, rng: np.random.Generator) -> np.ndarray:
    """Row ``b`` holds ``num_negatives`` distinct entities other than ``originals[b]``."""
    originals = np.asarray(originals, dtype=np.int64)
    if num_negatives > N - 1:
        raise ValueError(f"cannot draw {num_negatives} distinct negatives from {N - 1} candidates")
    out = np.empty((len(originals), num_negatives), dtype=np.int64)
    for b, orig in enumerate(originals):
        # sample from N-1 slots, then skip over the original
        draw = rng.choice(N - 1, size=num_negatives, replace=False)
        out[b] = draw + (draw >= orig)
    return out
