"""Small synthetic knowledge graphs for tests and demos."""

from __future__ import annotations

import numpy as np

from .kgdata import SplitDataset, Vocabulary

MOTHER, FATHER, PARENT = 0, 1, 2


def family_kg(
    num_entities: int = 50,
    num_mothers: int = 5,
    num_fathers: int = 5,
    parent_train_fraction: float = 0.5,
    valid_fraction: float = 0.25,
    seed: int = 0,
) -> SplitDataset:
    """A mother/father/parent graph where ``parent`` is the union of the other two.

    Entities ``0 .. num_mothers-1`` are mothers, the next ``num_fathers``
    are fathers and the rest are children; every child gets one random
    mother and one random father.  All mother and father facts go to
    training.  Parent facts are shuffled and split between train, valid
    and test, so predicting held-out parent facts requires relating
    ``parent`` to the other two relations.
    """
    rng = np.random.default_rng(seed)
    children = np.arange(num_mothers + num_fathers, num_entities)
    if len(children) < 1:
        raise ValueError("not enough entities for any children")
    mother = rng.integers(0, num_mothers, size=len(children))
    father = num_mothers + rng.integers(0, num_fathers, size=len(children))

    mother_facts = np.column_stack([mother, np.full_like(mother, MOTHER), children])
    father_facts = np.column_stack([father, np.full_like(father, FATHER), children])
    parent_facts = np.concatenate([
        np.column_stack([mother, np.full_like(mother, PARENT), children]),
        np.column_stack([father, np.full_like(father, PARENT), children]),
    ])
    parent_facts = parent_facts[rng.permutation(len(parent_facts))]
    n_train = int(round(parent_train_fraction * len(parent_facts)))
    n_valid = int(round(valid_fraction * len(parent_facts)))

    vocab = Vocabulary(
        [f"m{i}" for i in range(num_mothers)]
        + [f"f{i}" for i in range(num_fathers)]
        + [f"c{i}" for i in range(len(children))],
        ["mother", "father", "parent"],
    )
    return SplitDataset(
        vocab,
        train=np.concatenate([mother_facts, father_facts, parent_facts[:n_train]]),
        valid=parent_facts[n_train : n_train + n_valid],
        test=parent_facts[n_train + n_valid :],
    )
