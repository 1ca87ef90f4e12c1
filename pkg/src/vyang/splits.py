"""Dataset partitioning: k-fold, held-out-show, and cross-corpus splits."""

from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from vyang.data import Sample

FRIENDS_SHOW = "FRIENDS"


def _rng(seed: int, label: str) -> np.random.Generator:
    from vyang.params import _rng_for

    return _rng_for(seed, label)


def speaker_dependent_splits(samples: Sequence[Sample], k: int = 5, seed: int = 0,
                             stratify: bool = False) -> List[Tuple[List[Sample], List[Sample]]]:
    """Seeded shuffle into k near-equal folds; fold i serves as the test set."""
    n = len(samples)
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if k > n:
        raise ValueError(f"cannot split {n} samples into {k} folds")
    rng = _rng(seed, "kfold")
    if stratify:
        # deal each class round-robin so folds stay label-balanced while
        # overall fold sizes still differ by at most one
        pos = [i for i, s in enumerate(samples) if s.label == 1]
        neg = [i for i, s in enumerate(samples) if s.label == 0]
        order = [pos[i] for i in rng.permutation(len(pos))]
        order += [neg[i] for i in rng.permutation(len(neg))]
        folds: List[List[int]] = [[] for _ in range(k)]
        for slot, idx in enumerate(order):
            folds[slot % k].append(idx)
    else:
        order = rng.permutation(n)
        base, extra = divmod(n, k)
        folds = []
        start = 0
        for i in range(k):
            size = base + (1 if i < extra else 0)
            folds.append(list(order[start : start + size]))
            start += size
    pairs = []
    for i in range(k):
        test_ids = set(folds[i])
        test = [samples[j] for j in sorted(test_ids)]
        train = [s for j, s in enumerate(samples) if j not in test_ids]
        pairs.append((train, test))
    return pairs


def speaker_independent_split(samples: Sequence[Sample],
                              show: str = FRIENDS_SHOW) -> Tuple[List[Sample], List[Sample]]:
    """Hold out every sample of one show as the test set."""
    test = [s for s in samples if s.show == show]
    train = [s for s in samples if s.show != show]
    if not test:
        raise ValueError(f"no samples from show {show!r} to hold out")
    return train, test


def cross_dataset_split(train_ds: Sequence[Sample], test_ds: Sequence[Sample],
                        seed: int = 0) -> Tuple[List[Sample], List[Sample], List[Sample]]:
    """80/10 train/val from one corpus, 10% test from the other.

    Both 10% slices use floor rounding; the train share takes whatever the
    floors leave behind beyond its own floored 80%, and one floored 10%
    slice of the source corpus stays unused, preserving the stated
    proportions.
    """
    if not train_ds or not test_ds:
        raise ValueError("cross-dataset split needs two non-empty datasets")
    n = len(train_ds)
    n_val = n // 10
    n_unused = n // 10
    perm = _rng(seed, "cross-train").permutation(n)
    val = [train_ds[i] for i in perm[:n_val]]
    train = [train_ds[i] for i in perm[n_val + n_unused :]]
    m = len(test_ds)
    n_test = m // 10
    perm_t = _rng(seed, "cross-test").permutation(m)
    test = [test_ds[i] for i in perm_t[:n_test]]
    return train, val, test
