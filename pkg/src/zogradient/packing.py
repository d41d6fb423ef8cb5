"""Sign-vector packings of the hypercube and their gradient discrepancy."""
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PackingSet",
    "PackingError",
    "hamming",
    "min_distance",
    "target_size",
    "build_packing",
    "min_discrepancy_psi",
]

# log(2/sqrt(e)) = log 2 - 1/2
LOG_RATE = math.log(2.0) - 0.5


class PackingError(RuntimeError):
    pass


def hamming(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))


def target_size(d):
    """``ceil((2/sqrt(e))**(d/2))``."""
    return math.ceil(math.exp(LOG_RATE * d / 2))


def min_separation(d):
    return math.ceil(d / 4)


def pairwise_hamming(vectors):
    """Dense ``(m, m)`` matrix of Hamming distances between rows of ``vectors``."""
    v = np.asarray(vectors, dtype=float)
    d = v.shape[1]
    # for +/-1 rows: <a, b> = d - 2 * hamming(a, b)
    return np.rint((d - v @ v.T) / 2).astype(int)


def min_distance(vectors):
    dist = pairwise_hamming(vectors)
    m = dist.shape[0]
    if m < 2:
        raise ValueError("need at least two vectors")
    return int(dist[~np.eye(m, dtype=bool)].min())


@dataclass(frozen=True)
class PackingSet:
    d: int
    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.int8)
        if v.ndim != 2 or v.shape[1] != self.d:
            raise ValueError(f"vectors must have shape (m, {self.d})")
        if not np.all(np.abs(v) == 1):
            raise ValueError("vectors must have +1/-1 entries")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    def __len__(self):
        return self.vectors.shape[0]

    def min_distance(self):
        return min_distance(self.vectors)

    def is_valid(self):
        """Both packing invariants: separation ``ceil(d/4)`` and size target."""
        return len(self) >= target_size(self.d) and (
            len(self) < 2 or self.min_distance() >= min_separation(self.d)
        )


def build_packing(d, seed, size=None):
    """Greedy randomized packing in ``{-1, +1}^d``.

    Uniform sign vectors are drawn and kept when they are at Hamming distance
    at least ``ceil(d/4)`` from every kept vector, until ``size`` (default
    ``ceil((2/sqrt(e))**(d/2))``) vectors are collected.

    Raises
    ------
    PackingError
        If the target is not met within ``1000 * size`` draws.
    """
    if d < 4:
        raise ValueError(f"d must be >= 4, got {d}")
    size = target_size(d) if size is None else int(size)
    sep = min_separation(d)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x9AC, d)))
    kept = np.empty((size, d), dtype=float)
    m = 0
    budget = 1000 * size
    batch = max(64, size)
    drawn = 0
    while m < size and drawn < budget:
        cand = rng.choice([-1.0, 1.0], size=(min(batch, budget - drawn), d))
        drawn += cand.shape[0]
        for c in cand:
            if m == 0 or np.min((d - kept[:m] @ c) / 2) >= sep:
                kept[m] = c
                m += 1
                if m == size:
                    break
    if m < size:
        raise PackingError(f"only {m} of {size} vectors found for d={d} after {drawn} draws")
    return PackingSet(d, kept.astype(np.int8))


def min_discrepancy_psi(packing, delta, x_star=None):
    """Minimum l1 distance between gradients of distinct hyperplane functions.

    With identity coordinate functions the gradients do not depend on
    ``x_star`` and the value is ``(2 delta / d) * min pairwise Hamming``.
    """
    if len(packing) < 2:
        raise ValueError("psi needs at least two packing vectors")
    if x_star is not None and np.asarray(x_star).shape != (packing.d,):
        raise ValueError("x_star dimension does not match the packing")
    return 2.0 * delta / packing.d * packing.min_distance()
