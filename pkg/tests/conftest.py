import numpy as np
import pytest

from ganduality import FiniteDistribution, RandomSource, Witness


def distinct_points(rng, n, dim=1, span=1.0, min_gap=5e-3):
    """Random support with pairwise distances bounded away from the merge tolerance."""
    while True:
        pts = rng.uniform(-span, span, size=(n, dim))
        diffs = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diffs**2).sum(axis=2))
        if np.all(dist[np.triu_indices(n, k=1)] > min_gap):
            return pts


def random_weights(rng, n, floor=0.2):
    raw = rng.uniform(floor, 1.0, n)
    return raw / raw.sum()


def random_distribution(rng, n, dim=1, span=1.0):
    return FiniteDistribution(distinct_points(rng, n, dim, span), random_weights(rng, n))


def random_pair(rng, n, dim=1, span=1.0):
    """Two distributions sharing one support, both strictly positive on it."""
    pts = distinct_points(rng, n, dim, span)
    return (
        FiniteDistribution(pts, random_weights(rng, n)),
        FiniteDistribution(pts, random_weights(rng, n)),
    )


def random_witness(rng, support, scale=1.0):
    return Witness(rng.uniform(-scale, scale, len(support)), support)


@pytest.fixture
def rng():
    return RandomSource(20260808).stream()
