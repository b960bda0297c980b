"""Random instance generators shared by the test modules."""

import numpy as np

from bridgekit.core import WeightedDigraph

# criterion number -> one-line verdict, printed in the terminal summary
ACCEPTANCE_LINES = {}


def random_primitive_graph(rng, n, density=0.4, lengths=(1.0, 2.0), integer=False):
    """Random digraph made primitive by a Hamiltonian cycle plus a loop at node 0."""
    S = rng.random((n, n)) < density
    for i in range(n):
        S[i, (i + 1) % n] = True
    S[0, 0] = True
    if integer:
        L = rng.integers(int(lengths[0]), int(lengths[1]) + 1, size=(n, n)).astype(float)
    else:
        L = rng.uniform(lengths[0], lengths[1], size=(n, n))
    return WeightedDigraph.from_edges(n, [(i, j, L[i, j]) for i, j in zip(*np.nonzero(S))])


def random_positive_kernel(rng, n, lo=0.1, hi=1.0, m=None):
    return rng.uniform(lo, hi, size=(n, m or n))


def random_distribution(rng, n, floor=0.0):
    w = rng.random(n) + floor
    return w / w.sum()


def random_walk(rng, graph, t, start=None):
    S = np.isfinite(graph.lengths)
    path = [int(rng.integers(graph.n)) if start is None else start]
    for _ in range(t):
        path.append(int(rng.choice(np.flatnonzero(S[path[-1]]))))
    return tuple(path)
