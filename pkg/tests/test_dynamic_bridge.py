import itertools
import math

import numpy as np
import pytest

from bridgekit.core import PathMeasure, adjacency_kernel, boltzmann_kernel, dirac, enumerate_paths
from bridgekit.dynamic_bridge import (
    BridgeProblem,
    composed_path_masses,
    maximal_mass_paths,
    path_mass_table,
    relative_entropy_on_paths,
    solve_bridge,
    static_kkt_residual,
    static_reduction,
)
from bridgekit.errors import DimensionMismatch, InfeasibleSupport, NoFeasiblePath

from support import random_distribution, random_primitive_graph

P = lambda s: tuple(int(c) - 1 for c in s.split("-"))  # noqa: E731


def bridge(graph_or_kernel, N, nu0, nuN, mu0=None):
    K = graph_or_kernel
    n = K.shape[0]
    prior = PathMeasure.homogeneous(np.ones(n) if mu0 is None else mu0, K, N)
    problem = BridgeProblem(prior, nu0, nuN)
    return problem, solve_bridge(problem)


def check_invariants(problem, sol):
    flow = sol.marginal_flow
    assert np.allclose(flow.sum(axis=1), 1.0, atol=1e-10)
    assert np.max(np.abs(flow[0] - problem.nu0.weights)) < 1e-9
    assert np.max(np.abs(flow[-1] - problem.nuN.weights)) < 1e-9
    for t, Pi in enumerate(sol.transitions):
        live = flow[t] > 0
        assert np.allclose(Pi[live].sum(axis=1), 1.0, atol=1e-10)
        assert np.max(np.abs(flow[t] @ Pi - flow[t + 1])) < 1e-10
    phi, hat = np.exp(sol.potentials.log_phi), np.exp(sol.potentials.log_phi_hat)
    assert np.max(np.abs(phi * hat - flow)) < 1e-10


def random_instance(seed, n_max=6):
    r = np.random.default_rng(seed)
    n = int(r.integers(3, n_max + 1))
    g = random_primitive_graph(r, n, density=0.6)
    K = boltzmann_kernel(g, float(r.uniform(0.5, 2)))
    # shortest horizon with M^N positive, so full-support marginals are feasible
    N = 1
    while not np.all(np.linalg.matrix_power(K.entries, N) > 0):
        N += 1
    return g, K, N, random_distribution(r, n, 0.1), random_distribution(r, n, 0.1), r


class TestGolden:
    def test_adjacency_prior_three_steps(self, nine):
        problem, sol = bridge(adjacency_kernel(nine), 3, dirac(9, 0), dirac(9, 8))
        expect = np.zeros((4, 9))
        expect[0, 0] = expect[3, 8] = 1
        expect[1, 1:4] = 1 / 3
        expect[2, 6], expect[2, 7] = 1 / 3, 2 / 3
        assert np.max(np.abs(sol.marginal_flow - expect)) < 1e-12
        check_invariants(problem, sol)

    def test_adjacency_prior_four_steps(self, nine):
        problem, sol = bridge(adjacency_kernel(nine), 4, dirac(9, 0), dirac(9, 8))
        assert sol.marginal_flow[1, 1:4] == pytest.approx([4 / 7, 2 / 7, 1 / 7], abs=1e-12)
        table = path_mass_table(problem, sol)
        assert len(table) == 7 and all(abs(m - 1 / 7) < 1e-12 for _, m in table)

    def test_boltzmann_four_steps(self, nine):
        problem, sol = bridge(boltzmann_kernel(nine, 1.0), 4, dirac(9, 0), dirac(9, 8))
        assert np.max(np.abs(sol.marginal_flow[1, 1:4] - [0.4705, 0.3059, 0.2236])) < 5e-5
        masses = [m for _, m in path_mass_table(problem, sol)]
        assert masses == pytest.approx([0.2236] * 3 + [0.0823] * 4, abs=5e-5)
        assert math.fsum(masses) == pytest.approx(1.0, abs=1e-9)
        check_invariants(problem, sol)

    def test_long_edge_masses(self, nine_l79):
        problem, sol = bridge(boltzmann_kernel(nine_l79, 1.0), 3, dirac(9, 0), dirac(9, 8))
        got = dict(path_mass_table(problem, sol))
        assert [got[P(s)] for s in ("1-2-7-9", "1-3-8-9", "1-4-8-9")] == pytest.approx(
            [0.1554, 0.4223, 0.4223], abs=5e-5
        )
        assert maximal_mass_paths(sol, 0, 8) == {P("1-3-8-9"), P("1-4-8-9")}

    def test_equal_lengths_all_maximal(self, nine):
        _, sol = bridge(boltzmann_kernel(nine, 0.3), 3, dirac(9, 0), dirac(9, 8))
        assert maximal_mass_paths(sol, 0, 8) == {P("1-2-7-9"), P("1-3-8-9"), P("1-4-8-9")}

    def test_dead_rows_uniform_and_flagged(self, nine):
        _, sol = bridge(adjacency_kernel(nine), 3, dirac(9, 0), dirac(9, 8))
        assert sol.flagged_rows
        S = np.isfinite(nine.lengths)
        for t, i in sol.flagged_rows:
            row = sol.transitions[t][i]
            assert sol.marginal_flow[t, i] == 0
            assert np.allclose(row[S[i]], 1 / S[i].sum())


class TestErrors:
    def test_unreachable(self, nine):
        prior = PathMeasure.homogeneous(np.ones(9), adjacency_kernel(nine), 2)
        with pytest.raises(InfeasibleSupport, match=r"\(1, 9\)"):
            BridgeProblem(prior, dirac(9, 0), dirac(9, 8))

    def test_zero_initial_weight(self, nine):
        mu0 = np.ones(9)
        mu0[0] = 0
        prior = PathMeasure.homogeneous(mu0, adjacency_kernel(nine), 3)
        with pytest.raises(InfeasibleSupport):
            BridgeProblem(prior, dirac(9, 0), dirac(9, 8))

    def test_marginal_size(self, nine):
        prior = PathMeasure.homogeneous(np.ones(9), adjacency_kernel(nine), 3)
        with pytest.raises(DimensionMismatch):
            BridgeProblem(prior, dirac(3, 0), dirac(9, 8))

    def test_no_maximal_path(self, nine):
        prior = PathMeasure.homogeneous(np.ones(9), adjacency_kernel(nine), 2)
        with pytest.raises(NoFeasiblePath):
            maximal_mass_paths(prior, 0, 8)


def test_prior_with_matching_marginals_is_kept(rng):
    n, N = 4, 3
    K = rng.uniform(0.1, 1, (n, n))
    R = K / K.sum(axis=1, keepdims=True)
    nu0 = random_distribution(rng, n, 0.1)
    nuN = nu0 @ np.linalg.matrix_power(R, N)
    problem, sol = bridge(R, N, nu0, nuN, mu0=nu0)
    for Pi in sol.transitions:
        assert np.allclose(Pi, R, atol=1e-10)
    assert abs(relative_entropy_on_paths(sol, problem.prior)) < 1e-10
    coupling, _ = static_reduction(problem)
    assert np.allclose(coupling.joint, nu0[:, None] * np.linalg.matrix_power(R, N), atol=1e-10)


@pytest.mark.parametrize("seed", range(6))
def test_random_bridges(seed):
    g, K, N, nu0, nuN, r = random_instance(seed)
    problem, sol = bridge(K, N, nu0, nuN)
    check_invariants(problem, sol)

    # pinned-measure identity: ratios of same-endpoint paths agree with the prior
    measure = sol.measure
    pairs = {}
    for path, _ in enumerate_paths(problem.prior, budget=200_000):
        pairs.setdefault((path[0], path[-1]), []).append(path)
    for paths in list(pairs.values())[:15]:
        for a, b in itertools.islice(itertools.combinations(paths, 2), 20):
            prior_ratio = problem.prior.log_mass(a) - problem.prior.log_mass(b)
            sol_ratio = measure.log_mass(a) - measure.log_mass(b)
            assert math.exp(sol_ratio - prior_ratio) == pytest.approx(1.0, abs=1e-9)

    coupling, pinned = static_reduction(problem)
    assert static_kkt_residual(coupling, problem.prior.log_initial[:, None] + problem.log_G) < 1e-8
    composed = dict(composed_path_masses(coupling, pinned, budget=200_000))
    direct = dict(path_mass_table(problem, sol, budget=200_000))
    assert composed.keys() == direct.keys()
    assert max(abs(composed[p] - direct[p]) for p in direct) < 1e-9


def test_equal_length_equal_mass(rng):
    g = random_primitive_graph(rng, 5, density=0.6, lengths=(1, 2), integer=True)
    problem, sol = bridge(boltzmann_kernel(g, 0.7), 4, random_distribution(rng, 5, 0.1), random_distribution(rng, 5, 0.1))
    table = path_mass_table(problem, sol)
    groups = {}
    for path, m in table:
        groups.setdefault((path[0], path[-1], g.path_length(path)), []).append(m)
    compared = 0
    for ms in groups.values():
        if len(ms) > 1:
            assert max(ms) - min(ms) < 1e-9 * max(ms) + 1e-15
            compared += 1
    assert compared > 0


def test_argmax_sets_match_prior(rng):
    g, K, N, nu0, nuN, _ = random_instance(11)
    problem, sol = bridge(K, N, nu0, nuN)
    for a, b in [(0, 0), (0, g.n - 1), (1, 2)]:
        assert maximal_mass_paths(sol, a, b) == maximal_mass_paths(problem.prior, a, b)


def test_solution_beats_perturbations(nine, rng):
    problem, sol = bridge(boltzmann_kernel(nine, 1.0), 4, dirac(9, 0), dirac(9, 8))
    best = relative_entropy_on_paths(sol, problem.prior)
    paths = [p for p, _ in path_mass_table(problem, sol)]
    log_prior = np.array([problem.prior.log_mass(p) for p in paths])
    for _ in range(100):
        w = random_distribution(rng, len(paths), 0.01)
        assert float(np.sum(w * (np.log(w) - log_prior))) > best - 1e-12


def test_relative_entropy_conventions(nine):
    A = PathMeasure.homogeneous(np.ones(9), adjacency_kernel(nine), 2)
    assert relative_entropy_on_paths(A, A) == 0.0
    K = adjacency_kernel(nine).entries.copy()
    K[0, 1] = 0.0
    Q = PathMeasure.from_weights(np.ones(9), [K, K])
    assert relative_entropy_on_paths(A, Q) == math.inf
    with pytest.raises(DimensionMismatch):
        relative_entropy_on_paths(A, PathMeasure.homogeneous(np.ones(9), adjacency_kernel(nine), 3))


def test_delta_marginals_give_single_atom(nine):
    problem, _ = bridge(adjacency_kernel(nine), 4, dirac(9, 0), dirac(9, 8))
    coupling, pinned = static_reduction(problem)
    assert coupling.joint[0, 8] == 1.0 and coupling.joint.sum() == 1.0
    assert sum(pinned.probability(p) for p, _ in enumerate_paths(problem.prior, start=0, end=8)) == pytest.approx(1.0)


def test_nine_node_spread_marginals(nine, rng):
    # nu0 on {1, 2} and nuN on every node both reach in exactly N steps (8 and 9)
    N = 3
    R = np.linalg.matrix_power(adjacency_kernel(nine).entries, N) > 0
    src = [0, 1]
    dst = np.flatnonzero(R[src].all(axis=0))
    assert dst.tolist() == [7, 8]
    nu0, nuN = np.zeros(9), np.zeros(9)
    nu0[src] = random_distribution(rng, 2, 0.1)
    nuN[dst] = random_distribution(rng, dst.size, 0.1)
    problem, sol = bridge(boltzmann_kernel(nine, 1.0), N, nu0, nuN)
    check_invariants(problem, sol)
    coupling, pinned = static_reduction(problem)
    composed = dict(composed_path_masses(coupling, pinned))
    direct = dict(path_mass_table(problem, sol))
    assert max(abs(composed[p] - direct[p]) for p in direct) < 1e-9
