import itertools
import math

import numpy as np
import pytest

from bridgekit.core import PathMeasure, adjacency_kernel, boltzmann_kernel
from bridgekit.errors import BudgetExceeded, DimensionMismatch, IrrationalMarginals
from bridgekit.oracle import (
    OracleBudget,
    assignment_ot_oracle,
    bisect_symmetric_2x2,
    coupling_kl_oracle,
    hungarian,
    pinned_bridge_oracle,
    quantile_coupling_oracle,
    vertex_enumeration_ot,
)
from bridgekit.spectral import ruelle_bowen

P = lambda s: tuple(int(c) - 1 for c in s.split("-"))  # noqa: E731


class TestPinned:
    def test_boltzmann_unit_lengths(self, nine):
        prior = PathMeasure.homogeneous(np.ones(9), boltzmann_kernel(nine, 1.0), 4)
        table = pinned_bridge_oracle(prior, 0, 8)
        z = 3 + 4 * math.exp(-1)
        assert len(table) == 7
        masses = [m for _, m in table]
        assert masses[:3] == pytest.approx([1 / z] * 3, rel=1e-14)
        assert masses[3:] == pytest.approx([math.exp(-1) / z] * 4, rel=1e-14)
        # six-digit closed forms; both round to the four-digit 0.2236 / 0.0823
        assert round(masses[0], 6) == 0.223638 and round(masses[-1], 6) == 0.082272

    def test_ruelle_bowen_uniform(self, nine):
        # the fixture is reducible, so use the adjacency prior; its pinned bridge is the same
        prior = PathMeasure.homogeneous(np.ones(9), adjacency_kernel(nine), 4)
        assert all(abs(m - 1 / 7) < 1e-15 for _, m in pinned_bridge_oracle(prior, 0, 8))

    def test_ruelle_bowen_on_primitive_graph(self, rng):
        from support import random_primitive_graph

        g = random_primitive_graph(rng, 5)
        rb = ruelle_bowen(adjacency_kernel(g), 4)
        adj = PathMeasure.homogeneous(np.ones(5), adjacency_kernel(g), 4)
        a, b = pinned_bridge_oracle(rb, 0, 3), pinned_bridge_oracle(adj, 0, 3)
        assert [p for p, _ in a] == [p for p, _ in b]
        assert np.allclose([m for _, m in a], [m for _, m in b], atol=1e-12)

    def test_long_edge(self, nine_l79):
        prior = PathMeasure.homogeneous(np.ones(9), boltzmann_kernel(nine_l79, 1.0), 3)
        got = dict(pinned_bridge_oracle(prior, 0, 8))
        z = math.exp(-4) + 2 * math.exp(-3)
        assert got[P("1-2-7-9")] == pytest.approx(math.exp(-4) / z, rel=1e-14)
        assert got[P("1-3-8-9")] == pytest.approx(math.exp(-3) / z, rel=1e-14)
        assert [round(got[p], 6) for p in map(P, ["1-2-7-9", "1-3-8-9", "1-4-8-9"])] == [0.155362, 0.422319, 0.422319]

    def test_sorted_by_mass_then_path(self, nine_l79):
        prior = PathMeasure.homogeneous(np.ones(9), boltzmann_kernel(nine_l79, 1.0), 3)
        assert [p for p, _ in pinned_bridge_oracle(prior, 0, 8)] == [P("1-3-8-9"), P("1-4-8-9"), P("1-2-7-9")]

    def test_no_path_and_budget(self, nine):
        prior = PathMeasure.homogeneous(np.ones(9), adjacency_kernel(nine), 2)
        assert pinned_bridge_oracle(prior, 0, 8) == []
        with pytest.raises(BudgetExceeded):
            pinned_bridge_oracle(prior, 0, 8, OracleBudget(max_states=4))


class TestExactTransport:
    def test_hungarian_against_permutations(self, rng):
        C = rng.uniform(0, 1, (6, 6))
        best = min(sum(C[i, s[i]] for i in range(6)) for s in itertools.permutations(range(6)))
        assignment, total = hungarian(C)
        assert sorted(assignment) == list(range(6))
        assert total == pytest.approx(best, abs=1e-12)

    def test_hungarian_needs_square(self):
        with pytest.raises(DimensionMismatch):
            hungarian(np.zeros((2, 3)))

    def test_small_examples(self):
        C = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert assignment_ot_oracle(C, [0.5, 0.5], [0.5, 0.5]) == 0.0
        assert assignment_ot_oracle(C, [1.0, 0.0], [0.0, 1.0]) == 1.0

    @pytest.mark.parametrize("seed", range(6))
    def test_two_exact_methods_agree(self, seed):
        r = np.random.default_rng(seed)
        C = r.uniform(0, 1, (4, 4))
        p = r.multinomial(8, np.full(4, 0.25)) / 8
        q = r.multinomial(8, np.full(4, 0.25)) / 8
        assert assignment_ot_oracle(C, p, q) == pytest.approx(vertex_enumeration_ot(C, p, q), abs=1e-12)

    def test_lower_bounds_feasible_couplings(self, rng):
        C = rng.uniform(0, 1, (3, 3))
        p, q = np.array([0.25, 0.25, 0.5]), np.array([0.125, 0.375, 0.5])
        v = assignment_ot_oracle(C, p, q)
        for _ in range(200):
            # random feasible coupling by iterative proportional fitting of a random matrix
            J = rng.random((3, 3))
            for _ in range(200):
                J *= (p / J.sum(axis=1))[:, None]
                J *= (q / J.sum(axis=0))[None, :]
            assert v <= float(np.sum(C * J)) + 1e-9

    def test_rejects_irrational_and_large(self):
        C = np.zeros((2, 2))
        with pytest.raises(IrrationalMarginals):
            assignment_ot_oracle(C, [1 / math.pi, 1 - 1 / math.pi], [0.5, 0.5])
        with pytest.raises(BudgetExceeded):
            assignment_ot_oracle(C, [1 / 7, 6 / 7], [1 / 11, 10 / 11], OracleBudget(max_assignment_units=64))
        with pytest.raises(BudgetExceeded):
            vertex_enumeration_ot(np.zeros((5, 5)), np.full(5, 0.2), np.full(5, 0.2))


class TestKLSearch:
    def test_prior_already_feasible(self):
        R = np.array([[1 / 6, 1 / 3], [1 / 3, 1 / 6]])
        J, v = coupling_kl_oracle(R, [0.5, 0.5], [0.5, 0.5])
        assert np.allclose(J, R, atol=1e-12) and abs(v) < 1e-12

    def test_uniform_prior_gives_product(self):
        p, q = np.array([0.3, 0.7]), np.array([0.6, 0.4])
        J, v = coupling_kl_oracle(np.full((2, 2), 0.25), p, q)
        prod = np.outer(p, q)
        assert np.allclose(J, prod, atol=1e-10)
        assert v == pytest.approx(float(np.sum(prod * np.log(prod / 0.25))), abs=1e-12)

    def test_boltzmann_prior_matches_bisection(self):
        B = np.exp(-np.array([[0.0, 1.0], [1.0, 0.0]]))
        J, v = coupling_kl_oracle(B / B.sum(), [0.5, 0.5], [0.5, 0.5])
        a = 1 / (2 * (1 + math.exp(-1)))
        # the objective is flat at the minimum: 1e-16 in value leaves ~1e-8 in position
        assert J[0, 0] == pytest.approx(a, abs=1e-8)
        best = np.array([a, 0.5 - a, 0.5 - a, a])
        assert v == pytest.approx(float(np.sum(best * np.log(best / (B / B.sum()).ravel()))), abs=1e-14)
        assert bisect_symmetric_2x2(1.0, 1.0) == pytest.approx(1 / (2 * (1 + math.exp(-1))), abs=1e-15)

    def test_three_by_three_product(self):
        p, q = np.array([0.2, 0.3, 0.5]), np.array([0.5, 0.25, 0.25])
        J, _ = coupling_kl_oracle(np.full((3, 3), 1 / 9), p, q)
        assert np.allclose(J, np.outer(p, q), atol=1e-8)

    def test_size_limit(self):
        with pytest.raises(BudgetExceeded):
            coupling_kl_oracle(np.full((4, 4), 1 / 16), np.full(4, 0.25), np.full(4, 0.25))


class TestQuantile:
    x = np.linspace(-3, 3, 61)

    def test_identity(self):
        w = np.exp(-self.x**2)
        cells, cost = quantile_coupling_oracle(self.x, w, self.x, w)
        assert cost == pytest.approx(0.0, abs=1e-15)
        assert all(i == j for i, j, _ in cells)

    def test_translation(self):
        w = np.exp(-self.x**2)
        d = 0.5
        cells, cost = quantile_coupling_oracle(self.x, w, self.x + d, w)
        assert cost == pytest.approx(d**2 / 2, rel=1e-12)

    def test_equal_variance_gaussians(self):
        x = np.linspace(-4, 4, 801)
        w0, w1 = np.exp(-((x + 1) ** 2) / 0.08), np.exp(-((x - 1) ** 2) / 0.08)
        _, cost = quantile_coupling_oracle(x, w0, x, w1)
        assert cost == pytest.approx(2.0, abs=1e-6)

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError):
            quantile_coupling_oracle([1.0, 0.0], [1, 1], [0.0, 1.0], [1, 1])
