"""The brute-force references themselves: these must be right by inspection,
so the tests here stick to cases small enough to verify by hand."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agmn.errors import BudgetError
from agmn.graph import TreeGraph, build_schedule, validate
from agmn.grids import Grid2D, TensorStack, normalize_sum
from agmn.oracle import (
    EnumerationBudget,
    exact_marginals_bruteforce,
    naive_message,
    random_potentials,
)
from agmn.potentials import PotentialSet

seeds = st.integers(min_value=0, max_value=2**32 - 1)


class TestNaiveMessage:
    def test_identity_impulse(self, rng):
        h = Grid2D(rng.random((4, 4)))
        k = np.zeros((3, 3))
        k[1, 1] = 1.0
        np.testing.assert_array_equal(naive_message(h, Grid2D(k)).data, h.data)

    def test_hand_worked_1d(self):
        # h = [a, b], kernel [p, q, r] centered at q:
        # out[0] = q*a + p*b, out[1] = r*a + q*b.
        h = Grid2D(np.array([[2.0, 3.0]]))
        k = Grid2D(np.array([[10.0, 100.0, 1000.0]]))
        out = naive_message(h, k).data
        np.testing.assert_array_equal(out, [[100.0 * 2 + 10.0 * 3, 1000.0 * 2 + 100.0 * 3]])

    def test_hand_worked_2d(self):
        h = Grid2D(np.array([[1.0, 0.0], [0.0, 2.0]]))
        k = Grid2D(np.array([[0.0, 5.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))
        # Kernel offset (dy, dx) = (-1, 0): shift up by one, scaled by 5.
        out = naive_message(h, k).data
        np.testing.assert_array_equal(out, [[0.0, 10.0], [0.0, 0.0]])

    def test_zero_input(self):
        out = naive_message(Grid2D(np.zeros((3, 3))), Grid2D(np.ones((3, 3))))
        np.testing.assert_array_equal(out.data, np.zeros((3, 3)))

    def test_output_is_unnormalized(self):
        h = Grid2D(np.ones((2, 2)))
        k = Grid2D(np.full((1, 1), 3.0))
        assert naive_message(h, k).data.sum() == 12.0


class TestRandomPotentials:
    def test_deterministic(self):
        a = random_potentials(3, 4, 4, 3)
        b = random_potentials(3, 4, 4, 3)
        assert a.graph.edges == b.graph.edges
        np.testing.assert_array_equal(a.unary.data, b.unary.data)
        np.testing.assert_array_equal(a.kernels.data, b.kernels.data)

    def test_seed_changes_instance(self):
        a = random_potentials(0, 4, 4, 3)
        b = random_potentials(1, 4, 4, 3)
        assert not np.array_equal(a.unary.data, b.unary.data)

    @given(seed=seeds, n=st.integers(min_value=2, max_value=8))
    @settings(max_examples=50)
    def test_valid_tree_and_shapes(self, seed, n):
        ps = random_potentials(seed, n, 3, 3)
        validate(ps.graph)
        assert ps.unary.data.shape == (n, 3, 3)
        assert ps.kernels.data.shape == (2 * (n - 1), 3, 3)
        assert (ps.unary.data >= 0).all() and (ps.kernels.data >= 0).all()

    def test_reverse_kernels_are_reflections(self):
        ps = random_potentials(12, 6, 4, 5)
        for a, b in ps.graph.edges:
            fwd = ps.kernels.data[ps.schedule.channel_of[(a, b)]]
            rev = ps.kernels.data[ps.schedule.channel_of[(b, a)]]
            np.testing.assert_array_equal(rev, fwd[::-1, ::-1])

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            random_potentials(0, 3, 4, 4)


class TestExactMarginals:
    def test_two_node_impulse_chain(self):
        # Node 0 pinned to state (0,0); the pair kernel forces node 1 one
        # column to the right. The exact marginals are one-hot.
        g = TreeGraph(num_nodes=2, edges=((0, 1),))
        sched = build_schedule(g)
        unary = np.zeros((2, 1, 3))
        unary[0, 0, 0] = 1.0
        unary[1] = 1.0
        kernels = np.zeros((2, 1, 3))
        kernels[sched.channel_of[(0, 1)], 0, 2] = 1.0  # dx = +1
        kernels[sched.channel_of[(1, 0)], 0, 0] = 1.0  # reflection
        ps = PotentialSet(
            unary=TensorStack(unary), kernels=TensorStack(kernels), graph=g, schedule=sched
        )
        out = exact_marginals_bruteforce(ps)
        np.testing.assert_array_equal(out.data[0], [[1.0, 0.0, 0.0]])
        np.testing.assert_array_equal(out.data[1], [[0.0, 1.0, 0.0]])

    def test_independent_when_kernel_uniform(self, rng):
        # A constant pair potential with full extent factorizes the joint, so
        # each marginal is just its normalized unary.
        g = TreeGraph(num_nodes=2, edges=((0, 1),))
        sched = build_schedule(g)
        u = rng.random((2, 2, 2))
        kernels = np.ones((2, 3, 3))
        ps = PotentialSet(
            unary=TensorStack(u), kernels=TensorStack(kernels), graph=g, schedule=sched
        )
        out = exact_marginals_bruteforce(ps)
        for i in range(2):
            np.testing.assert_allclose(
                out.data[i], normalize_sum(Grid2D(u[i])).data, rtol=1e-12
            )

    def test_marginals_normalized(self):
        ps = random_potentials(5, 4, 3, 3)
        out = exact_marginals_bruteforce(ps)
        np.testing.assert_allclose(out.data.sum(axis=(1, 2)), 1.0, rtol=1e-12)

    def test_relabeling_permutes_marginals(self):
        # Renaming nodes must rename marginals and change nothing else.
        ps = random_potentials(5, 3, 3, 3)
        perm = {0: 2, 1: 0, 2: 1}
        edges = tuple(
            sorted(tuple(sorted((perm[a], perm[b]))) for a, b in ps.graph.edges)
        )
        g2 = TreeGraph(num_nodes=3, edges=edges, root=perm[ps.graph.root])
        sched2 = build_schedule(g2)
        unary2 = np.empty_like(ps.unary.data)
        for i in range(3):
            unary2[perm[i]] = ps.unary.data[i]
        kernels2 = np.empty_like(ps.kernels.data)
        for (i, j), ch in ps.schedule.channel_of.items():
            kernels2[sched2.channel_of[(perm[i], perm[j])]] = ps.kernels.data[ch]
        ps2 = PotentialSet(
            unary=TensorStack(unary2), kernels=TensorStack(kernels2), graph=g2, schedule=sched2
        )
        ref = exact_marginals_bruteforce(ps)
        got = exact_marginals_bruteforce(ps2)
        for i in range(3):
            np.testing.assert_allclose(got.data[perm[i]], ref.data[i], rtol=1e-12)

    def test_chunked_path_matches_unchunked(self, monkeypatch):
        # Force tiny blocks; accumulation order changes, values must not
        # (beyond last-ulp reassociation).
        import agmn.oracle as oracle_mod

        ps = random_potentials(9, 3, 4, 3)
        ref = exact_marginals_bruteforce(ps)
        monkeypatch.setattr(oracle_mod, "_CHUNK_ELEMS", 16)
        got = exact_marginals_bruteforce(ps)
        np.testing.assert_allclose(got.data, ref.data, rtol=1e-12, atol=1e-15)

    def test_budget_refusal(self):
        ps = random_potentials(0, 4, 5, 3)
        with pytest.raises(BudgetError, match="390625"):
            exact_marginals_bruteforce(ps, EnumerationBudget(max_configs=1000))

    def test_budget_boundary_accepts(self):
        ps = random_potentials(0, 2, 2, 3)  # 16 configurations
        exact_marginals_bruteforce(ps, EnumerationBudget(max_configs=16))
        with pytest.raises(BudgetError):
            exact_marginals_bruteforce(ps, EnumerationBudget(max_configs=15))
