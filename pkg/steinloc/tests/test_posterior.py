import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal
from scipy.special import logsumexp

from steinloc.localization.neighbors import NeighborGraph
from steinloc.localization.particles import ParticleSet
from steinloc.localization.posterior import (
    PosteriorState,
    bayes_update,
    representative,
    smooth,
    smooth_probabilities,
)


def full_graph(n: int, kernel: float = 1.0) -> NeighborGraph:
    graph = NeighborGraph.self_only(n, n)
    for i in range(n):
        graph.indices[i] = np.roll(np.arange(n), -i)
        graph.kernels[i, 1:] = kernel
    return graph


def random_graph(n: int, k: int, rng: np.random.Generator) -> NeighborGraph:
    graph = NeighborGraph.self_only(n, k)
    for i in range(n):
        others = rng.choice(np.delete(np.arange(n), i), size=k - 2, replace=False)
        graph.indices[i, 1 : k - 1] = others
        graph.kernels[i, 1 : k - 1] = rng.uniform(0.01, 1.0, k - 2)
    return graph


class BayesUpdateTest(SimpleTestCase):
    def test_equal_likelihoods_keep_uniform(self):
        post = PosteriorState.uniform(5)
        rejected = bayes_update(post, np.full(5, -3.0), np.full(5, 10), beta=2.0)
        self.assertFalse(rejected)
        assert_allclose(post.log_post, np.full(5, -np.log(5)), atol=1e-12)

    def test_ratio_follows_tempered_average(self):
        post = PosteriorState.uniform(2)
        bayes_update(post, np.array([-10.0, -30.0]), np.array([10, 20]), beta=2.0)
        self.assertAlmostEqual(post.log_post[0] - post.log_post[1], 2.0 * (-1.0 + 1.5), places=12)
        self.assertAlmostEqual(logsumexp(post.log_post), 0.0, places=12)

    def test_zero_beta_changes_nothing(self):
        post = PosteriorState(np.log(np.array([0.2, 0.3, 0.5])))
        before = post.log_post.copy()
        bayes_update(post, np.array([-1.0, -50.0, -2.0]), np.array([1, 1, 1]), beta=0.0)
        assert_allclose(post.log_post, before, atol=1e-12)

    def test_nothing_matched_resets_to_uniform(self):
        post = PosteriorState(np.log(np.array([0.7, 0.2, 0.1])))
        self.assertTrue(bayes_update(post, np.full(3, -1e6), np.zeros(3, dtype=np.int64), beta=2.0))
        assert_allclose(post.probabilities, np.full(3, 1 / 3), atol=1e-15)

    def test_floor_keeps_values_finite(self):
        post = PosteriorState.uniform(3)
        bayes_update(post, np.array([0.0, -1e6, -1e6]), np.array([1, 1, 0]), beta=2.0)
        self.assertTrue(np.all(np.isfinite(post.log_post)))
        self.assertGreaterEqual(post.log_post.min(), -80.0 - 1e-9)
        self.assertAlmostEqual(logsumexp(post.log_post), 0.0, places=12)

    def test_floor_holds_after_renormalization(self):
        post = PosteriorState(np.log(np.array([0.7, 0.2, 0.05, 0.05])), floor=-2.0)
        post.normalize()
        self.assertGreaterEqual(post.log_post.min(), -2.0)
        assert_allclose(post.log_post[2:], [-2.0, -2.0])
        self.assertAlmostEqual(logsumexp(post.log_post), 0.0, places=12)
        self.assertAlmostEqual(post.log_post[0] - post.log_post[1], np.log(0.7 / 0.2), places=12)

    def test_rescaled_entries_that_drop_below_the_floor_are_pinned(self):
        post = PosteriorState(np.log(np.array([0.5, 0.28, 0.22])), floor=-1.3)
        post.normalize()
        pinned = np.exp(-1.3)
        assert_allclose(post.probabilities, [1.0 - 2 * pinned, pinned, pinned], atol=1e-12)

    def test_infeasible_floor_resets(self):
        post = PosteriorState(np.log(np.array([0.5, 0.3, 0.2])), floor=-0.5)
        with self.assertLogs("steinloc.localization.posterior", level="WARNING"):
            post.normalize()
        assert_allclose(post.probabilities, np.full(3, 1 / 3), atol=1e-15)

    def test_scaled_likelihoods_keep_the_argmax(self):
        rng = np.random.default_rng(0)
        log_liks = -rng.uniform(0, 10, 50)
        matched = np.full(50, 20)
        winners = []
        for scale in (0.5, 1.0, 3.0):
            post = PosteriorState.uniform(50)
            bayes_update(post, scale * log_liks, matched, beta=2.0)
            winners.append(int(np.argmax(post.log_post)))
        self.assertEqual(len(set(winners)), 1)

    def test_invalid_arguments(self):
        post = PosteriorState.uniform(3)
        with self.assertRaises(ValueError):
            bayes_update(post, np.zeros(3), np.ones(3), beta=-1.0)
        with self.assertRaises(ValueError):
            bayes_update(post, np.zeros(2), np.ones(3), beta=1.0)


class SmoothingTest(SimpleTestCase):
    def test_self_only_lists_change_nothing(self):
        prob = np.array([0.1, 0.6, 0.3])
        assert_array_equal(smooth_probabilities(prob, NeighborGraph.self_only(3, 4), 10), prob)

    def test_one_round_over_coincident_particles(self):
        out = smooth_probabilities(np.array([1.0, 0.0, 0.0]), full_graph(3), 1)
        assert_allclose(out, np.full(3, 1 / 3), atol=1e-15)

    def test_uniform_is_a_fixed_point(self):
        rng = np.random.default_rng(1)
        prob = np.full(40, 1 / 40)
        assert_allclose(smooth_probabilities(prob, random_graph(40, 8, rng), 10), prob, atol=1e-12)

    def test_rounds_are_convex_combinations(self):
        rng = np.random.default_rng(2)
        prob = rng.dirichlet(np.ones(60))
        graph = random_graph(60, 10, rng)
        out = smooth_probabilities(prob, graph, 1)
        for i in range(60):
            neighbors = graph.indices[i][graph.indices[i] >= 0]
            self.assertGreaterEqual(out[i], prob[neighbors].min() - 1e-15)
            self.assertLessEqual(out[i], prob[neighbors].max() + 1e-15)

    def test_zero_iterations_and_negative(self):
        prob = np.array([0.5, 0.5])
        assert_array_equal(smooth_probabilities(prob, full_graph(2), 0), prob)
        with self.assertRaises(ValueError):
            smooth_probabilities(prob, full_graph(2), -1)

    def test_smooth_renormalizes(self):
        rng = np.random.default_rng(3)
        post = PosteriorState(np.log(rng.dirichlet(np.ones(30))))
        smooth(post, random_graph(30, 6, rng), 5)
        self.assertAlmostEqual(logsumexp(post.log_post), 0.0, places=12)


class RepresentativeTest(SimpleTestCase):
    def _particles(self, prob: list[float]) -> ParticleSet:
        n = len(prob)
        particles = ParticleSet.from_poses(np.tile(np.eye(3), (n, 1, 1)), np.arange(n * 3.0).reshape(n, 3))
        particles.posterior.log_post[:] = np.log(prob)
        return particles

    def test_most_probable_particle(self):
        particles = self._particles([0.1, 0.7, 0.2])
        pose, log_post, index = representative(particles.posterior, particles)
        self.assertEqual(index, 1)
        self.assertAlmostEqual(log_post, np.log(0.7))
        assert_array_equal(pose.translation, [3.0, 4.0, 5.0])

    def test_ties_resolve_to_the_lowest_index(self):
        prob = [0.05] * 8
        prob[3] = prob[5] = 0.3
        particles = self._particles(prob)
        _, _, index = representative(particles.posterior, particles)
        self.assertEqual(index, 3)

    def test_single_particle(self):
        particles = self._particles([1.0])
        self.assertEqual(representative(particles.posterior, particles)[2], 0)
