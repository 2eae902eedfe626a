import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from steinloc.lie.se3 import Pose, exp
from steinloc.localization.gicp import (
    GnSystem,
    damped_step,
    default_damping,
    evaluate,
    evaluate_model,
    evaluate_particles,
    residual,
    residual_jacobian,
    solve_step,
)
from steinloc.localization.models import LOG_LIK_SENTINEL, FilterConfig
from steinloc.mapping.cloud import GaussianCloud
from steinloc.mapping.model import MapModel
from steinloc.tests.factories import random_pose, random_tangent, room_map, room_points, sensor_view


def random_covariances(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.normal(size=(n, 3, 3)) * 0.1
    return np.einsum("nij,nkj->nik", a, a) + 0.01 * np.eye(3)


class ResidualTest(SimpleTestCase):
    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        h = 1e-6
        for _ in range(100):
            pose = random_pose(rng)
            map_mu, scan_mu = rng.normal(size=3) * 3, rng.normal(size=3) * 3
            numeric = np.empty((3, 6))
            for k in range(6):
                step = np.zeros(6)
                step[k] = h
                numeric[:, k] = (
                    residual(map_mu, scan_mu, pose.perturb(step)) - residual(map_mu, scan_mu, pose.perturb(-step))
                ) / (2 * h)
            assert_allclose(residual_jacobian(scan_mu, pose), numeric, atol=1e-5)

    def test_residual(self):
        pose = Pose(np.eye(3), [1.0, 0.0, 0.0])
        assert_allclose(residual([2.0, 0.0, 0.0], [0.5, 0.0, 0.0], pose), [0.5, 0.0, 0.0])


class EvaluateTest(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.map = room_map()

    def test_scan_equal_to_map_at_identity(self):
        system = evaluate_model(self.map, self.map.cloud, Pose.identity())
        self.assertEqual(system.log_lik, 0.0)
        assert_array_equal(system.gradient, np.zeros(6))
        self.assertEqual(system.n_matched, len(self.map))
        assert_allclose(system.hessian, system.hessian.T)
        self.assertTrue(np.all(np.linalg.eigvalsh(system.hessian) > 0.0))

    def test_translation_error_is_undone(self):
        points = room_points()
        covs = np.tile(0.01 * np.eye(3), (len(points), 1, 1))
        cloud = GaussianCloud.from_arrays(points, covs)
        model = MapModel.build(cloud, resolution=0.05, max_query_dist=0.5)
        pose = Pose(np.eye(3), [0.05, 0.0, 0.0])
        system = evaluate_model(model, cloud, pose)
        self.assertEqual(system.n_matched, len(points))
        step = solve_step(system, default_damping(system.hessian))
        assert_allclose(step, [0.0, 0.0, 0.0, -0.05, 0.0, 0.0], atol=1e-3)
        after = evaluate_model(model, cloud, pose.perturb(step))
        self.assertGreater(after.log_lik, system.log_lik)

    def test_matches_explicit_world_frame_sum(self):
        rng = np.random.default_rng(5)
        truth = Pose.from_quaternion([1.5, 1.2, 1.0], [0.0, 0.0, np.sin(0.2), np.cos(0.2)])
        scan = sensor_view(self.map, truth)
        pose = truth.perturb(random_tangent(rng, max_angle=0.05, trans_scale=0.05))
        system = evaluate_model(self.map, scan, pose)

        hess, grad, cost, matched = np.zeros((6, 6)), np.zeros(6), 0.0, 0
        for mu_s, sigma_s in zip(scan.means, scan.covariances):
            idx = self.map.field.lookup(pose.transform_point(mu_s))
            if idx is None:
                continue
            e = residual(self.map.cloud.means[idx], mu_s, pose)
            omega = np.linalg.inv(self.map.cloud.covariances[idx] + pose.rotation @ sigma_s @ pose.rotation.T)
            jac = residual_jacobian(mu_s, pose)
            hess += jac.T @ omega @ jac
            grad += jac.T @ omega @ e
            cost += e @ omega @ e
            matched += 1
        self.assertEqual(system.n_matched, matched)
        assert_allclose(system.hessian, hess, rtol=1e-8, atol=1e-9 * np.abs(hess).max())
        assert_allclose(system.gradient, grad, rtol=1e-8, atol=1e-9 * np.abs(grad).max())
        self.assertAlmostEqual(system.log_lik / -cost, 1.0, places=8)

    def test_nothing_matched(self):
        far = Pose(np.eye(3), [100.0, 0.0, 0.0])
        system = evaluate_model(self.map, self.map.cloud, far)
        self.assertEqual(system.n_matched, 0)
        self.assertEqual(system.log_lik, LOG_LIK_SENTINEL)
        self.assertEqual(system.cost, 0.0)
        empty = evaluate(self.map.cloud, self.map.field, GaussianCloud.empty(), Pose.identity())
        self.assertEqual(empty.n_matched, 0)

    def test_log_lik_is_rigid_invariant(self):
        rng = np.random.default_rng(8)
        grid = np.array([[x, y, z] for x in range(3) for y in range(3) for z in range(3)], dtype=float)
        covs = random_covariances(rng, len(grid))
        pose = Pose.from_quaternion([0.4, 0.3, -0.2], [0.1, -0.2, 0.3, 0.9])
        observed = GaussianCloud.from_arrays(grid + rng.normal(0, 0.03, grid.shape), random_covariances(rng, 27))
        scan = observed.transformed(pose.inverse())
        estimate = pose.perturb([0.01, -0.02, 0.0, 0.03, 0.0, -0.02])
        model = MapModel.build(GaussianCloud.from_arrays(grid, covs), resolution=0.05, max_query_dist=0.4)
        base = evaluate_model(model, scan, estimate)

        moved = Pose.from_quaternion([5.0, -2.0, 1.0], [0.3, 0.1, -0.4, 0.8])
        moved_model = MapModel.build(
            GaussianCloud.from_arrays(grid, covs).transformed(moved), resolution=0.05, max_query_dist=0.4
        )
        other = evaluate_model(moved_model, scan, moved.compose(estimate))
        self.assertEqual(other.n_matched, base.n_matched)
        self.assertEqual(base.n_matched, 27)
        self.assertLess(base.log_lik, 0.0)
        self.assertAlmostEqual(other.log_lik / base.log_lik, 1.0, places=9)

    def test_steps_descend_inside_the_basin(self):
        rng = np.random.default_rng(21)
        truth = Pose.from_quaternion([2.0, 1.5, 1.2], [0.0, 0.0, 0.0, 1.0])
        scan = sensor_view(self.map, truth)
        descended = 0
        for _ in range(200):
            axis = rng.normal(size=3)
            omega = axis / np.linalg.norm(axis) * rng.uniform(0, np.radians(5.0))
            direction = rng.normal(size=3)
            v = direction / np.linalg.norm(direction) * rng.uniform(0, 0.2)
            pose = truth.perturb(np.concatenate([omega, v]))
            before = evaluate_model(self.map, scan, pose)
            step = solve_step(before, default_damping(before.hessian))
            after = evaluate_model(self.map, scan, pose.perturb(step))
            descended += after.cost / after.n_matched < before.cost / before.n_matched
        self.assertGreaterEqual(descended, 190)


class SolveStepTest(SimpleTestCase):
    def test_zero_gradient_gives_zero_step(self):
        assert_array_equal(solve_step(GnSystem(np.eye(6), np.zeros(6), -1.0, 1), 1e-3), np.zeros(6))

    def test_unit_translation_is_clamped(self):
        system = GnSystem(np.eye(6), np.array([0, 0, 0, 1.0, 0, 0]), -1.0, 1)
        assert_allclose(solve_step(system, 0.0), [0, 0, 0, -1.0, 0, 0])
        big = GnSystem(np.eye(6), np.array([3.0, 0, 0, 0, -5.0, 0]), -1.0, 1)
        assert_allclose(solve_step(big, 0.0, omega_max=0.5, v_max=1.0), [-0.5, 0, 0, 0, 1.0, 0])

    def test_solves_the_damped_system(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
            hess = q @ np.diag(rng.uniform(1.0, 10.0, 6)) @ q.T
            grad = rng.normal(size=6)
            grad *= 0.1 / np.linalg.norm(grad)
            step = solve_step(GnSystem(hess, grad, -1.0, 10), 1e-3)
            self.assertLess(np.linalg.norm((hess + 1e-3 * np.eye(6)) @ step + grad), 1e-9)

            numba_step = np.empty(6)
            self.assertTrue(damped_step(hess, grad, 1e-3, 0.5, 1.0, numba_step))
            assert_allclose(numba_step, solve_step(GnSystem(hess, grad, -1.0, 10), default_damping(hess)), atol=1e-12)

    def test_indefinite_system_gives_zero_step(self):
        system = GnSystem(-np.eye(6), np.ones(6), -1.0, 1)
        with self.assertLogs("steinloc.localization.gicp", "WARNING"):
            step = solve_step(system, 1e-3)
        assert_array_equal(step, np.zeros(6))
        out = np.ones(6)
        self.assertFalse(damped_step(-np.eye(6), np.ones(6), 1e-3, 0.5, 1.0, out))
        assert_array_equal(out, np.zeros(6))

    def test_singular_hessian_is_rescued_by_damping(self):
        system = GnSystem(np.zeros((6, 6)), np.array([0, 0, 0, 1e-4, 0, 0]), -1.0, 1)
        assert_allclose(solve_step(system, 1e-3), [0, 0, 0, -0.1, 0, 0])

    def test_negative_damping(self):
        with self.assertRaises(ValueError):
            solve_step(GnSystem(np.eye(6), np.ones(6), -1.0, 1), -1.0)


class EvaluateParticlesTest(SimpleTestCase):
    def test_batch_matches_single_pose_path(self):
        model = room_map()
        rng = np.random.default_rng(2)
        truth = Pose.from_quaternion([2.0, 1.5, 1.2], [0.0, 0.0, 0.1, 0.995])
        scan = sensor_view(model, truth)
        poses = [truth.perturb(random_tangent(rng, max_angle=0.1, trans_scale=0.2)) for _ in range(8)]
        poses.append(Pose(np.eye(3), [50.0, 0.0, 0.0]))
        cfg = FilterConfig(n_particles=len(poses))
        steps, log_liks, n_matched = evaluate_particles(
            np.array([p.rotation for p in poses]), np.array([p.translation for p in poses]), model, scan, cfg
        )
        for pose, step, log_lik, matched in zip(poses, steps, log_liks, n_matched):
            system = evaluate_model(model, scan, pose)
            self.assertEqual(matched, system.n_matched)
            self.assertAlmostEqual(log_lik, system.log_lik, delta=1e-9 * abs(system.log_lik))
            assert_allclose(step, solve_step(system, default_damping(system.hessian)), atol=1e-9)
        self.assertEqual(n_matched[-1], 0)
        self.assertEqual(log_liks[-1], cfg.log_lik_sentinel)
        self.assertTrue(np.all(log_liks <= 0.0))

    def test_empty_scan(self):
        model = room_map()
        cfg = FilterConfig(n_particles=2)
        steps, log_liks, n_matched = evaluate_particles(
            np.tile(np.eye(3), (2, 1, 1)), np.zeros((2, 3)), model, GaussianCloud.empty(), cfg
        )
        assert_array_equal(steps, np.zeros((2, 6)))
        assert_array_equal(n_matched, [0, 0])
        assert_array_equal(log_liks, [cfg.log_lik_sentinel] * 2)

    def test_exact_scan_gives_zero_step(self):
        model = room_map()
        truth = exp([0.0, 0.0, 0.3, 2.0, 1.5, 1.0])
        system = evaluate_model(model, sensor_view(model, truth), truth)
        self.assertEqual(system.n_matched, len(model))
        assert_allclose(solve_step(system, default_damping(system.hessian)), np.zeros(6), atol=1e-9)
        self.assertGreater(system.log_lik, -1e-12)
