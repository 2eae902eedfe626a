import logging

import numpy as np
from numpy.typing import NDArray
from scipy.spatial.transform import Rotation

from steinloc.exceptions import ScenarioError
from steinloc.helper.miscellaneous import StageTimer, rng_streams
from steinloc.lie.se3 import Pose, right_compose, right_update
from steinloc.localization.gicp import evaluate_particles
from steinloc.localization.models import FilterConfig, FrameResult, OdometryInput
from steinloc.localization.neighbors import update_neighbors
from steinloc.localization.particles import ParticleSet
from steinloc.localization.posterior import bayes_update, representative, smooth
from steinloc.localization.svgd import apply_updates, compute_phis
from steinloc.mapping.cloud import Bounds, GaussianCloud, cap_scan
from steinloc.mapping.model import MapModel

logger = logging.getLogger(__name__)

STREAMS = ["init", "predict", "neighbors"]
STAGES = ["predict", "neighbor_update", "likelihood_evaluation", "state_update", "posterior_update"]


def init_uniform(
    cfg: FilterConfig, bounds: Bounds, full_rotation: bool, rng: np.random.Generator
) -> ParticleSet:
    """Particles uniform over `bounds`, rotations uniform on SO3 or in yaw only.

    Args:
        cfg (FilterConfig): particle count and neighbor list capacity.
        bounds (Bounds): translation support.
        full_rotation (bool): uniform SO3 when True, uniform yaw about z otherwise.
        rng (np.random.Generator): initialization stream.

    Raises:
        ScenarioError: degenerate bounds.

    Returns:
        ParticleSet: uniform posterior, self-only neighbor lists.
    """
    if bounds.is_degenerate():
        raise ScenarioError(f"Cannot initialize particles in degenerate bounds {bounds}")
    n = cfg.n_particles
    translations = rng.uniform(np.asarray(bounds.lo), np.asarray(bounds.hi), size=(n, 3))
    if full_rotation:
        rotations = Rotation.random(n, random_state=rng).as_matrix()
    else:
        rotations = Rotation.from_euler("z", rng.uniform(-np.pi, np.pi, n)).as_matrix()
    return ParticleSet.from_poses(rotations, translations, cfg.k_neighbors, cfg.smooth_iters)


def predict(
    particles: ParticleSet,
    odo: OdometryInput,
    rng: np.random.Generator,
    diffusion_cov: NDArray[np.float64],
) -> None:
    """T_i <- T_i dT exp(delta_i), delta_i ~ N(0, cov), in place.

    A blocked sensor (odo.valid False) moves nothing and diffuses with
    `diffusion_cov`. An all-zero covariance draws no noise.
    """
    if odo.valid:
        delta, cov = odo.delta, odo.cov
    else:
        delta, cov = Pose.identity(), np.asarray(diffusion_cov, dtype=np.float64)
    right_compose(particles.rotations, particles.translations, delta.rotation, delta.translation)
    if not np.any(cov):
        return
    eigvals, eigvecs = np.linalg.eigh(cov)
    low = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
    noise = rng.standard_normal((len(particles), 6)) @ low.T
    right_update(particles.rotations, particles.translations, noise)


class FilterEngine:
    """Per-frame pipeline: predict, neighbor pass, likelihood and Gauss-Newton steps,
    Stein update, Bayes update, graph smoothing and representative extraction.
    """

    def __init__(self, cfg: FilterConfig, map_model: MapModel, particles: ParticleSet | None = None):
        self.cfg = cfg
        self.map = map_model
        self.kernel = cfg.kernel
        self.lsh = cfg.lsh
        self.bounds = map_model.cloud.bounds
        self.rngs = rng_streams(cfg.seed, STREAMS)
        self.particles = particles
        self.frame = 0

    @classmethod
    def from_cloud(cls, cfg: FilterConfig, cloud: GaussianCloud, max_cells: int | None = None) -> "FilterEngine":
        kwargs = {} if max_cells is None else {"max_cells": max_cells}
        map_model = MapModel.build(cloud, cfg.nnf_resolution, cfg.max_query_dist, cfg.padding, **kwargs)
        return cls(cfg, map_model)

    def init_uniform(self, bounds: Bounds | None = None, full_rotation: bool | None = None) -> ParticleSet:
        self.particles = init_uniform(
            self.cfg,
            self.bounds if bounds is None else bounds,
            self.cfg.full_rotation if full_rotation is None else full_rotation,
            self.rngs["init"],
        )
        logger.info(f"Initialized {len(self.particles)} particles uniformly")
        return self.particles

    def predict(self, odo: OdometryInput) -> None:
        predict(self.particles, odo, self.rngs["predict"], self.cfg.diffusion_cov)

    def step(self, scan: GaussianCloud, odo: OdometryInput) -> FrameResult:
        """Run one frame and return the representative state.

        Args:
            scan (GaussianCloud): scan Gaussians in the sensor frame, empty when occluded.
            odo (OdometryInput): motion since the previous frame.

        Raises:
            ScenarioError: particles not initialized.

        Returns:
            FrameResult: representative pose, log posterior, counts and stage timings.
        """
        if self.particles is None:
            raise ScenarioError("FilterEngine.step called before particles were initialized")
        cfg = self.cfg
        particles = self.particles
        timer = StageTimer()

        with timer("predict"):
            self.predict(odo)
        with timer("neighbor_update"):
            stats = update_neighbors(
                particles, particles.graph, self.lsh, self.kernel, self.rngs["neighbors"], self.bounds
            )
        with timer("likelihood_evaluation"):
            scan = cap_scan(scan, cfg.n_scan_max, cfg.scan_voxel, cfg.cov_k)

        rejected = False
        matched_mean = 0.0
        if not scan.is_empty:
            with timer("likelihood_evaluation"):
                steps, log_liks, n_matched = evaluate_particles(
                    particles.rotations, particles.translations, self.map, scan, cfg
                )
            for iteration in range(cfg.n_svgd_iters):
                if iteration:
                    with timer("likelihood_evaluation"):
                        steps, _, _ = evaluate_particles(
                            particles.rotations, particles.translations, self.map, scan, cfg
                        )
                with timer("state_update"):
                    phis = compute_phis(
                        steps, particles.rotations, particles.translations,
                        particles.graph.indices, self.kernel,
                    )
                    apply_updates(particles.rotations, particles.translations, phis)
            with timer("posterior_update"):
                rejected = bayes_update(particles.posterior, log_liks, n_matched, cfg.beta)
            matched_mean = float(n_matched.mean())

        with timer("posterior_update"):
            smooth(particles.posterior, particles.graph, cfg.smooth_iters)
            pose, log_post, index = representative(particles.posterior, particles)

        timings = timer.as_dict(STAGES)
        result = FrameResult(
            frame=self.frame,
            pose=pose,
            log_post=log_post,
            index=index,
            n_scan=len(scan),
            n_matched_mean=matched_mean,
            empty_scan=scan.is_empty,
            observation_rejected=rejected,
            neighbor_stats=stats,
            timings=timings,
        )
        logger.debug(
            f"Frame {self.frame}: particle {index} log_post={log_post:.3f} "
            f"matched={matched_mean:.1f} timings={timings}"
        )
        self.frame += 1
        return result
