"""Closed-loop runs: simulated scenarios, file replays, and their artifacts.

Artifacts of a run directory:
    estimate.tum, truth.tum   TUM trajectories
    stats.csv                 deterministic per-frame fields
    timings.csv               wall-clock seconds per stage and frame
    report.json               EvalReport, timings excluded
    snapshots/frame_NNNNN.txt idx tx ty tz qx qy qz qw log_post
"""

import json
import logging
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from steinloc.exceptions import TrajectoryError
from steinloc.helper.miscellaneous import rng_streams
from steinloc.lie.se3 import Pose
from steinloc.localization.engine import STAGES, FilterEngine
from steinloc.localization.models import FilterConfig, FrameResult, OdometryInput
from steinloc.mapping.cloud import GaussianCloud, estimate_covariances, prepare_scan
from steinloc.mapping.ply import read_ply, write_ply
from steinloc.simulation.evaluation import evaluate_ate, frame_errors
from steinloc.simulation.models import EvalReport, Scenario
from steinloc.simulation.scan import cast_scan, simulate_scan
from steinloc.simulation.trajectory import (
    generate_trajectory,
    read_odometry,
    simulate_odometry,
    write_odometry,
    write_tum,
)
from steinloc.simulation.world import generate_world

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.9f"
FrameCallback = Callable[[FrameResult], None]


@dataclass(eq=False)
class RunResult:
    frames: list[FrameResult]
    stamps: np.ndarray
    truth: list[Pose] | None = None
    report: EvalReport | None = None
    errors: pd.DataFrame | None = None
    out_dir: Path | None = None
    extra: dict = field(default_factory=dict)

    @property
    def estimated(self) -> list[Pose]:
        return [f.pose for f in self.frames]


def stats_table(frames: list[FrameResult], errors: pd.DataFrame | None = None) -> pd.DataFrame:
    rows = []
    for f in frames:
        stats = f.neighbor_stats
        rows.append(
            {
                "frame": f.frame,
                **dict(zip(["tx", "ty", "tz"], f.pose.translation)),
                **dict(zip(["qx", "qy", "qz", "qw"], f.pose.quaternion)),
                "log_post": f.log_post,
                "index": f.index,
                "n_scan": f.n_scan,
                "n_matched_mean": f.n_matched_mean,
                "empty_scan": int(f.empty_scan),
                "observation_rejected": int(f.observation_rejected),
                "overflow": stats.overflow if stats else 0,
                "mean_kernel": stats.mean_kernel if stats else 0.0,
            }
        )
    table = pd.DataFrame(rows)
    if errors is not None and len(errors) == len(table):
        table["trans_err"] = errors["trans_err"].to_numpy()
        table["rot_err_deg"] = errors["rot_err_deg"].to_numpy()
    return table


def timing_table(frames: list[FrameResult]) -> pd.DataFrame:
    return pd.DataFrame(
        [{"frame": f.frame, **{k: f.timings.get(k, 0.0) for k in STAGES + ["total"]}} for f in frames]
    )


def run_frames(
    engine: FilterEngine,
    inputs: Iterable[tuple[GaussianCloud, OdometryInput]],
    snapshot_dir: Path | None = None,
    snapshot_every: int = 0,
    on_frame: FrameCallback | None = None,
) -> list[FrameResult]:
    """Step the engine through (scan, odometry) pairs, optionally dumping posterior snapshots."""
    frames = []
    for scan, odo in inputs:
        result = engine.step(scan, odo)
        frames.append(result)
        if snapshot_dir is not None and snapshot_every > 0 and result.frame % snapshot_every == 0:
            snapshot_dir.mkdir(parents=True, exist_ok=True)
            engine.particles.snapshot().to_csv(
                snapshot_dir / f"frame_{result.frame:05d}.txt",
                sep=" ", header=False, index=False, float_format=FLOAT_FORMAT, lineterminator="\n",
            )
        if on_frame is not None:
            on_frame(result)
    return frames


def write_artifacts(result: RunResult, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_tum(out_dir / "estimate.tum", result.stamps, result.estimated)
    if result.truth is not None:
        write_tum(out_dir / "truth.tum", result.stamps, result.truth)
    table_kwargs = dict(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    stats_table(result.frames, result.errors).to_csv(out_dir / "stats.csv", **table_kwargs)
    timing_table(result.frames).to_csv(out_dir / "timings.csv", **table_kwargs)
    if result.report is not None:
        (out_dir / "report.json").write_text(result.report.model_dump_json(indent=2) + "\n")
    logger.info(f"Artifacts written to {out_dir}")
    return out_dir


def _finish_report(frames: list[FrameResult], truth: list[Pose], occlusions: list[tuple[int, int]]) -> EvalReport:
    estimated = [f.pose for f in frames]
    report = evaluate_ate(estimated, truth, occlusions=occlusions)
    if report.converged and report.convergence_frame > 0:
        report = evaluate_ate(estimated, truth, skip=report.convergence_frame, occlusions=occlusions)
    report.timings = timing_table(frames).drop(columns="frame").mean().to_dict()
    return report


def run_scenario(
    scenario: Scenario,
    cfg: FilterConfig,
    out_dir: str | Path | None = None,
    snapshot_every: int = 0,
    on_frame: FrameCallback | None = None,
    max_cells: int | None = None,
) -> RunResult:
    """Simulate a scenario end to end and evaluate the filter against ground truth.

    Args:
        scenario (Scenario): world, trajectory, occlusions, sensor and noise.
        cfg (FilterConfig): filter configuration.
        out_dir (str | Path, optional): where to write artifacts. Nothing is written when None.
        snapshot_every (int, optional): posterior snapshot period in frames, 0 disables.
        on_frame (FrameCallback, optional): called after every frame.
        max_cells (int, optional): NNF cell cap override.

    Returns:
        RunResult: frames, trajectories and the EvalReport.
    """
    logger.info(f"Scenario {scenario.name}: seed={scenario.seed} particles={cfg.n_particles}")
    streams = rng_streams(scenario.seed, ["scan", "odometry"])
    world = generate_world(scenario.world)
    truth = generate_trajectory(scenario.trajectory)
    odometry = simulate_odometry(truth, scenario, streams["odometry"])
    engine = FilterEngine.from_cloud(cfg, world.cloud, max_cells=max_cells)
    engine.init_uniform()

    def inputs():
        for frame, (pose, odo) in enumerate(zip(truth, odometry)):
            yield simulate_scan(
                world, pose, scenario.sensor, streams["scan"], scenario.is_occluded(frame), cfg.cov_k
            ), odo

    out_dir = Path(out_dir) if out_dir is not None else None
    frames = run_frames(
        engine, inputs(), out_dir / "snapshots" if out_dir else None, snapshot_every, on_frame
    )
    stamps = np.arange(len(truth)) * scenario.trajectory.frame_period
    result = RunResult(
        frames=frames,
        stamps=stamps,
        truth=truth,
        report=_finish_report(frames, truth, scenario.occlusions),
        errors=frame_errors([f.pose for f in frames], truth),
        out_dir=out_dir,
    )
    if out_dir is not None:
        write_artifacts(result, out_dir)
        (out_dir / "scenario.json").write_text(scenario.model_dump_json(indent=2) + "\n")
        (out_dir / "config.json").write_text(json.dumps(cfg.model_dump(), indent=2) + "\n")
    logger.info(f"Scenario {scenario.name} finished: {result.report.model_dump()}")
    return result


def read_scan_dir(scan_dir: str | Path, cfg: FilterConfig) -> list[GaussianCloud]:
    """Scans stored as one PLY per frame, frame order = sorted file names."""
    files = sorted(Path(scan_dir).glob("*.ply"))
    if not files:
        raise TrajectoryError(f"No PLY scans in {scan_dir}")
    return [prepare_scan(read_ply(f), cfg.n_scan_max, cfg.scan_voxel, cfg.cov_k) for f in files]


def run_replay(
    map_points: np.ndarray,
    scans: list[GaussianCloud],
    odometry: list[OdometryInput],
    cfg: FilterConfig,
    out_dir: str | Path | None = None,
    snapshot_every: int = 0,
    frame_period: float = 0.1,
    on_frame: FrameCallback | None = None,
    max_cells: int | None = None,
) -> RunResult:
    """Localize against a point map from recorded scans and odometry."""
    if len(scans) != len(odometry):
        raise TrajectoryError(f"{len(scans)} scans but {len(odometry)} odometry rows")
    engine = FilterEngine.from_cloud(cfg, estimate_covariances(map_points, cfg.cov_k), max_cells=max_cells)
    engine.init_uniform()
    out_dir = Path(out_dir) if out_dir is not None else None
    frames = run_frames(
        engine, zip(scans, odometry), out_dir / "snapshots" if out_dir else None, snapshot_every, on_frame
    )
    result = RunResult(frames=frames, stamps=np.arange(len(frames)) * frame_period, out_dir=out_dir)
    if out_dir is not None:
        write_artifacts(result, out_dir)
    return result


def export_scenario(scenario: Scenario, out_dir: str | Path) -> dict[str, Path]:
    """Pre-generate map, per-frame raw scans, odometry and ground truth for replay."""
    out_dir = Path(out_dir)
    streams = rng_streams(scenario.seed, ["scan", "odometry"])
    world = generate_world(scenario.world)
    truth = generate_trajectory(scenario.trajectory)
    odometry = simulate_odometry(truth, scenario, streams["odometry"])
    scan_dir = out_dir / "scans"
    for frame, pose in enumerate(truth):
        points = (
            np.zeros((0, 3))
            if scenario.is_occluded(frame)
            else cast_scan(world, pose, scenario.sensor, streams["scan"])
        )
        write_ply(scan_dir / f"frame_{frame:05d}.ply", points)
    paths = {
        "map": write_ply(out_dir / "map.ply", world.cloud.means),
        "scans": scan_dir,
        "odometry": write_odometry(out_dir / "odometry.txt", odometry),
        "truth": write_tum(
            out_dir / "truth.tum", np.arange(len(truth)) * scenario.trajectory.frame_period, truth
        ),
    }
    (out_dir / "scenario.json").write_text(scenario.model_dump_json(indent=2) + "\n")
    logger.info(f"Scenario {scenario.name} exported: {len(truth)} frames to {out_dir}")
    return paths


def load_replay(out_dir: str | Path, cfg: FilterConfig) -> tuple[np.ndarray, list[GaussianCloud], list[OdometryInput]]:
    out_dir = Path(out_dir)
    return read_ply(out_dir / "map.ply"), read_scan_dir(out_dir / "scans", cfg), read_odometry(out_dir / "odometry.txt")


def benchmark(
    scenario: Scenario,
    cfg: FilterConfig,
    particle_counts: list[int],
    n_frames: int,
    max_cells: int | None = None,
) -> pd.DataFrame:
    """Mean per-stage wall time (ms) per frame for each particle count.

    The first frame of every run is a warm-up and is not averaged. Columns
    `<stage>_per_particle` are normalized by the smallest count's per-particle
    cost, so 1.0 means exactly linear scaling.
    """
    if n_frames < 2:
        raise ValueError(f"bench needs at least 2 frames, got {n_frames}")
    world = generate_world(scenario.world)
    truth = generate_trajectory(scenario.trajectory)
    if len(truth) < n_frames:
        raise TrajectoryError(f"scenario {scenario.name} has only {len(truth)} frames")
    streams = rng_streams(scenario.seed, ["scan", "odometry"])
    odometry = simulate_odometry(truth, scenario, streams["odometry"])
    scans = [
        simulate_scan(world, pose, scenario.sensor, streams["scan"], scenario.is_occluded(f), cfg.cov_k)
        for f, pose in enumerate(truth[:n_frames])
    ]
    engine = FilterEngine.from_cloud(cfg, world.cloud, max_cells=max_cells)

    rows = []
    for n in sorted(particle_counts):
        run_cfg = cfg.model_copy(update={"n_particles": int(n)})
        run = FilterEngine(run_cfg, engine.map)
        run.init_uniform()
        frames = run_frames(run, zip(scans, odometry[:n_frames]))
        means = timing_table(frames[1:]).drop(columns="frame").mean() * 1e3
        rows.append({"n_particles": int(n), **means.to_dict()})
        logger.info(f"bench n={n}: {means['total']:.1f} ms/frame")

    table = pd.DataFrame(rows)
    base = table.iloc[0]
    for stage in STAGES + ["total"]:
        unit = base[stage] / base["n_particles"]
        table[f"{stage}_per_particle"] = (table[stage] / table["n_particles"]) / unit if unit > 0 else np.nan
    return table
