import logging

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from steinloc.exceptions import TrajectoryError
from steinloc.lie.se3 import Pose, rotation_angle
from steinloc.simulation.models import EvalReport

logger = logging.getLogger(__name__)

CONVERGED_TRANS = 1.0
CONVERGED_ROT_DEG = 10.0
SUSTAIN_FRAMES = 10


def umeyama_alignment(source: NDArray[np.float64], target: NDArray[np.float64]) -> Pose:
    """Rigid transform G minimizing sum |G source_i - target_i|^2 (no scale).

    Args:
        source (NDArray): (N, 3) estimated positions.
        target (NDArray): (N, 3) reference positions.

    Returns:
        Pose: the alignment, applied to the estimate.
    """
    source_mean = source.mean(axis=0)
    target_mean = target.mean(axis=0)
    cross = (target - target_mean).T @ (source - source_mean)
    u, _, vh = np.linalg.svd(cross)
    sign = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vh) < 0:
        sign[2, 2] = -1.0
    rot = u @ sign @ vh
    return Pose(rot, target_mean - rot @ source_mean)


def frame_errors(estimated: list[Pose], truth: list[Pose]) -> pd.DataFrame:
    """Per-frame translation error (m) and rotation error (deg)."""
    if len(estimated) != len(truth):
        raise TrajectoryError(f"{len(estimated)} estimated poses vs {len(truth)} ground truth poses")
    trans = [float(np.linalg.norm(e.translation - t.translation)) for e, t in zip(estimated, truth)]
    rot = [
        float(np.degrees(rotation_angle(t.rotation.T @ e.rotation))) for e, t in zip(estimated, truth)
    ]
    return pd.DataFrame({"frame": np.arange(len(truth)), "trans_err": trans, "rot_err_deg": rot})


def first_sustained(
    ok: NDArray[np.bool_], start: int = 0, sustain: int = SUSTAIN_FRAMES
) -> int | None:
    """First frame >= start opening a run of `sustain` consecutive True values."""
    run = 0
    for frame in range(start, len(ok)):
        run = run + 1 if ok[frame] else 0
        if run == sustain:
            return frame - sustain + 1
    return None


def evaluate_ate(
    estimated: list[Pose],
    truth: list[Pose],
    skip: int = 0,
    occlusions: list[tuple[int, int]] | None = None,
    align: bool = False,
    trans_threshold: float = CONVERGED_TRANS,
    rot_threshold_deg: float = CONVERGED_ROT_DEG,
) -> EvalReport:
    """Absolute trajectory error of `estimated` against `truth`, both in the map frame.

    Args:
        estimated (list[Pose]): filter output per frame.
        truth (list[Pose]): ground truth per frame.
        skip (int, optional): frames excluded from the statistics. Defaults to 0.
        occlusions (list[tuple[int, int]], optional): [start, end) blind windows,
            one recovery count is reported per window.
        align (bool, optional): rigidly align the estimate first. Defaults to False.
        trans_threshold (float, optional): convergence translation error, m.
        rot_threshold_deg (float, optional): convergence rotation error, degrees.

    Raises:
        TrajectoryError: length mismatch or nothing left after `skip`.

    Returns:
        EvalReport: error statistics with convergence and recovery frames.
    """
    if len(estimated) != len(truth):
        raise TrajectoryError(f"{len(estimated)} estimated poses vs {len(truth)} ground truth poses")
    if skip < 0 or skip >= len(truth):
        raise TrajectoryError(f"skip={skip} leaves no frames of {len(truth)}")
    if align:
        alignment = umeyama_alignment(
            np.array([p.translation for p in estimated[skip:]]),
            np.array([p.translation for p in truth[skip:]]),
        )
        estimated = [alignment.compose(p) for p in estimated]

    errors = frame_errors(estimated, truth)
    ok = (errors["trans_err"] < trans_threshold) & (errors["rot_err_deg"] < rot_threshold_deg)
    ok = ok.to_numpy()
    recovery = []
    for _, end in occlusions or []:
        frame = first_sustained(ok, end)
        recovery.append(None if frame is None else frame - end)

    used = errors.iloc[skip:]
    trans = used["trans_err"].to_numpy()
    report = EvalReport(
        n_frames=len(truth),
        skip=skip,
        aligned=align,
        ate_rmse=float(np.sqrt(np.mean(trans**2))),
        ate_mean=float(trans.mean()),
        ate_std=float(trans.std()),
        ate_median=float(np.median(trans)),
        ate_max=float(trans.max()),
        rot_rmse_deg=float(np.sqrt(np.mean(used["rot_err_deg"].to_numpy() ** 2))),
        convergence_frame=first_sustained(ok),
        recovery_frames=recovery,
    )
    logger.info(
        f"ATE rmse={report.ate_rmse:.4f} m over {len(trans)} frames, "
        f"converged at {report.convergence_frame}, recovery {report.recovery_frames}"
    )
    return report
