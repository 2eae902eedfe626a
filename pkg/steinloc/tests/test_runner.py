import json
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from steinloc.exceptions import TrajectoryError
from steinloc.localization.engine import STAGES
from steinloc.localization.models import FilterConfig
from steinloc.simulation.runner import (
    benchmark,
    export_scenario,
    load_replay,
    read_scan_dir,
    run_replay,
    run_scenario,
    stats_table,
)
from steinloc.simulation.trajectory import read_tum
from steinloc.tests.factories import tiny_scenario

CONFIG = FilterConfig(n_particles=200, n_scan_max=100, seed=1)


class RunScenarioTest(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_artifacts(self):
        seen = []
        result = run_scenario(
            tiny_scenario(occlusions=[(3, 6)]), CONFIG, self.dir / "run", snapshot_every=5, on_frame=seen.append
        )
        run = self.dir / "run"
        for name in ["estimate.tum", "truth.tum", "stats.csv", "timings.csv", "report.json", "scenario.json", "config.json"]:
            self.assertTrue((run / name).is_file(), name)
        self.assertEqual(
            sorted(p.name for p in (run / "snapshots").iterdir()),
            [f"frame_{i:05d}.txt" for i in range(0, 26, 5)],
        )
        self.assertEqual(len(seen), 26)
        self.assertEqual(len(result.frames), 26)

        snapshot = pd.read_csv(run / "snapshots" / "frame_00005.txt", sep=" ", header=None)
        self.assertEqual(snapshot.shape, (200, 9))
        self.assertAlmostEqual(float(np.exp(snapshot[8]).sum()), 1.0, places=6)

        stats = pd.read_csv(run / "stats.csv")
        self.assertEqual(stats["empty_scan"].tolist()[3:6], [1, 1, 1])
        self.assertEqual(stats["empty_scan"].sum(), 3)
        self.assertIn("trans_err", stats.columns)
        self.assertEqual(list(pd.read_csv(run / "timings.csv").columns), ["frame", *STAGES, "total"])

        report = json.loads((run / "report.json").read_text())
        self.assertEqual(report["n_frames"], 26)
        self.assertEqual(len(report["recovery_frames"]), 1)
        self.assertNotIn("timings", report)
        self.assertEqual(set(result.report.timings), set(STAGES) | {"total"})

        stamps, estimate = read_tum(run / "estimate.tum")
        self.assertEqual(len(estimate), 26)
        self.assertAlmostEqual(stamps[1] - stamps[0], 0.1)

    def test_runs_are_reproducible(self):
        for name in ("a", "b"):
            run_scenario(tiny_scenario(seed=2), CONFIG, self.dir / name, snapshot_every=10)
        for name in ["estimate.tum", "truth.tum", "stats.csv", "report.json", "snapshots/frame_00020.txt"]:
            self.assertEqual((self.dir / "a" / name).read_bytes(), (self.dir / "b" / name).read_bytes(), name)

    def test_without_output_directory(self):
        result = run_scenario(tiny_scenario(), CONFIG)
        self.assertIsNone(result.out_dir)
        self.assertEqual(len(result.errors), 26)
        self.assertEqual(list(self.dir.iterdir()), [])

    def test_stats_table(self):
        result = run_scenario(tiny_scenario(), CONFIG.model_copy(update={"n_particles": 50}))
        table = stats_table(result.frames)
        self.assertEqual(
            list(table.columns),
            [
                "frame", "tx", "ty", "tz", "qx", "qy", "qz", "qw", "log_post", "index", "n_scan",
                "n_matched_mean", "empty_scan", "observation_rejected", "overflow", "mean_kernel",
            ],
        )
        self.assertEqual(table["frame"].tolist(), list(range(26)))
        self.assertIn("rot_err_deg", stats_table(result.frames, result.errors).columns)


class ReplayTest(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_export_then_replay(self):
        paths = export_scenario(tiny_scenario(occlusions=[(2, 4)]), self.dir / "data")
        self.assertEqual(len(list(paths["scans"].glob("*.ply"))), 26)
        map_points, scans, odometry = load_replay(self.dir / "data", CONFIG)
        self.assertEqual(len(scans), 26)
        self.assertTrue(scans[2].is_empty and scans[3].is_empty)
        self.assertFalse(odometry[2].valid)

        result = run_replay(map_points, scans, odometry, CONFIG, self.dir / "out", snapshot_every=0)
        self.assertEqual(len(result.frames), 26)
        self.assertTrue((self.dir / "out" / "estimate.tum").is_file())
        self.assertFalse((self.dir / "out" / "truth.tum").exists())
        self.assertFalse((self.dir / "out" / "snapshots").exists())

        with self.assertRaises(TrajectoryError):
            run_replay(map_points, scans, odometry[:-1], CONFIG)

    def test_missing_scans(self):
        (self.dir / "empty").mkdir()
        with self.assertRaises(TrajectoryError):
            read_scan_dir(self.dir / "empty", CONFIG)


class BenchmarkTest(SimpleTestCase):
    def test_scaling_table(self):
        table = benchmark(tiny_scenario(), CONFIG, [100, 50], n_frames=3)
        self.assertEqual(table["n_particles"].tolist(), [50, 100])
        for stage in [*STAGES, "total"]:
            self.assertIn(stage, table.columns)
            self.assertAlmostEqual(table[f"{stage}_per_particle"].iloc[0], 1.0)

    def test_frame_limits(self):
        with self.assertRaises(ValueError):
            benchmark(tiny_scenario(), CONFIG, [50], n_frames=1)
        with self.assertRaises(TrajectoryError):
            benchmark(tiny_scenario(), CONFIG, [50], n_frames=100)
