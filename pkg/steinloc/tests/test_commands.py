import json
import tempfile
import uuid
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase, override_settings

from steinloc.helper.cli import load_config, load_scenario, particle_counts
from steinloc.helper.records import RunData, RunRecorder
from steinloc.lie.se3 import Pose
from steinloc.models import FrameRecord, ScenarioRun
from steinloc.simulation.trajectory import write_tum
from steinloc.tests.factories import tiny_scenario


class CommandTestCase(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.settings_override = override_settings(LOCALIZATION_OUTPUT_DIR=self.dir / "runs")
        self.settings_override.enable()
        self.scenario_path = self.dir / "tiny.json"
        self.scenario_path.write_text(tiny_scenario(occlusions=[(4, 6)]).model_dump_json())
        self.config_path = self.dir / "filter.cfg"
        self.config_path.write_text("# small and fast\nn_particles = 100\nn_scan_max = 100\n")

    def tearDown(self):
        self.settings_override.disable()
        self.tmp.cleanup()

    def call(self, *args, **kwargs) -> str:
        out = StringIO()
        call_command(*args, stdout=out, **kwargs)
        return out.getvalue()


class EvaluateCommandTest(CommandTestCase):
    def test_report(self):
        truth = [Pose(np.eye(3), [np.cos(0.3 * i), np.sin(0.3 * i), 0.1 * i]) for i in range(12)]
        stamps = np.arange(12) * 0.1
        gt = write_tum(self.dir / "gt.tum", stamps, truth)
        est = write_tum(self.dir / "est.tum", stamps, [Pose(p.rotation, p.translation + [0, 1, 0]) for p in truth])
        report = json.loads(self.call("evaluate", est=str(est), gt=str(gt)))
        self.assertAlmostEqual(report["ate_rmse"], 1.0, places=6)
        self.assertEqual(report["n_frames"], 12)
        aligned = json.loads(self.call("evaluate", est=str(est), gt=str(gt), align=True, skip=2))
        self.assertLess(aligned["ate_rmse"], 1e-6)
        self.assertEqual(aligned["skip"], 2)

    def test_missing_file(self):
        with self.assertRaises(CommandError):
            self.call("evaluate", est=str(self.dir / "nope.tum"), gt=str(self.dir / "nope.tum"))


class LocalizeCommandTest(CommandTestCase):
    def test_simulate_then_localize(self):
        data = self.dir / "data"
        output = self.call("simulate", scenario=str(self.scenario_path), out=str(data))
        self.assertIn("26 frames", output)
        for name in ["map.ply", "odometry.txt", "truth.tum", "scenario.json"]:
            self.assertTrue((data / name).is_file(), name)

        out = self.dir / "replay"
        self.call(
            "localize",
            map=str(data / "map.ply"),
            scans=str(data / "scans"),
            odom=str(data / "odometry.txt"),
            config=str(self.config_path),
            out=str(out),
            snapshot_every=10,
        )
        self.assertTrue((out / "estimate.tum").is_file())
        self.assertTrue((out / "snapshots" / "frame_00020.txt").is_file())
        run = ScenarioRun.objects.get()
        self.assertEqual(run.kind, ScenarioRun.Kind.LOCALIZE)
        self.assertEqual(run.status, ScenarioRun.Status.DONE)
        self.assertEqual(run.n_particles, 100)
        self.assertEqual(run.frames.count(), 26)
        self.assertIsNone(run.frames.first().trans_err)

        report = json.loads(self.call("evaluate", est=str(out / "estimate.tum"), gt=str(data / "truth.tum")))
        self.assertEqual(report["n_frames"], 26)

    def test_scenario_file(self):
        self.call("localize", scans=str(self.scenario_path), config=str(self.config_path), seed=3)
        run = ScenarioRun.objects.get()
        self.assertEqual(run.kind, ScenarioRun.Kind.SCENARIO)
        self.assertEqual(run.seed, 3)
        self.assertEqual(run.report["n_frames"], 26)
        self.assertIsNotNone(run.frames.first().trans_err)
        self.assertTrue((self.dir / "runs" / "tiny-seed3" / "report.json").is_file())

    def test_no_record(self):
        self.call("localize", scans=str(self.scenario_path), config=str(self.config_path), no_record=True)
        self.assertFalse(ScenarioRun.objects.exists())

    def test_bad_inputs(self):
        (self.dir / "scans").mkdir()
        with self.assertRaises(CommandError):
            self.call("localize", scans=str(self.dir / "scans"))
        bad_config = self.dir / "bad.cfg"
        bad_config.write_text("speed = 3\n")
        with self.assertRaises(CommandError):
            self.call("localize", scans=str(self.scenario_path), config=str(bad_config))
        with self.assertRaises(CommandError):
            self.call("simulate")


class SweepAndBenchCommandTest(CommandTestCase):
    def test_inline_sweep(self):
        output = self.call(
            "sweep", scenario=str(self.scenario_path), seeds=2, config=str(self.config_path), required=0
        )
        self.assertIn("seed 0:", output)
        self.assertIn("seed 1:", output)
        self.assertIn("/2 runs", output)
        self.assertEqual(ScenarioRun.objects.filter(status=ScenarioRun.Status.DONE).count(), 2)

    def test_queued_sweep_runs_eagerly(self):
        output = self.call(
            "sweep", scenario=str(self.scenario_path), seeds=2, first_seed=5, config=str(self.config_path), queue=True
        )
        self.assertIn("2 runs of tiny have been queued", output)
        runs = ScenarioRun.objects.order_by("seed")
        self.assertEqual([r.seed for r in runs], [5, 6])
        self.assertTrue(all(r.kind == ScenarioRun.Kind.SWEEP for r in runs))
        self.assertTrue(all(r.status == ScenarioRun.Status.DONE for r in runs))

    def test_bench(self):
        csv = self.dir / "bench.csv"
        output = self.call(
            "bench", scenario=str(self.scenario_path), particles="50,100", frames=2,
            config=str(self.config_path), csv=str(csv),
        )
        self.assertIn("Processing time per frame", output)
        self.assertTrue(csv.is_file())
        with self.assertRaises(CommandError):
            self.call("bench", particles="fifty")


class RunRecordTest(CommandTestCase):
    def test_views(self):
        self.call("localize", scans=str(self.scenario_path), config=str(self.config_path))
        ScenarioRun.objects.create(name="other", kind=ScenarioRun.Kind.BENCH, n_particles=10)
        listing = self.client.get("/runs/").json()
        self.assertEqual(listing["count"], 2)
        self.assertEqual(self.client.get("/runs/?kind=bench").json()["count"], 1)

        run = ScenarioRun.objects.get(kind=ScenarioRun.Kind.SCENARIO)
        details = self.client.get(f"/runs/{run.id}/").json()
        self.assertEqual(details["status"], "done")
        self.assertEqual(len(details["frames"]), 26)
        self.assertEqual([f["frame"] for f in details["frames"]], list(range(26)))
        self.assertIn("total", details["stage_means"])
        self.assertEqual(self.client.get(f"/runs/{uuid.uuid4()}/").status_code, 404)

    def test_failed_run(self):
        recorder = RunRecorder("broken", ScenarioRun.Kind.SCENARIO, 0, 10).begin("/tmp/x")
        recorder.fail(ValueError("bad map"))
        run = ScenarioRun.objects.get()
        self.assertEqual(run.status, ScenarioRun.Status.FAILED)
        self.assertEqual(run.error["type"], "ValueError")
        self.assertIsNotNone(run.duration)
        self.assertEqual(RunData(run).frames().shape, (0, 0))
        self.assertEqual(RunData(run).stage_means(), {})

    def test_status_changes_are_logged(self):
        with self.assertLogs("steinloc.signals", level="INFO") as logs:
            run = ScenarioRun.objects.create(name="logged", n_particles=1)
            run.status = ScenarioRun.Status.RUNNING
            run.save()
        self.assertIn("created as queued", logs.output[0])
        self.assertIn("is running", logs.output[1])
        self.assertEqual(FrameRecord.objects.count(), 0)


class CliHelperTest(CommandTestCase):
    def test_load_config(self):
        cfg = load_config(str(self.config_path), seed=4, profile="outdoor")
        self.assertEqual(cfg.n_particles, 100)
        self.assertEqual(cfg.seed, 4)
        self.assertEqual(cfg.nnf_resolution, 0.2)
        self.assertEqual(cfg.max_query_dist, 2.0)
        self.assertEqual(load_config().nnf_resolution, 0.1)

    def test_load_scenario(self):
        self.assertEqual(load_scenario(str(self.scenario_path), seed=9).seed, 9)
        self.assertEqual(load_scenario(preset="easy").name, "easy")
        for kwargs in ({}, {"path": str(self.scenario_path), "preset": "easy"}, {"preset": "attic"}, {"path": "none.json"}):
            with self.subTest(kwargs), self.assertRaises(CommandError):
                load_scenario(**kwargs)

    def test_particle_counts(self):
        self.assertEqual(particle_counts("1e4, 1e5,"), [10_000, 100_000])
        for text in ("", "abc", "0,10"):
            with self.subTest(text), self.assertRaises(CommandError):
                particle_counts(text)
