from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from steinloc.helper.cli import command_errors, load_config, load_scenario, output_dir
from steinloc.helper.records import RunRecorder
from steinloc.mapping.ply import read_ply
from steinloc.models import ScenarioRun
from steinloc.simulation.runner import read_scan_dir, run_replay, run_scenario
from steinloc.simulation.trajectory import read_odometry


class Command(BaseCommand):
    help = "Localize against a PLY map from recorded scans and odometry, or run a scenario file closed-loop."

    def add_arguments(self, parser):
        parser.add_argument("--map", type=str, help="[path] map point cloud, ASCII PLY")
        parser.add_argument(
            "--scans",
            type=str,
            required=True,
            help="[path] directory of per-frame PLY scans, or a scenario JSON file",
        )
        parser.add_argument("--odom", type=str, help="[path] per-frame odometry file")
        parser.add_argument("--config", type=str, help="[path] key = value FilterConfig file")
        parser.add_argument("--out", type=str, help="[path] output directory")
        parser.add_argument("--seed", type=int, default=None)
        parser.add_argument("--particles", type=int, default=None)
        parser.add_argument("--snapshot-every", type=int, default=0, help="posterior snapshot period, 0 = off")
        parser.add_argument("--frame-period", type=float, default=0.1, help="seconds between frames")
        parser.add_argument("--no-record", action="store_true", help="do not store the run in the database")

    def handle(self, *args, **options):
        with command_errors():
            cfg = load_config(options["config"], seed=options["seed"], n_particles=options["particles"])
            scans = Path(options["scans"])
            if scans.is_file():
                scenario = load_scenario(path=str(scans), seed=options["seed"])
                name, kind, seed = scenario.name, ScenarioRun.Kind.SCENARIO, scenario.seed
            else:
                if not options["map"] or not options["odom"]:
                    raise CommandError("--map and --odom are required when --scans is a directory")
                scenario = None
                name, kind, seed = scans.name, ScenarioRun.Kind.LOCALIZE, cfg.seed
            out = output_dir(options["out"], f"{name}-seed{seed}")

            recorder = None
            if settings.LOCALIZATION_RECORD_RUNS and not options["no_record"]:
                recorder = RunRecorder(name, kind, seed, cfg.n_particles, cfg.model_dump()).begin(str(out))
            try:
                if scenario is not None:
                    result = run_scenario(
                        scenario, cfg, out, options["snapshot_every"],
                        max_cells=settings.LOCALIZATION_NNF_MAX_CELLS,
                    )
                else:
                    result = run_replay(
                        read_ply(options["map"]),
                        read_scan_dir(scans, cfg),
                        read_odometry(options["odom"]),
                        cfg,
                        out,
                        options["snapshot_every"],
                        frame_period=options["frame_period"],
                        max_cells=settings.LOCALIZATION_NNF_MAX_CELLS,
                    )
            except Exception as e:
                if recorder:
                    recorder.fail(e)
                raise
            if recorder:
                recorder.db_save(result)

        if result.report is not None:
            self.stdout.write(result.report.model_dump_json(indent=2))
        self.stdout.write(self.style.SUCCESS(f"{len(result.frames)} frames localized, artifacts in {out}"))
