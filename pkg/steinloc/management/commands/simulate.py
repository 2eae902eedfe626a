from django.core.management.base import BaseCommand

from steinloc.helper.cli import command_errors, load_scenario, output_dir
from steinloc.simulation.presets import PRESETS
from steinloc.simulation.runner import export_scenario


class Command(BaseCommand):
    help = "Pre-generate map, scans, odometry and ground truth of a scenario for replay with `localize`."

    def add_arguments(self, parser):
        parser.add_argument("--scenario", type=str, help="[path] scenario JSON file")
        parser.add_argument("--preset", type=str, choices=sorted(PRESETS), help="built-in scenario")
        parser.add_argument("--seed", type=int, default=None)
        parser.add_argument("--out", type=str, help="[path] output directory")

    def handle(self, *args, **options):
        with command_errors():
            scenario = load_scenario(options["scenario"], options["preset"], options["seed"])
            paths = export_scenario(scenario, output_dir(options["out"], f"{scenario.name}-seed{scenario.seed}"))
        for key, path in paths.items():
            self.stdout.write(f"{key}: {path}")
        self.stdout.write(
            self.style.SUCCESS(f"Scenario {scenario.name} ({scenario.trajectory.n_frames()} frames) generated.")
        )
