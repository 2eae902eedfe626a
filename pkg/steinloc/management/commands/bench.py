from django.conf import settings
from django.core.management.base import BaseCommand

from steinloc.helper.cli import command_errors, load_config, load_scenario, particle_counts
from steinloc.localization.engine import STAGES
from steinloc.simulation.presets import PRESETS
from steinloc.simulation.runner import benchmark


class Command(BaseCommand):
    help = "Per-stage processing time per frame for several particle counts."

    def add_arguments(self, parser):
        parser.add_argument("--particles", type=str, default="1e4,1e5,1e6", help="comma separated counts")
        parser.add_argument("--frames", type=int, default=20)
        parser.add_argument("--preset", type=str, choices=sorted(PRESETS), default="easy")
        parser.add_argument("--scenario", type=str, help="[path] scenario JSON file instead of a preset")
        parser.add_argument("--config", type=str, help="[path] key = value FilterConfig file")
        parser.add_argument("--seed", type=int, default=None)
        parser.add_argument("--csv", type=str, help="[path] also write the table as CSV")

    def handle(self, *args, **options):
        counts = particle_counts(options["particles"])
        with command_errors():
            cfg = load_config(options["config"], seed=options["seed"])
            scenario = load_scenario(
                options["scenario"], None if options["scenario"] else options["preset"], options["seed"]
            )
            table = benchmark(
                scenario, cfg, counts, options["frames"], max_cells=settings.LOCALIZATION_NNF_MAX_CELLS
            )
        if options["csv"]:
            table.to_csv(options["csv"], index=False, float_format="%.6f")
        self.stdout.write("Processing time per frame [ms]")
        self.stdout.write(
            table[["n_particles"] + STAGES + ["total"]].to_string(index=False, float_format="{:,.2f}".format)
        )
        self.stdout.write("\nPer-particle cost relative to the smallest count (1.00 = linear)")
        ratio_columns = [f"{stage}_per_particle" for stage in ["neighbor_update", "state_update", "total"]]
        self.stdout.write(
            table[["n_particles"] + ratio_columns].to_string(index=False, float_format="{:,.2f}".format)
        )
