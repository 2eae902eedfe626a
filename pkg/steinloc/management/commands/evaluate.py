from django.core.management.base import BaseCommand

from steinloc.helper.cli import command_errors
from steinloc.simulation.evaluation import evaluate_ate
from steinloc.simulation.trajectory import read_tum


class Command(BaseCommand):
    help = "Absolute trajectory error of an estimated TUM trajectory against ground truth."

    def add_arguments(self, parser):
        parser.add_argument("--est", type=str, required=True, help="[path] estimated TUM trajectory")
        parser.add_argument("--gt", type=str, required=True, help="[path] ground-truth TUM trajectory")
        parser.add_argument("--skip", type=int, default=0, help="leading frames excluded from the statistics")
        parser.add_argument("--align", action="store_true", help="rigidly align the estimate first")

    def handle(self, *args, **options):
        with command_errors():
            _, estimated = read_tum(options["est"])
            _, truth = read_tum(options["gt"])
            report = evaluate_ate(estimated, truth, skip=options["skip"], align=options["align"])
        self.stdout.write(report.model_dump_json(indent=2))
