from django.core.management.base import BaseCommand

from steinloc.helper.cli import command_errors, load_config, load_scenario
from steinloc.models import ScenarioRun
from steinloc.simulation.models import EvalReport
from steinloc.simulation.presets import PRESETS
from steinloc.tasks import run_scenario_task


class Command(BaseCommand):
    help = "Run a scenario over many seeds, inline or queued on celery, and count successful runs."

    def add_arguments(self, parser):
        parser.add_argument("--preset", type=str, choices=sorted(PRESETS), default="easy")
        parser.add_argument("--scenario", type=str, help="[path] scenario JSON file instead of a preset")
        parser.add_argument("--seeds", type=int, default=10, help="seeds 0 .. N-1")
        parser.add_argument("--first-seed", type=int, default=0)
        parser.add_argument("--particles", type=int, default=None)
        parser.add_argument("--config", type=str, help="[path] key = value FilterConfig file")
        parser.add_argument("--queue", action="store_true", help="dispatch celery tasks instead of running inline")
        parser.add_argument("--required", type=int, default=8, help="successful runs needed to pass")

    def handle(self, *args, **options):
        seeds = range(options["first_seed"], options["first_seed"] + options["seeds"])
        with command_errors():
            base = load_scenario(options["scenario"], None if options["scenario"] else options["preset"])
            reports: list[EvalReport] = []
            for seed in seeds:
                scenario = base.model_copy(update={"seed": seed})
                cfg = load_config(options["config"], seed=seed, n_particles=options["particles"])
                if options["queue"]:
                    run = ScenarioRun.objects.create(
                        name=scenario.name,
                        kind=ScenarioRun.Kind.SWEEP,
                        seed=seed,
                        n_particles=cfg.n_particles,
                        config=cfg.model_dump(),
                    )
                    run_scenario_task.delay(
                        scenario=scenario.model_dump(mode="json"), config=cfg.model_dump(), run_id=str(run.id)
                    )
                    continue
                report = EvalReport.model_validate(
                    run_scenario_task(scenario=scenario.model_dump(mode="json"), config=cfg.model_dump())
                )
                reports.append(report)
                self.stdout.write(
                    f"seed {seed}: converged={report.convergence_frame} "
                    f"ate_rmse={report.ate_rmse:.3f} recovery={report.recovery_frames}"
                )

        if options["queue"]:
            self.stdout.write(self.style.SUCCESS(f"{len(seeds)} runs of {base.name} have been queued."))
            return
        succeeded = sum(r.converged and r.recovered for r in reports)
        summary = f"{succeeded}/{len(reports)} runs converged and recovered from every occlusion"
        if succeeded >= options["required"]:
            self.stdout.write(self.style.SUCCESS(summary))
        else:
            self.stdout.write(self.style.WARNING(summary))
