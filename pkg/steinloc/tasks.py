import logging
from pathlib import Path
from uuid import UUID

from celery import shared_task
from django.conf import settings

from steinloc.helper.records import RunRecorder
from steinloc.localization.models import FilterConfig
from steinloc.models import ScenarioRun
from steinloc.simulation.models import Scenario
from steinloc.simulation.runner import run_scenario

logger = logging.getLogger(__name__)


@shared_task(name="steinloc.tasks.run_scenario_task")
def run_scenario_task(
    scenario: dict,
    config: dict,
    run_id: str | None = None,
    output_dir: str | None = None,
    snapshot_every: int = 0,
) -> dict:
    """Run one seeded scenario and record it.

    Args:
        scenario (dict): Scenario as JSON-compatible dict.
        config (dict): FilterConfig keys.
        run_id (str | None, optional): queued ScenarioRun to fill in. Defaults to None.
        output_dir (str | None, optional): artifact directory. Defaults to
            LOCALIZATION_OUTPUT_DIR/<name>-seed<seed>.
        snapshot_every (int, optional): posterior snapshot period. Defaults to 0.

    Raises:
        LocalizationError: propagated after the run is marked failed.

    Returns:
        dict: the EvalReport.
    """
    scenario = Scenario.model_validate(scenario)
    cfg = FilterConfig.model_validate(config)
    out = Path(output_dir or Path(settings.LOCALIZATION_OUTPUT_DIR) / f"{scenario.name}-seed{scenario.seed}")
    recorder = RunRecorder(
        name=scenario.name,
        kind=ScenarioRun.Kind.SCENARIO,
        seed=scenario.seed,
        n_particles=cfg.n_particles,
        config=cfg.model_dump(),
        run=ScenarioRun.objects.get(id=UUID(run_id)) if run_id else None,
    ).begin(str(out))
    try:
        result = run_scenario(
            scenario,
            cfg,
            out_dir=out,
            snapshot_every=snapshot_every,
            max_cells=settings.LOCALIZATION_NNF_MAX_CELLS,
        )
    except Exception as e:
        logger.error(f"Scenario {scenario.name} seed {scenario.seed} failed: {e}")
        recorder.fail(e)
        raise
    recorder.db_save(result)
    return result.report.model_dump()
