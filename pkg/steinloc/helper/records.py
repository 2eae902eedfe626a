import logging
import traceback
from datetime import datetime as dt
from functools import cached_property
from zoneinfo import ZoneInfo as zi

import pandas as pd
from django.conf import settings

from steinloc.models import FrameRecord, ScenarioRun
from steinloc.simulation.runner import RunResult, stats_table

logger = logging.getLogger(__name__)


class RunRecorder:
    """Tracks one run in the database: created, running, then done or failed."""

    def __init__(
        self,
        name: str,
        kind: str,
        seed: int,
        n_particles: int,
        config: dict | None = None,
        run: ScenarioRun | None = None,
    ):
        """Initialize the recorder, creating the ScenarioRun unless one is given.

        Args:
            name (str): scenario or input name.
            kind (str): one of ScenarioRun.Kind.
            seed (int): root seed of the run.
            n_particles (int): particle count.
            config (dict | None, optional): FilterConfig dump. Defaults to None.
            run (ScenarioRun | None, optional): an already queued run. Defaults to None.
        """
        self.run: ScenarioRun = run or ScenarioRun.objects.create(
            name=name,
            kind=kind,
            seed=seed,
            n_particles=n_particles,
            config=config or {},
        )

    def _now(self) -> dt:
        return dt.now(tz=zi(settings.TIME_ZONE))

    def begin(self, output_dir: str = "") -> "RunRecorder":
        self.run.status = ScenarioRun.Status.RUNNING
        self.run.started = self._now()
        self.run.output_dir = output_dir
        self.run.save()
        return self

    def fail(self, error: BaseException) -> "RunRecorder":
        self.run.status = ScenarioRun.Status.FAILED
        self.run.completed = self._now()
        if self.run.started:
            self.run.duration = self.run.completed - self.run.started
        self.run.error = {
            "type": type(error).__name__,
            "message": str(error),
            "traceback": traceback.format_exception(error),
        }
        self.run.save()
        return self

    def db_save(self, result: RunResult) -> "RunRecorder":
        """Store the report and one FrameRecord per frame.

        Args:
            result (RunResult): finished run.

        Returns:
            RunRecorder: the recorder.
        """
        table = stats_table(result.frames, result.errors)
        has_truth = "trans_err" in table.columns
        records = [
            FrameRecord(
                run=self.run,
                frame=int(row["frame"]),
                tx=row["tx"],
                ty=row["ty"],
                tz=row["tz"],
                qx=row["qx"],
                qy=row["qy"],
                qz=row["qz"],
                qw=row["qw"],
                log_post=row["log_post"],
                trans_err=row["trans_err"] if has_truth else None,
                rot_err_deg=row["rot_err_deg"] if has_truth else None,
                n_matched_mean=row["n_matched_mean"],
                observation_rejected=bool(row["observation_rejected"]),
                timings=frame.timings,
            )
            for frame, (_, row) in zip(result.frames, table.iterrows())
        ]
        FrameRecord.objects.bulk_create(records, batch_size=500)
        self.run.report = result.report.model_dump() if result.report else {}
        self.run.status = ScenarioRun.Status.DONE
        self.run.completed = self._now()
        if self.run.started:
            self.run.duration = self.run.completed - self.run.started
        self.run.save()
        logger.info(f"Run {self.run.id}: stored {len(records)} frames")
        return self


class RunData:
    def __init__(self, run: ScenarioRun):
        self.run = run

    @cached_property
    def records(self) -> pd.DataFrame:
        return pd.DataFrame(list(self.run.frames.all().values()))

    def frames(self) -> pd.DataFrame:
        if self.records.empty:
            return pd.DataFrame()
        table = self.records.drop(columns=["id", "run_id"]).sort_values("frame").reset_index(drop=True)
        return table.astype(object).where(table.notna(), None)

    def stage_means(self) -> dict[str, float]:
        if self.records.empty:
            return {}
        return pd.DataFrame(self.records["timings"].tolist()).mean().to_dict()

    def summary(self) -> dict:
        return {
            "id": str(self.run.id),
            "name": self.run.name,
            "kind": self.run.kind,
            "status": self.run.status,
            "seed": self.run.seed,
            "n_particles": self.run.n_particles,
            "duration": self.run.duration.total_seconds() if self.run.duration else None,
            "report": self.run.report,
            "error": self.run.error,
            "output_dir": self.run.output_dir,
        }
