import uuid

from django.db import models


class ScenarioRun(models.Model):
    class Kind(models.TextChoices):
        LOCALIZE = "localize"
        SCENARIO = "scenario"
        BENCH = "bench"
        SWEEP = "sweep"

    class Status(models.TextChoices):
        QUEUED = "queued"
        RUNNING = "running"
        DONE = "done"
        FAILED = "failed"

    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)
    name = models.CharField(max_length=100)
    kind = models.CharField(max_length=16, choices=Kind.choices, default=Kind.SCENARIO)
    status = models.CharField(max_length=16, choices=Status.choices, default=Status.QUEUED)
    seed = models.IntegerField(default=0)
    n_particles = models.IntegerField()
    started = models.DateTimeField(null=True, blank=True)
    completed = models.DateTimeField(null=True, blank=True)
    duration = models.DurationField(null=True, blank=True)
    config = models.JSONField(default=dict, blank=True)
    report = models.JSONField(null=True, default=dict, blank=True)
    error = models.JSONField(null=True, default=dict, blank=True)
    output_dir = models.CharField(max_length=500, blank=True, default="")
    last_edited = models.DateTimeField(auto_now=True)
    added = models.DateTimeField(auto_now_add=True, editable=False)

    class Meta:
        ordering = ["-added"]

    def __str__(self) -> str:
        return f"{self.name} seed={self.seed} [{self.status}]"


class FrameRecord(models.Model):
    run = models.ForeignKey(to=ScenarioRun, on_delete=models.CASCADE, related_name="frames")
    frame = models.IntegerField()
    tx = models.FloatField()
    ty = models.FloatField()
    tz = models.FloatField()
    qx = models.FloatField()
    qy = models.FloatField()
    qz = models.FloatField()
    qw = models.FloatField()
    log_post = models.FloatField()
    trans_err = models.FloatField(null=True, blank=True)
    rot_err_deg = models.FloatField(null=True, blank=True)
    n_matched_mean = models.FloatField(default=0.0)
    observation_rejected = models.BooleanField(default=False)
    timings = models.JSONField(default=dict, blank=True)

    class Meta:
        ordering = ["run", "frame"]
        constraints = [
            models.UniqueConstraint(fields=["run", "frame"], name="unique_run_frame"),
        ]
