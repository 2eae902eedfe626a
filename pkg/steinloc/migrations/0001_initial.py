import uuid

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ScenarioRun",
            fields=[
                ("id", models.UUIDField(default=uuid.uuid4, editable=False, primary_key=True, serialize=False)),
                ("name", models.CharField(max_length=100)),
                (
                    "kind",
                    models.CharField(
                        choices=[
                            ("localize", "Localize"),
                            ("scenario", "Scenario"),
                            ("bench", "Bench"),
                            ("sweep", "Sweep"),
                        ],
                        default="scenario",
                        max_length=16,
                    ),
                ),
                (
                    "status",
                    models.CharField(
                        choices=[
                            ("queued", "Queued"),
                            ("running", "Running"),
                            ("done", "Done"),
                            ("failed", "Failed"),
                        ],
                        default="queued",
                        max_length=16,
                    ),
                ),
                ("seed", models.IntegerField(default=0)),
                ("n_particles", models.IntegerField()),
                ("started", models.DateTimeField(blank=True, null=True)),
                ("completed", models.DateTimeField(blank=True, null=True)),
                ("duration", models.DurationField(blank=True, null=True)),
                ("config", models.JSONField(blank=True, default=dict)),
                ("report", models.JSONField(blank=True, default=dict, null=True)),
                ("error", models.JSONField(blank=True, default=dict, null=True)),
                ("output_dir", models.CharField(blank=True, default="", max_length=500)),
                ("last_edited", models.DateTimeField(auto_now=True)),
                ("added", models.DateTimeField(auto_now_add=True)),
            ],
            options={
                "ordering": ["-added"],
            },
        ),
        migrations.CreateModel(
            name="FrameRecord",
            fields=[
                ("id", models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                ("frame", models.IntegerField()),
                ("tx", models.FloatField()),
                ("ty", models.FloatField()),
                ("tz", models.FloatField()),
                ("qx", models.FloatField()),
                ("qy", models.FloatField()),
                ("qz", models.FloatField()),
                ("qw", models.FloatField()),
                ("log_post", models.FloatField()),
                ("trans_err", models.FloatField(blank=True, null=True)),
                ("rot_err_deg", models.FloatField(blank=True, null=True)),
                ("n_matched_mean", models.FloatField(default=0.0)),
                ("observation_rejected", models.BooleanField(default=False)),
                ("timings", models.JSONField(blank=True, default=dict)),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="frames",
                        to="steinloc.scenariorun",
                    ),
                ),
            ],
            options={
                "ordering": ["run", "frame"],
                "constraints": [
                    models.UniqueConstraint(fields=("run", "frame"), name="unique_run_frame"),
                ],
            },
        ),
    ]
