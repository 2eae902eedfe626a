import logging

from django.db.models.signals import post_save
from django.dispatch import receiver

from steinloc.models import ScenarioRun

logger = logging.getLogger(__name__)


@receiver(post_save, sender=ScenarioRun)
def log_run_status(sender, instance: ScenarioRun, created: bool, **kwargs):
    if created:
        logger.info(f"Run {instance.id} ({instance.name}, seed {instance.seed}) created as {instance.status}")
    else:
        logger.info(f"Run {instance.id} ({instance.name}) is {instance.status}")
