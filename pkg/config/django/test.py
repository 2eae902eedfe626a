from .base import *

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": ":memory:",
    }
}

CELERY_TASK_ALWAYS_EAGER = True
CELERY_TASK_EAGER_PROPAGATES = True
LOCALIZATION_OUTPUT_DIR = BASE_DIR / ".test-runs"
LOGGING["loggers"]["steinloc"]["level"] = "WARNING"
