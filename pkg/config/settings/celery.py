import os

from celery import Celery

from config.env import BASE_DIR, env

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.django.local")
env.read_env(os.path.join(BASE_DIR, ".env"))


app = Celery("config")
app.config_from_object("django.conf:settings", namespace="CELERY")
app.autodiscover_tasks()

_redis_url = "redis://{host}:{port}/{db}".format(
    host=env("REDIS_HOST", default="localhost"),
    port=env("REDIS_PORT", default="6379"),
    db=env("REDIS_DB", default="0"),
)

# Broker settings
CELERY_BROKER_URL = env("CELERY_BROKER_URL", default=_redis_url)
CELERY_RESULT_BACKEND = env("CELERY_RESULT_BACKEND", default=_redis_url)
CELERY_BROKER_CONNECTION_RETRY_ON_STARTUP = True

# Serialization
CELERY_ACCEPT_CONTENT = ["json"]
CELERY_TASK_SERIALIZER = "json"
CELERY_RESULT_SERIALIZER = "json"

# Time and timezone
CELERY_TIMEZONE = env("TIME_ZONE", default="UTC")

# Task settings
CELERY_TASK_ALWAYS_EAGER = env.bool("CELERY_TASK_ALWAYS_EAGER", default=False)
CELERY_TASK_TRACK_STARTED = True
CELERY_TASK_TIME_LIMIT = 60 * 60  # 1 hour
CELERY_TASK_SOFT_TIME_LIMIT = 55 * 60

# Worker settings
CELERY_WORKER_MAX_TASKS_PER_CHILD = 16
CELERY_WORKER_PREFETCH_MULTIPLIER = 1

# Result settings
CELERY_RESULT_EXPIRES = 60 * 60 * 24  # Results expire after 1 day
