from django.apps import AppConfig


class SteinlocConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "steinloc"

    def ready(self):
        import steinloc.signals  # noqa: F401
        from django.conf import settings
        import numba

        threads = getattr(settings, "LOCALIZATION_NUM_THREADS", 0)
        if threads:
            numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
