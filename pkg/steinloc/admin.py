from django.contrib import admin

from .models import FrameRecord, ScenarioRun


@admin.register(ScenarioRun)
class ScenarioRunAdmin(admin.ModelAdmin):
    list_display = ("name", "kind", "status", "seed", "n_particles", "duration", "added")
    list_filter = ("kind", "status")


admin.site.register(FrameRecord)
