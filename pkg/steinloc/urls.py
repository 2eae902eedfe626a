from django.urls import path
from . import views

urlpatterns = [
    path("runs/", views.runs, name="runs"),
    path("runs/<uuid:runId>/", views.run_details, name="run details"),
]
