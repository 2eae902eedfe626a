from .base import *

INSTALLED_APPS.append("django_extensions")
