from django.apps import AppConfig


class SmootherConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'smoother'
    verbose_name = 'Functional data smoother'
