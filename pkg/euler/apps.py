from django.apps import AppConfig


class EulerConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "euler"
    verbose_name = "Euler-product prime sums"
