from django.apps import AppConfig


class ArithmeticConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "arithmetic"
    verbose_name = "Number core"
