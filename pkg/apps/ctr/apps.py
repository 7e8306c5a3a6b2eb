from django.apps import AppConfig


class CtrConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.ctr"
