from django.apps import AppConfig


class InferenceConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.inference'
    verbose_name = 'Conjugate model, PPoS and decision rules'
