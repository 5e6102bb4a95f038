from django.apps import AppConfig


class WsdtConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'wsdt'
    verbose_name = 'Wavelet spectrum diffusion transformer'
