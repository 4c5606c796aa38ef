from django.apps import AppConfig


class ForagingConfig(AppConfig):
    name = 'foraging'
    verbose_name = 'Memory foraging'
