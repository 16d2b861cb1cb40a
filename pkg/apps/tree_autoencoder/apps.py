from django.apps import AppConfig


class TreeAutoencoderConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.tree_autoencoder"
    verbose_name = "Tree auto-encoder"
