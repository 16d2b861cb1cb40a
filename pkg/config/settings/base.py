"""
Django settings for the tree auto-encoder toolkit.

The project has no web surface: Django provides the settings layer, the
management-command CLI and the test runner.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/4.2/ref/settings/
"""

from pathlib import Path

from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

# SECURITY WARNING: only used to satisfy Django's startup checks, nothing is signed.
SECRET_KEY = config("DJANGO_SECRET_KEY", default="tae-local-not-secret")

DEBUG = config("DJANGO_DEBUG", default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "django.contrib.contenttypes",

    # Third party apps
    'rest_framework',

    # custom apps
    'apps.core',
    'apps.autodiff',
    'apps.corpus',
    'apps.trees',
    'apps.tree_autoencoder',
]

# Database setting is removed from this file - each environment will define its own database settings.


# Internationalization
# https://docs.djangoproject.com/en/4.2/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# REST Framework Configuration
# Only the serializer layer is used (record and config validation, manifest rendering).
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
    'DATETIME_FORMAT': '%Y-%m-%dT%H:%M:%S%z',
    'UNAUTHENTICATED_USER': None,
}


# =============================================================================
# Tree auto-encoder defaults
# Every value can be overridden from the environment (or a .env file).
# =============================================================================

TREE_AUTOENCODER = {
    'HIDDEN': config('TAE_HIDDEN', default=32, cast=int),
    'EPOCHS': config('TAE_EPOCHS', default=200, cast=int),
    'PHASE_LENGTH': config('TAE_PHASE_LENGTH', default=1, cast=int),
    'LEARNING_RATE': config('TAE_LEARNING_RATE', default=0.05, cast=float),
    'TEMPERATURE_START': config('TAE_TEMPERATURE_START', default=1.0, cast=float),
    'TEMPERATURE_DECAY': config('TAE_TEMPERATURE_DECAY', default=0.99, cast=float),
    'TEMPERATURE_MIN': config('TAE_TEMPERATURE_MIN', default=0.1, cast=float),
    'SEED': config('TAE_SEED', default=0, cast=int),
    'SHUFFLE': config('TAE_SHUFFLE', default=True, cast=bool),
    'INIT_RANGE': config('TAE_INIT_RANGE', default=0.1, cast=float),
    # Asserts node-by-node that the decoder walked the encoder's tree
    'DEBUG_TIED_TREES': config('TAE_DEBUG_TIED_TREES', default=DEBUG, cast=bool),
}

# Checkpoint container
CHECKPOINT_MAGIC = b'TAE'
CHECKPOINT_VERSION = 1

# Recorded in every run manifest
TOOLKIT_VERSION = '1.0.0'

# File names written into a training output directory
TRAIN_OUTPUT_FILES = {
    'CHECKPOINT': 'model.tae',
    'LOSS_HISTORY': 'loss_history.csv',
    'MANIFEST': 'manifest.json',
}


# Logging
# https://docs.djangoproject.com/en/4.2/topics/logging/

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'apps': {
            'handlers': ['console'],
            'level': config('TAE_LOG_LEVEL', default='INFO'),
            'propagate': False,
        },
    },
}
